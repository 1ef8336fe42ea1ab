//! Executes a scenario config and writes its output files.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bargaining::{
    random_votes, run_auction, run_blind_vote, run_random_ratio_with, seeded_rng, AuctionSpec, BargainingError,
    BlindVoteSpec, DiceSpec,
};
use crate::config::{load_config, BargainingSession, ConfigError, CustomSpec, Mechanism, Scenario, ScenarioConfig};
use crate::engine::{
    build_matrix_from_transactions, run, EngineError, GameRun, LayerState, RoundInput, TransferMatrix,
};
use crate::io::{
    write_bargaining, write_metrics, write_pairwise, write_snapshots, BargainingRow, IoError, MetricsRow, PairwiseRow,
};
use crate::metrics::{entropy, inflation_ratio, normalize, zeta};
use crate::scenarios::{
    build_pagerank_game, circles_round_with, run_lightning_scenario, ubi_initial_state, ubi_provider, CirclesState,
    NoTrades, ScenarioError,
};

pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PAIRWISE_FILE: &str = "pairwise.csv";
pub const BARGAINING_FILE: &str = "bargaining.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("circles round {round}: {source}")]
    CirclesRound {
        round: u64,
        #[source]
        source: ScenarioError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("bargaining session in round {round}: {source}")]
    Bargaining {
        round: u64,
        #[source]
        source: BargainingError,
    },
    #[error("cannot write `{path}`: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: IoError,
    },
    #[error("cannot create `{path}`: {source}")]
    CreateDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl RunError {
    /// 2 for anything caused by the config or its data, 1 for output and
    /// internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Output { .. } | Self::CreateDir { .. } | Self::Pool(_) => 1,
            _ => 2,
        }
    }
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub rounds: u64,
    pub snapshots: Vec<LayerState>,
    pub metrics: Vec<MetricsRow>,
    pub pairwise: Vec<PairwiseRow>,
    pub bargaining: Vec<BargainingRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub kind: String,
    pub seed: u64,
    pub rounds: u64,
    pub out_dir: PathBuf,
    /// File name to hex SHA-256 of its bytes.
    pub checksums: BTreeMap<String, String>,
}

fn state_metrics(state: &LayerState, matrix: Option<&TransferMatrix>) -> Result<MetricsRow, RunError> {
    let entropy_bits = normalize(state.balances()).ok().map(|p| entropy(&p));
    let report = matrix
        .map(|w| zeta(w, None))
        .transpose()
        .map_err(|e| EngineError::Provider(e.to_string()))?;
    Ok(MetricsRow {
        round: state.round(),
        layer: state.layer().to_owned(),
        supply: state.supply(),
        entropy_bits,
        zeta: report.map(|r| r.zeta),
        zeta_star: report.map(|r| r.zeta_star),
    })
}

fn game_metrics(game: &GameRun) -> Result<Vec<MetricsRow>, RunError> {
    game.states
        .iter()
        .enumerate()
        .map(|(k, s)| state_metrics(s, k.checked_sub(1).map(|i| &game.inputs[i].matrix)))
        .collect()
}

fn from_game(game: GameRun, rounds: u64) -> Result<RunOutput, RunError> {
    Ok(RunOutput {
        rounds,
        metrics: game_metrics(&game)?,
        snapshots: game.states,
        ..RunOutput::default()
    })
}

/// Runs a scenario in memory.
pub fn simulate(config: &ScenarioConfig, seed: u64) -> Result<RunOutput, RunError> {
    let rounds = config.rounds;
    match &config.scenario {
        Scenario::Ubi(spec) => {
            let mut provider = ubi_provider(*spec);
            from_game(run(ubi_initial_state(spec)?, &mut provider, rounds)?, rounds)
        }
        Scenario::PageRank(spec) => {
            let game = build_pagerank_game(spec)?;
            let mut provider = game.provider();
            from_game(run(game.initial.clone(), &mut provider, rounds)?, rounds)
        }
        Scenario::Lightning { main, plan } => {
            let outcome = run_lightning_scenario(main, plan)?;
            let main_states = [
                main.clone().with_round(0),
                outcome.committed.clone().with_round(1),
                outcome.final_main.clone().with_round(2),
            ];
            let mut out = RunOutput {
                rounds,
                ..RunOutput::default()
            };
            for s in &main_states {
                out.metrics.push(state_metrics(s, None)?);
            }
            out.metrics.extend(game_metrics(&outcome.sub_run)?);
            out.snapshots.extend(main_states);
            out.snapshots.extend(outcome.sub_run.states);
            Ok(out)
        }
        Scenario::Circles { graph, m } => {
            let mut rng = seeded_rng(seed);
            let mut state = CirclesState::seed(graph.clone(), *m)?;
            let mut out = RunOutput {
                rounds,
                ..RunOutput::default()
            };
            let record = |state: &CirclesState, out: &mut RunOutput| -> Result<(), RunError> {
                for coin in &state.coins {
                    let coin = coin.clone().with_round(state.round);
                    out.metrics.push(state_metrics(&coin, None)?);
                    out.snapshots.push(coin);
                }
                Ok(())
            };
            record(&state, &mut out)?;
            for round in 0..rounds {
                state = circles_round_with(&state, &mut rng, &mut NoTrades)
                    .map_err(|source| RunError::CirclesRound { round, source })?;
                record(&state, &mut out)?;
            }
            debug!("circles: {} players after {rounds} rounds", state.players());
            Ok(out)
        }
        Scenario::Custom(spec) => simulate_custom(spec, rounds, seed),
    }
}

fn custom_game(initial: &LayerState, log: &crate::engine::TransactionLog, rounds: u64) -> Result<GameRun, EngineError> {
    let mut provider = |round: u64, state: &LayerState| -> Result<RoundInput, EngineError> {
        let mut holdings = state.clone();
        let mut joining = Vec::new();
        for r in log.for_round(round) {
            if holdings.slot(&r.receiver).is_none() {
                holdings.add_player(r.receiver.clone());
                joining.push(r.receiver.clone());
            }
        }
        let matrix = build_matrix_from_transactions(log.for_round(round), &holdings)?;
        Ok(RoundInput {
            joining,
            ..RoundInput::closed(matrix)
        })
    };
    run(initial.clone(), &mut provider, rounds)
}

fn simulate_custom(spec: &CustomSpec, rounds: u64, seed: u64) -> Result<RunOutput, RunError> {
    let games = spec
        .layers
        .iter()
        .map(|(initial, log)| {
            if log.last_round().is_some_and(|r| r >= rounds) {
                warn!(
                    "layer `{}`: transactions after round {} are ignored",
                    initial.layer(),
                    rounds.saturating_sub(1)
                );
            }
            custom_game(initial, log, rounds)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = RunOutput {
        rounds,
        ..RunOutput::default()
    };
    // Round-major order so each round's layers sit together.
    for k in 0..=rounds as usize {
        for game in &games {
            let matrix = k.checked_sub(1).map(|i| &game.inputs[i].matrix);
            out.metrics.push(state_metrics(&game.states[k], matrix)?);
            out.snapshots.push(game.states[k].clone());
        }
    }
    for k in 1..=rounds as usize {
        let circulation: Vec<f64> = games
            .iter()
            .map(|g| zeta(&g.inputs[k - 1].matrix, None).map(|r| r.zeta))
            .collect::<Result<_, _>>()
            .map_err(|e| EngineError::Provider(e.to_string()))?;
        for a in 0..games.len() {
            for b in (0..games.len()).filter(|&b| b != a) {
                let (sa, sb) = (&games[a].states[k], &games[b].states[k]);
                match inflation_ratio(circulation[a], sa.supply(), circulation[b], sb.supply()) {
                    Ok(x_r) => out.pairwise.push(PairwiseRow {
                        round: k as u64,
                        layer_a: sa.layer().to_owned(),
                        layer_b: sb.layer().to_owned(),
                        x_r,
                    }),
                    Err(e) => debug!("round {k}: no ratio for {} / {}: {e}", sa.layer(), sb.layer()),
                }
            }
        }
    }
    let mut rng = seeded_rng(seed);
    for session in &spec.bargaining {
        if let Some(row) = bargain(session, &mut rng)? {
            out.bargaining.push(row);
        }
    }
    Ok(out)
}

fn bargain(s: &BargainingSession, rng: &mut crate::bargaining::SimRng) -> Result<Option<BargainingRow>, RunError> {
    let fail = |source| RunError::Bargaining { round: s.round, source };
    let counterpart = s.layer_b.clone().unwrap_or_default();
    let row = |mechanism: &str, layer_b: String, rate: f64, detail: String| BargainingRow {
        round: s.round,
        mechanism: mechanism.to_owned(),
        layer_a: s.layer_a.clone(),
        layer_b,
        rate,
        detail,
    };
    Ok(match &s.mechanism {
        Mechanism::RandomRatio {
            kappa,
            alpha,
            group_a,
            group_b,
        } => {
            let spec = DiceSpec {
                kappa: *kappa,
                alpha: *alpha,
                group_a: *group_a,
                group_b: *group_b,
            };
            let o = run_random_ratio_with(&spec, rng).map_err(fail)?;
            Some(row(
                "random_ratio",
                counterpart,
                o.rho_xy,
                format!(
                    "x_a={} y_b={}",
                    crate::io::format_number(o.x_a),
                    crate::io::format_number(o.y_b)
                ),
            ))
        }
        Mechanism::BlindVote {
            alpha,
            beta,
            group_a,
            group_b,
        } => {
            let spec = BlindVoteSpec {
                alpha: *alpha,
                beta: *beta,
                votes_a: random_votes(*group_a, rng),
                votes_b: random_votes(*group_b, rng),
            };
            let o = run_blind_vote(&spec).map_err(fail)?;
            Some(row(
                "blind_vote",
                counterpart,
                o.rho_xy,
                format!(
                    "x_a={} y_b={} tie_a={} tie_b={}",
                    crate::io::format_number(o.x_a),
                    crate::io::format_number(o.y_b),
                    o.tie_a,
                    o.tie_b
                ),
            ))
        }
        Mechanism::Auction {
            quantity,
            minimum_bids,
            bids,
        } => {
            let spec = AuctionSpec {
                item_layer: s.layer_a.clone(),
                quantity: *quantity,
                minimum_bids: minimum_bids.clone(),
                bids: bids.clone(),
            };
            match run_auction(&spec).map_err(fail)? {
                Some(o) => Some(row(
                    "auction",
                    o.winner_layer,
                    o.rate,
                    format!("bidder={} bid={}", o.bidder, crate::io::format_number(o.winning_bid)),
                )),
                None => {
                    warn!("round {}: auction of `{}` received no valid bid", s.round, s.layer_a);
                    None
                }
            }
        }
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    checksums: &mut BTreeMap<String, String>,
    write: impl FnOnce(&mut Vec<u8>) -> Result<(), IoError>,
) -> Result<(), RunError> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write(&mut buf).map_err(|source| RunError::Output {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, &buf).map_err(|e| RunError::Output {
        path: path.clone(),
        source: e.into(),
    })?;
    checksums.insert(name.to_owned(), hex::encode(Sha256::digest(&buf)));
    Ok(())
}

/// Writes the output files of `output` into `out_dir` and returns the
/// manifest, which is also written as `manifest.json`.
pub fn write_outputs(
    output: &RunOutput,
    config_path: &Path,
    kind: &str,
    seed: u64,
    out_dir: &Path,
) -> Result<RunManifest, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::CreateDir {
        path: out_dir.to_owned(),
        source,
    })?;
    let mut checksums = BTreeMap::new();
    write_file(out_dir, SNAPSHOTS_FILE, &mut checksums, |b| {
        write_snapshots(b, &output.snapshots)
    })?;
    write_file(out_dir, METRICS_FILE, &mut checksums, |b| {
        write_metrics(b, &output.metrics)
    })?;
    if !output.pairwise.is_empty() {
        write_file(out_dir, PAIRWISE_FILE, &mut checksums, |b| {
            write_pairwise(b, &output.pairwise)
        })?;
    }
    if !output.bargaining.is_empty() {
        write_file(out_dir, BARGAINING_FILE, &mut checksums, |b| {
            write_bargaining(b, &output.bargaining)
        })?;
    }
    let manifest = RunManifest {
        config: config_path.to_owned(),
        kind: kind.to_owned(),
        seed,
        rounds: output.rounds,
        out_dir: out_dir.to_owned(),
        checksums,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    fs::write(&path, text).map_err(|e| RunError::Output { path, source: e.into() })?;
    Ok(manifest)
}

/// Loads `config_path`, runs it with `seed` (or the config's seed) and writes
/// the outputs into `out_dir`.
pub fn run_command(config_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<RunManifest, RunError> {
    let config = load_config(config_path)?;
    let seed = seed.unwrap_or(config.seed);
    info!(
        "running {} for {} rounds with seed {seed}",
        config.scenario.kind(),
        config.rounds
    );
    let output = simulate(&config, seed)?;
    write_outputs(&output, config_path, config.scenario.kind(), seed, out_dir)
}

/// Parses `A..B` (exclusive) or `A..=B` (inclusive).
pub fn parse_seed_range(s: &str) -> Option<Range<u64>> {
    let (a, b) = s.split_once("..")?;
    let a: u64 = a.trim().parse().ok()?;
    let range = match b.strip_prefix('=') {
        Some(b) => a..b.trim().parse::<u64>().ok()?.checked_add(1)?,
        None => a..b.trim().parse().ok()?,
    };
    (range.start < range.end).then_some(range)
}

/// Runs the config once per seed on a bounded worker pool. Seed `s` writes
/// into `out_dir/seed-s`. Manifests are returned in seed order.
pub fn batch_command(
    config_path: &Path,
    seeds: Range<u64>,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<Vec<RunManifest>, RunError> {
    let config = load_config(config_path)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let seeds: Vec<u64> = seeds.collect();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let output = simulate(&config, seed)?;
                write_outputs(
                    &output,
                    config_path,
                    config.scenario.kind(),
                    seed,
                    &out_dir.join(format!("seed-{seed}")),
                )
            })
            .collect()
    })
}
