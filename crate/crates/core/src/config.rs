//! Scenario configuration files (TOML).
//!
//! ```toml
//! [scenario]
//! kind = "ubi"      # pagerank | ubi | lightning | circles | custom
//! rounds = 2
//! seed = 0          # optional, default 0
//!
//! [ubi]
//! omega = 100.0
//! delta = 0.1
//! epsilon = 0.5
//! ```
//!
//! Unknown keys anywhere in the file are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{LayerState, TransactionLog, TransactionRecord};
use crate::io::read_transactions;
use crate::scenarios::{LightningPlan, PageRankSpec, SubRound, TrustGraph, UbiSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_owned(),
        reason: reason.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<RawScenario>,
    pagerank: Option<RawPageRank>,
    ubi: Option<RawUbi>,
    lightning: Option<RawLightning>,
    circles: Option<RawCircles>,
    custom: Option<RawCustom>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    rounds: Option<u64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPageRank {
    pages: Option<Vec<String>>,
    links: Vec<(String, String)>,
    damping: Option<f64>,
    #[serde(default)]
    dangling_fallback: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUbi {
    omega: f64,
    delta: f64,
    epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransfer {
    from: String,
    to: String,
    amount: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLightning {
    main: BTreeMap<String, f64>,
    commitments: BTreeMap<String, f64>,
    #[serde(default)]
    sub_rounds: Vec<Vec<RawTransfer>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircles {
    seed_graph: Vec<(String, String)>,
    m: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustom {
    layers: Vec<RawLayer>,
    #[serde(default)]
    bargaining: Vec<RawBargaining>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    id: String,
    balances: BTreeMap<String, f64>,
    /// CSV transaction log, relative to the config file.
    transactions: Option<PathBuf>,
    transfers: Option<Vec<RawRoundTransfer>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoundTransfer {
    round: u64,
    from: String,
    to: String,
    amount: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBargaining {
    mechanism: String,
    layer_a: String,
    layer_b: Option<String>,
    round: Option<u64>,
    kappa: Option<u32>,
    alpha: Option<f64>,
    beta: Option<f64>,
    group_a: Option<usize>,
    group_b: Option<usize>,
    quantity: Option<f64>,
    minimum_bids: Option<BTreeMap<String, f64>>,
    bids: Option<Vec<RawBid>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBid {
    layer: String,
    bidder: String,
    amount: f64,
}

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_ATTACHMENT: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub rounds: u64,
    pub seed: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    PageRank(PageRankSpec),
    Ubi(UbiSpec),
    Lightning { main: LayerState, plan: LightningPlan },
    Circles { graph: TrustGraph, m: usize },
    Custom(CustomSpec),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::PageRank(_) => "pagerank",
            Self::Ubi(_) => "ubi",
            Self::Lightning { .. } => "lightning",
            Self::Circles { .. } => "circles",
            Self::Custom(_) => "custom",
        }
    }
}

/// Independent layers driven by transaction logs, plus bargaining sessions
/// between pairs of them.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSpec {
    pub layers: Vec<(LayerState, TransactionLog)>,
    pub bargaining: Vec<BargainingSession>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BargainingSession {
    pub round: u64,
    /// For auctions, the layer whose tokens are sold.
    pub layer_a: String,
    /// Counterpart layer; auctions choose it from the winning bid.
    pub layer_b: Option<String>,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// Dice rolls with `kappa` faces scaled by `alpha`.
    RandomRatio {
        kappa: u32,
        alpha: u32,
        group_a: usize,
        group_b: usize,
    },
    /// Random votes between two candidate amounts.
    BlindVote {
        alpha: f64,
        beta: f64,
        group_a: usize,
        group_b: usize,
    },
    Auction {
        quantity: f64,
        minimum_bids: BTreeMap<String, f64>,
        bids: Vec<crate::bargaining::Bid>,
    },
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses and validates a config; relative file references resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_owned(),
    })?;
    let head = raw.scenario.ok_or_else(|| invalid("scenario", "missing table"))?;
    let kind = head
        .kind
        .ok_or_else(|| invalid("scenario.kind", "required key is missing"))?;
    let seed = head.seed.unwrap_or(0);

    let blocks = [
        ("pagerank", raw.pagerank.is_some()),
        ("ubi", raw.ubi.is_some()),
        ("lightning", raw.lightning.is_some()),
        ("circles", raw.circles.is_some()),
        ("custom", raw.custom.is_some()),
    ];
    if !blocks.iter().any(|(k, _)| *k == kind) {
        return Err(invalid(
            "scenario.kind",
            format!("`{kind}` is not one of pagerank, ubi, lightning, circles, custom"),
        ));
    }
    if let Some((other, _)) = blocks.iter().find(|(k, present)| *present && *k != kind) {
        return Err(invalid(
            other,
            format!("table does not apply to scenario kind `{kind}`"),
        ));
    }
    let missing = || invalid(&kind, "missing table");
    let require_rounds = || {
        head.rounds
            .ok_or_else(|| invalid("scenario.rounds", "required key is missing"))
    };

    let (scenario, rounds) = match kind.as_str() {
        "pagerank" => {
            let b = raw.pagerank.ok_or_else(missing)?;
            (Scenario::PageRank(pagerank(b)?), require_rounds()?)
        }
        "ubi" => {
            let b = raw.ubi.ok_or_else(missing)?;
            let spec = UbiSpec {
                omega: b.omega,
                delta: b.delta,
                epsilon: b.epsilon,
            };
            if !(spec.omega.is_finite() && spec.omega > 0.0) {
                return Err(invalid("ubi.omega", "must be positive"));
            }
            for (key, v) in [("ubi.delta", spec.delta), ("ubi.epsilon", spec.epsilon)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(key, format!("{v} is outside [0, 1]")));
                }
            }
            (Scenario::Ubi(spec), require_rounds()?)
        }
        "lightning" => {
            let b = raw.lightning.ok_or_else(missing)?;
            let k = b.sub_rounds.len() as u64;
            if head.rounds.is_some_and(|r| r != k) {
                return Err(invalid(
                    "scenario.rounds",
                    format!("must equal the number of lightning.sub_rounds ({k})"),
                ));
            }
            (lightning(b)?, k)
        }
        "circles" => {
            let b = raw.circles.ok_or_else(missing)?;
            let m = b.m.unwrap_or(DEFAULT_ATTACHMENT);
            if m == 0 {
                return Err(invalid("circles.m", "must be at least 1"));
            }
            let graph = TrustGraph::from_edges(&[] as &[String], &b.seed_graph)
                .map_err(|e| invalid("circles.seed_graph", e.to_string()))?;
            if graph.n() == 0 {
                return Err(invalid("circles.seed_graph", "needs at least one edge"));
            }
            if !graph.is_connected() {
                return Err(invalid("circles.seed_graph", "graph is not connected"));
            }
            (Scenario::Circles { graph, m }, require_rounds()?)
        }
        _ => {
            let b = raw.custom.ok_or_else(missing)?;
            (Scenario::Custom(custom(b, base_dir)?), require_rounds()?)
        }
    };
    Ok(ScenarioConfig { rounds, seed, scenario })
}

fn pagerank(b: RawPageRank) -> Result<PageRankSpec, ConfigError> {
    let damping = b.damping.unwrap_or(DEFAULT_DAMPING);
    if !(0.0..=1.0).contains(&damping) {
        return Err(invalid("pagerank.damping", format!("{damping} is outside [0, 1]")));
    }
    if let Some((a, _)) = b.links.iter().find(|(a, c)| a == c) {
        return Err(invalid("pagerank.links", format!("page `{a}` links to itself")));
    }
    let pages = b.pages.unwrap_or_default();
    let mut spec = PageRankSpec::from_edges(&pages, &b.links, damping);
    if spec.pages.is_empty() {
        return Err(invalid("pagerank.links", "no pages"));
    }
    spec.dangling_fallback = b.dangling_fallback;
    Ok(spec)
}

fn check_balances(key: &str, balances: &BTreeMap<String, f64>) -> Result<(), ConfigError> {
    match balances.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        Some((p, v)) => Err(invalid(key, format!("balance of `{p}` is {v}"))),
        None => Ok(()),
    }
}

fn lightning(b: RawLightning) -> Result<Scenario, ConfigError> {
    check_balances("lightning.main", &b.main)?;
    let main = LayerState::new("main", b.main.clone()).map_err(|e| invalid("lightning.main", e.to_string()))?;
    for (player, amount) in &b.commitments {
        let held = b
            .main
            .get(player)
            .ok_or_else(|| invalid("lightning.commitments", format!("`{player}` is not in lightning.main")))?;
        if !(amount.is_finite() && *amount > 0.0) {
            return Err(invalid("lightning.commitments", format!("`{player}` commits {amount}")));
        }
        if amount > held {
            return Err(invalid(
                "lightning.commitments",
                format!("`{player}` commits {amount} but holds {held}"),
            ));
        }
    }
    let sub_rounds = b
        .sub_rounds
        .into_iter()
        .enumerate()
        .map(|(round, transfers)| {
            transfers
                .into_iter()
                .map(|t| {
                    if !b.commitments.contains_key(&t.from) || !b.commitments.contains_key(&t.to) {
                        return Err(invalid(
                            "lightning.sub_rounds",
                            format!(
                                "round {round}: `{}` -> `{}` involves a player outside the channel",
                                t.from, t.to
                            ),
                        ));
                    }
                    if !(t.amount.is_finite() && t.amount >= 0.0) {
                        return Err(invalid(
                            "lightning.sub_rounds",
                            format!("round {round}: amount {}", t.amount),
                        ));
                    }
                    Ok(TransactionRecord {
                        round: round as u64,
                        sender: t.from,
                        receiver: t.to,
                        amount: t.amount,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(SubRound::Transfers)
        })
        .collect::<Result<_, _>>()?;
    Ok(Scenario::Lightning {
        main,
        plan: LightningPlan {
            commitments: b.commitments,
            sub_rounds,
        },
    })
}

fn need<T>(key: &str, v: Option<T>, field: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| invalid(&format!("{key}.{field}"), "required for this mechanism"))
}

fn custom(b: RawCustom, base_dir: &Path) -> Result<CustomSpec, ConfigError> {
    if b.layers.is_empty() {
        return Err(invalid("custom.layers", "at least one layer is required"));
    }
    let mut layers = Vec::with_capacity(b.layers.len());
    for layer in b.layers {
        let key = format!("custom.layers.{}", layer.id);
        if layers.iter().any(|(s, _): &(LayerState, _)| s.layer() == layer.id) {
            return Err(invalid("custom.layers", format!("duplicate layer id `{}`", layer.id)));
        }
        check_balances(&format!("{key}.balances"), &layer.balances)?;
        let state = LayerState::new(layer.id.clone(), layer.balances).map_err(|e| invalid(&key, e.to_string()))?;
        let log = match (layer.transactions, layer.transfers) {
            (Some(_), Some(_)) => {
                return Err(invalid(&key, "give either `transactions` or `transfers`, not both"));
            }
            (Some(rel), None) => {
                let path = base_dir.join(rel);
                let file = fs::File::open(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                read_transactions(file).map_err(|e| invalid(&format!("{key}.transactions"), e.to_string()))?
            }
            (None, transfers) => TransactionLog::new(
                transfers
                    .unwrap_or_default()
                    .into_iter()
                    .map(|t| TransactionRecord {
                        round: t.round,
                        sender: t.from,
                        receiver: t.to,
                        amount: t.amount,
                    })
                    .collect(),
            )
            .map_err(|e| invalid(&format!("{key}.transfers"), e.to_string()))?,
        };
        layers.push((state, log));
    }
    let ids: Vec<&str> = layers.iter().map(|(s, _)| s.layer()).collect();
    let mut sessions = Vec::with_capacity(b.bargaining.len());
    for (i, s) in b.bargaining.into_iter().enumerate() {
        let key = format!("custom.bargaining[{i}]");
        for l in std::iter::once(&s.layer_a).chain(&s.layer_b) {
            if !ids.contains(&l.as_str()) {
                return Err(invalid(&key, format!("unknown layer `{l}`")));
            }
        }
        if s.mechanism != "auction" && s.layer_b.is_none() {
            return Err(invalid(&format!("{key}.layer_b"), "required for this mechanism"));
        }
        let mechanism = match s.mechanism.as_str() {
            "random_ratio" => {
                let alpha = need(&key, s.alpha, "alpha")?;
                if alpha.fract() != 0.0 || alpha < 1.0 || alpha > f64::from(u32::MAX) {
                    return Err(invalid(&format!("{key}.alpha"), "must be a positive integer"));
                }
                Mechanism::RandomRatio {
                    kappa: need(&key, s.kappa, "kappa")?,
                    alpha: alpha as u32,
                    group_a: need(&key, s.group_a, "group_a")?,
                    group_b: need(&key, s.group_b, "group_b")?,
                }
            }
            "blind_vote" => Mechanism::BlindVote {
                alpha: need(&key, s.alpha, "alpha")?,
                beta: need(&key, s.beta, "beta")?,
                group_a: need(&key, s.group_a, "group_a")?,
                group_b: need(&key, s.group_b, "group_b")?,
            },
            "auction" if s.layer_b.is_some() => {
                return Err(invalid(
                    &format!("{key}.layer_b"),
                    "auctions take their counterpart from the winning bid",
                ));
            }
            "auction" => Mechanism::Auction {
                quantity: need(&key, s.quantity, "quantity")?,
                minimum_bids: s.minimum_bids.unwrap_or_default(),
                bids: need(&key, s.bids, "bids")?
                    .into_iter()
                    .map(|b| crate::bargaining::Bid {
                        layer: b.layer,
                        bidder: b.bidder,
                        amount: b.amount,
                    })
                    .collect(),
            },
            other => {
                return Err(invalid(
                    &format!("{key}.mechanism"),
                    format!("`{other}` is not one of random_ratio, blind_vote, auction"),
                ))
            }
        };
        sessions.push(BargainingSession {
            round: s.round.unwrap_or(0),
            layer_a: s.layer_a,
            layer_b: s.layer_b,
            mechanism,
        });
    }
    Ok(CustomSpec {
        layers,
        bargaining: sessions,
    })
}
