//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal or output failure, 2 bad config or
//! input, 3 adverse verdict (arbitrage cycle or a costly verification cycle).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tegsim::analyze::{analyze, Analysis, AnalyzeOptions};
use tegsim::multilayer::DEFAULT_TOL;
use tegsim::runner::{batch_command, parse_seed_range, run_command};

#[derive(Parser)]
#[command(name = "tegsim", version, about = "Token exchange game simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Analyse a matrix, rate or snapshot file.
    Analyze {
        #[arg(value_enum)]
        analysis: AnalysisArg,
        #[arg(long)]
        input: PathBuf,
        /// Arbitrage-prevention costs (`layer_a,layer_b,rate` in bits).
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Contract costs (`layer_a,layer_b,rate` in bits).
        #[arg(long)]
        kappa: Option<PathBuf>,
        /// Relative tolerance on arbitrage gains.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Comma-separated slots for a partial circulation measure.
        #[arg(long, value_delimiter = ',')]
        active: Option<Vec<usize>>,
        /// Also write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one config over a range of seeds (`A..B` or `A..=B`).
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisArg {
    Zeta,
    Arbitrage,
    #[value(alias = "theorem-b")]
    Forest,
    Entropy,
}

impl From<AnalysisArg> for Analysis {
    fn from(a: AnalysisArg) -> Self {
        match a {
            AnalysisArg::Zeta => Analysis::Zeta,
            AnalysisArg::Arbitrage => Analysis::Arbitrage,
            AnalysisArg::Forest => Analysis::Forest,
            AnalysisArg::Entropy => Analysis::Entropy,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEGSIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(dispatch(cli.command) as u8)
}

fn dispatch(command: Command) -> i32 {
    match command {
        Command::Run { config, seed, out } => match run_command(&config, seed, &out) {
            Ok(m) => {
                println!(
                    "{} rounds, seed {}, outputs in {}",
                    m.rounds,
                    m.seed,
                    m.out_dir.display()
                );
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Batch {
            config,
            seeds,
            out,
            jobs,
        } => {
            let Some(range) = parse_seed_range(&seeds) else {
                eprintln!("error: --seeds `{seeds}` is not a non-empty range like 0..10 or 0..=9");
                return 2;
            };
            match batch_command(&config, range, &out, jobs) {
                Ok(manifests) => {
                    println!("{} runs written under {}", manifests.len(), out.display());
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Analyze {
            analysis,
            input,
            mu,
            kappa,
            tol,
            active,
            out,
        } => {
            let opts = AnalyzeOptions {
                input,
                mu,
                kappa,
                tol,
                active,
            };
            match analyze(analysis.into(), &opts) {
                Ok(report) => {
                    print!("{}", report.text);
                    if let Some(path) = out {
                        if let Err(e) = fs::write(&path, &report.csv) {
                            eprintln!("error: cannot write `{}`: {e}", path.display());
                            return 1;
                        }
                    }
                    report.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
    }
}
