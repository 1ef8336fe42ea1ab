//! Offline analyses over matrix, rate and snapshot files.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::io::{format_number, read_costs, read_fungibility, read_matrix, read_snapshots, IoError};
use crate::metrics::{entropy, normalize, zeta, MetricsError};
use crate::multilayer::{check_forest_condition, find_arbitrage, fungibility_graph, ForestVerdict, MultilayerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Zeta,
    Arbitrage,
    Forest,
    Entropy,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub input: PathBuf,
    /// Arbitrage-prevention cost file (forest).
    pub mu: Option<PathBuf>,
    /// Contract cost file (forest, arbitrage).
    pub kappa: Option<PathBuf>,
    /// Relative tolerance on the gain of an arbitrage cycle.
    pub tol: f64,
    /// Slots over which circulation is averaged (zeta).
    pub active: Option<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("cannot read `{path}`: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("`{path}`: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: IoError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Multilayer(#[from] MultilayerError),
}

/// Human-readable lines plus the same result as CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzeReport {
    pub text: String,
    pub csv: String,
    /// An arbitrage cycle or a cycle with positive verification cost was found.
    pub adverse: bool,
}

impl AnalyzeReport {
    pub fn exit_code(&self) -> i32 {
        if self.adverse {
            3
        } else {
            0
        }
    }
}

fn open(path: &Path) -> Result<File, AnalyzeError> {
    File::open(path).map_err(|source| AnalyzeError::Open {
        path: path.to_owned(),
        source,
    })
}

fn input<T>(path: &Path, f: impl FnOnce(File) -> Result<T, IoError>) -> Result<T, AnalyzeError> {
    f(open(path)?).map_err(|source| AnalyzeError::Input {
        path: path.to_owned(),
        source,
    })
}

pub fn analyze(which: Analysis, opts: &AnalyzeOptions) -> Result<AnalyzeReport, AnalyzeError> {
    match which {
        Analysis::Zeta => {
            let w = input(&opts.input, |f| read_matrix(f, None))?;
            let r = zeta(&w, opts.active.as_deref())?;
            Ok(AnalyzeReport {
                text: format!(
                    "zeta {}\nzeta_star {}\nactive {}\n",
                    format_number(r.zeta),
                    format_number(r.zeta_star),
                    r.active_count
                ),
                csv: format!(
                    "zeta,zeta_star,active\n{},{},{}\n",
                    format_number(r.zeta),
                    format_number(r.zeta_star),
                    r.active_count
                ),
                adverse: false,
            })
        }
        Analysis::Arbitrage => {
            let rates = input(&opts.input, read_fungibility)?;
            let kappa = opts
                .kappa
                .as_deref()
                .map(|p| input(p, |f| read_costs(f, rates.layers())))
                .transpose()?;
            let h = fungibility_graph(&rates, kappa.as_deref(), None)?;
            let mut csv = String::from("cycle,gain\n");
            Ok(match find_arbitrage(&h, opts.tol) {
                Some(c) => {
                    let path = c.labels(rates.layers()).join(" -> ");
                    let _ = writeln!(csv, "{},{}", path, format_number(c.gain));
                    AnalyzeReport {
                        text: format!("arbitrage cycle {path} gain {}\n", format_number(c.gain)),
                        csv,
                        adverse: true,
                    }
                }
                None => AnalyzeReport {
                    text: "no arbitrage\n".into(),
                    csv,
                    adverse: false,
                },
            })
        }
        Analysis::Forest => {
            let rates = input(&opts.input, read_fungibility)?;
            let costs = |p: &Option<PathBuf>| {
                p.as_deref()
                    .map(|p| input(p, |f| read_costs(f, rates.layers())))
                    .transpose()
            };
            let (kappa, mu) = (costs(&opts.kappa)?, costs(&opts.mu)?);
            let h = fungibility_graph(&rates, kappa.as_deref(), mu.as_deref())?;
            let verdict = check_forest_condition(&h)?;
            let (name, cycle, adverse) = match &verdict {
                ForestVerdict::Acyclic => ("Acyclic", String::new(), false),
                ForestVerdict::ZeroMu => ("ZeroMu", String::new(), false),
                ForestVerdict::Counterexample { cycle } => {
                    let labels: Vec<&str> = cycle
                        .iter()
                        .chain(cycle.first())
                        .map(|&i| rates.layers()[i].as_str())
                        .collect();
                    ("Counterexample", labels.join(" -> "), true)
                }
            };
            let text = if cycle.is_empty() {
                format!("verdict {name}\n")
            } else {
                format!("verdict {name} cycle {cycle}\n")
            };
            Ok(AnalyzeReport {
                text,
                csv: format!("verdict,cycle\n{name},{cycle}\n"),
                adverse,
            })
        }
        Analysis::Entropy => {
            let states = input(&opts.input, read_snapshots)?;
            let mut text = String::new();
            let mut csv = String::from("round,layer,entropy_bits,max_bits\n");
            for s in &states {
                let max = format_number((s.len() as f64).log2());
                let h = normalize(s.balances()).ok().map(|p| format_number(entropy(&p)));
                let shown = h.as_deref().unwrap_or("");
                let _ = writeln!(
                    text,
                    "round {} layer {} entropy {} max {}",
                    s.round(),
                    s.layer(),
                    h.as_deref().unwrap_or("undefined"),
                    max
                );
                let _ = writeln!(csv, "{},{},{},{}", s.round(), s.layer(), shown, max);
            }
            Ok(AnalyzeReport {
                text,
                csv,
                adverse: false,
            })
        }
    }
}
