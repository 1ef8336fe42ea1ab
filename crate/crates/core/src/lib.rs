//! Token exchange games: ledgers of balances updated round by round by
//! column-stochastic transfer matrices, with optional minting and burning,
//! plus the metrics, multilayer fungibility analysis, bargaining mechanisms
//! and reference scenarios built on top of them.
//!
//! ```
//! use tegsim::engine::{step_closed, LayerState, TransferMatrix};
//! use tegsim::metrics::{entropy, normalize};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let state = LayerState::new("coin", [("ann", 6.0), ("ben", 4.0)])?;
//! // ann keeps 80% and sends 20% to ben; ben keeps everything.
//! let w = TransferMatrix::from_triplets(2, [(0, 0, 0.8), (1, 0, 0.2), (1, 1, 1.0)])?;
//! let next = step_closed(&state, &w)?;
//! assert!((next.supply() - 10.0).abs() < 1e-12);
//! assert!((next.balance("ben").unwrap() - 5.2).abs() < 1e-12);
//! println!("{:.3} bits", entropy(&normalize(next.balances())?));
//! # Ok(())
//! # }
//! ```

pub mod analyze;
pub mod bargaining;
pub mod config;
pub mod engine;
pub mod io;
pub mod ledger;
pub mod metrics;
pub mod multilayer;
pub mod runner;
pub mod scenarios;
