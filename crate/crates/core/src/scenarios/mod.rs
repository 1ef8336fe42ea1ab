//! Reference constructions: PageRank as an open game, a two-player UBI
//! treasury, payment-channel sub-layers and a Circles-style personal-coin
//! economy on a preferential-attachment trust graph.

use thiserror::Error;

use crate::engine::EngineError;
use crate::multilayer::MultilayerError;

pub mod circles;
pub mod lightning;
pub mod pagerank;
pub mod ubi;

pub use circles::{
    attachment_probabilities, attachment_probability, circles_round, circles_round_with, degree_distribution,
    ownership_bipartite, power_law_tail_slope, sample_attachment, CirclesAction, CirclesState, NoTrades,
    OwnershipGraph, ScriptedActions, SwapPolicy, TrustGraph,
};
pub use lightning::{run_lightning_scenario, LightningOutcome, LightningPlan, SubRound};
pub use pagerank::{build_pagerank_game, PageRankGame, PageRankSpec};
pub use ubi::{ubi_closed_form, ubi_initial_state, ubi_matrix, ubi_provider, UbiSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Multilayer(#[from] MultilayerError),
    #[error("page `{0}` has no outgoing links")]
    DanglingPage(String),
    #[error("page `{0}` links to itself")]
    SelfLink(String),
    #[error("link matrix is {rows}x{cols} for {pages} pages")]
    LinkShape { rows: usize, cols: usize, pages: usize },
    #[error("damping must lie in [0, 1], got {0}")]
    InvalidDamping(f64),
    #[error("invalid UBI parameters: {0}")]
    InvalidUbi(String),
    #[error("round {round}: treasury holds {available}, cannot issue {needed}")]
    TreasuryDepleted { round: u64, needed: f64, available: f64 },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("vertex {0} not in graph")]
    UnknownVertex(usize),
    #[error("seed trust graph is not connected")]
    Disconnected,
    #[error("seed trust graph has no players")]
    NoPlayers,
    #[error("trust edge `{0}` - `{0}` is a self-loop")]
    SelfTrust(String),
    #[error("unknown coin `{0}`")]
    UnknownCoin(String),
}
