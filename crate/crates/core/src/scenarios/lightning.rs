//! Payment-channel orchestration: commit funds into a sub-layer, run a closed
//! game inside the channel, then settle the final balances back.

use std::collections::BTreeMap;

use crate::engine::{
    build_matrix_from_transactions, commit_sublayer, run, settle_sublayer, EngineError, GameRun, LayerState,
    RoundInput, TransactionRecord, TransferMatrix, CHANNEL_SLOT,
};

use super::ScenarioError;

/// One round inside the channel.
#[derive(Debug, Clone, PartialEq)]
pub enum SubRound {
    Matrix(TransferMatrix),
    /// Transfers between channel participants; turned into a matrix against
    /// the channel's balances at that round.
    Transfers(Vec<TransactionRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightningPlan {
    pub commitments: BTreeMap<String, f64>,
    pub sub_rounds: Vec<SubRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightningOutcome {
    /// Parent layer with the channel slot open.
    pub committed: LayerState,
    pub sub_run: GameRun,
    pub final_main: LayerState,
}

pub fn run_lightning_scenario(main: &LayerState, plan: &LightningPlan) -> Result<LightningOutcome, ScenarioError> {
    let (committed, sub_initial) = commit_sublayer(main, &plan.commitments, CHANNEL_SLOT)?;
    let mut provider = |round: u64, state: &LayerState| -> Result<RoundInput, EngineError> {
        let matrix = match &plan.sub_rounds[round as usize] {
            SubRound::Matrix(m) => m.clone(),
            SubRound::Transfers(records) => build_matrix_from_transactions(records, state)?,
        };
        Ok(RoundInput::closed(matrix))
    };
    let sub_run = run(sub_initial, &mut provider, plan.sub_rounds.len() as u64)?;
    let final_main = settle_sublayer(&committed, sub_run.last(), CHANNEL_SLOT)?;
    Ok(LightningOutcome {
        committed,
        sub_run,
        final_main,
    })
}
