//! Closed and open token exchange games.
//!
//! A layer's balances are a vector `x` indexed by player slot. One round of a
//! closed game computes `x' = W x` for a column-stochastic [`TransferMatrix`]
//! `W`; an open game adds a [`MintBurnVector`] `y`, giving `x' = W x + y`.
//!
//! Orientation: `W` is stored as `(receiver row, sender column)`. Column `j`
//! lists the fractions of player `j`'s balance sent to each receiver, with the
//! self-loop `w_jj` being the retained fraction. This is the transpose of a
//! sender-first `w_ij` edge indexing, and is the orientation in which the
//! left multiplication `W x` conserves supply.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ledger::{Ledger, LedgerSequence};

/// Tolerance for column sums and supply conservation checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Largest column-sum drift that [`TransferMatrix::renormalize`] will repair.
pub const RENORMALIZE_MAX_DRIFT: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid transfer matrix: {0}")]
    InvalidMatrix(MatrixViolation),
    #[error("mint/burn delta {delta} at slot {slot} is below the bound {bound}")]
    NegativeBalanceRisk { slot: usize, delta: f64, bound: f64 },
    #[error("player `{player}` holds {balance}, cannot commit {requested}")]
    InsufficientBalance {
        player: String,
        balance: f64,
        requested: f64,
    },
    #[error("a channel needs at least one commitment")]
    EmptyChannel,
    #[error("commitment of `{player}` is {amount}, must be positive")]
    NonPositiveCommitment { player: String, amount: f64 },
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("duplicate player `{0}`")]
    DuplicatePlayer(String),
    #[error("balance of `{player}` is {balance}, must be finite and non-negative")]
    InvalidBalance { player: String, balance: f64 },
    #[error("channel slot `{0}` not found in parent layer")]
    MissingChannel(String),
    #[error("sub-layer supply {found} does not match channel balance {expected}")]
    SupplyMismatch { expected: f64, found: f64 },
    #[error("`{sender}` sends {outgoing} but holds {balance}")]
    Overspend {
        sender: String,
        balance: f64,
        outgoing: f64,
    },
    #[error("invalid transaction amount {0}")]
    InvalidAmount(f64),
    #[error("matrix entry ({row}, {col}) outside dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("duplicate matrix entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("round provider failed: {0}")]
    Provider(String),
    #[error("round {round}: {source}")]
    AtRound {
        round: u64,
        #[source]
        source: Box<EngineError>,
    },
}

/// First reason a matrix fails to be column-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixViolation {
    /// A stored entry is zero; absent edges must not be stored.
    ZeroEntry { row: usize, col: usize },
    /// A stored entry is outside `(0, 1]` or not finite.
    EntryOutOfRange { row: usize, col: usize, weight: f64 },
    /// A column does not sum to one.
    ColumnSum { col: usize, sum: f64 },
}

impl fmt::Display for MatrixViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroEntry { row, col } => write!(f, "explicit zero at ({row}, {col})"),
            Self::EntryOutOfRange { row, col, weight } => {
                write!(f, "entry ({row}, {col}) = {weight} outside (0, 1]")
            }
            Self::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}"),
        }
    }
}

/// Sparse square matrix stored by column. Column `j` holds `(row, weight)`
/// pairs sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    n: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl TransferMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            columns: (0..n).map(|j| vec![(j, 1.0)]).collect(),
        }
    }

    /// Builds a matrix from `(row, col, weight)` triplets. Only indices and
    /// duplicates are checked here; stochasticity is checked by
    /// [`validate_transfer_matrix`].
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut columns = vec![Vec::new(); n];
        for (row, col, weight) in triplets {
            if row >= n || col >= n {
                return Err(EngineError::IndexOutOfRange { row, col, n });
            }
            columns[col].push((row, weight));
        }
        for (col, column) in columns.iter_mut().enumerate() {
            column.sort_by_key(|&(row, _)| row);
            if let Some(w) = column.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(EngineError::DuplicateEntry { row: w[0].0, col });
            }
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, i.e. the edge count of the underlying graph.
    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns
            .get(col)
            .and_then(|c| c.binary_search_by_key(&row, |&(r, _)| r).ok().map(|i| c[i].1))
            .unwrap_or(0.0)
    }

    /// Self-loop weight `w_ii`, zero when absent.
    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn column(&self, col: usize) -> &[(usize, f64)] {
        &self.columns[col]
    }

    /// Iterates stored entries as `(row, col, weight)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(col, c)| c.iter().map(move |&(row, w)| (row, col, w)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, column) in self.columns.iter().enumerate() {
            let xj = x[col];
            if xj == 0.0 {
                continue;
            }
            for &(row, w) in column {
                out[row] += w * xj;
            }
        }
        out
    }

    /// Rescales every column to sum to one when its drift is at most
    /// [`RENORMALIZE_MAX_DRIFT`]; larger drift is reported, not repaired.
    pub fn renormalize(&mut self) -> Result<(), MatrixViolation> {
        for (col, column) in self.columns.iter_mut().enumerate() {
            let sum: f64 = column.iter().map(|&(_, w)| w).sum();
            if (sum - 1.0).abs() > RENORMALIZE_MAX_DRIFT {
                return Err(MatrixViolation::ColumnSum { col, sum });
            }
            for (_, w) in column.iter_mut() {
                *w /= sum;
            }
        }
        Ok(())
    }
}

/// Checks that every stored entry lies in `(0, 1]` and every column sums to
/// one within [`STOCHASTIC_TOL`]. Returns the first violation in column order.
pub fn validate_transfer_matrix(w: &TransferMatrix) -> Result<(), MatrixViolation> {
    for (col, column) in w.columns.iter().enumerate() {
        let mut sum = 0.0;
        for &(row, weight) in column {
            if weight == 0.0 {
                return Err(MatrixViolation::ZeroEntry { row, col });
            }
            if !(weight.is_finite() && weight > 0.0 && weight <= 1.0 + STOCHASTIC_TOL) {
                return Err(MatrixViolation::EntryOutOfRange { row, col, weight });
            }
            sum += weight;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MatrixViolation::ColumnSum { col, sum });
        }
    }
    Ok(())
}

/// Per-slot external deltas for an open game round.
#[derive(Debug, Clone, PartialEq)]
pub struct MintBurnVector {
    pub deltas: Vec<f64>,
}

impl MintBurnVector {
    pub fn new(deltas: Vec<f64>) -> Self {
        Self { deltas }
    }

    pub fn zeros(n: usize) -> Self {
        Self { deltas: vec![0.0; n] }
    }

    pub fn total(&self) -> f64 {
        self.deltas.iter().sum()
    }

    /// Checks `deltas[i] >= -balances[i] * w_ii` for every slot.
    pub fn check_bound(&self, balances: &[f64], w: &TransferMatrix) -> Result<(), EngineError> {
        if self.deltas.len() != balances.len() {
            return Err(EngineError::DimensionMismatch {
                expected: balances.len(),
                found: self.deltas.len(),
            });
        }
        for (slot, (&delta, &x)) in self.deltas.iter().zip(balances).enumerate() {
            let bound = -x * w.diagonal(slot);
            if !delta.is_finite() || delta < bound {
                return Err(EngineError::NegativeBalanceRisk { slot, delta, bound });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Roster {
    players: Vec<String>,
    index: HashMap<String, usize>,
}

/// One layer's ledger in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    layer: String,
    round: u64,
    // Shared between successive rounds until a player joins or leaves.
    roster: Arc<Roster>,
    balances: Vec<f64>,
}

impl LayerState {
    pub fn new<I, S>(layer: impl Into<String>, entries: I) -> Result<Self, EngineError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut state = Self {
            layer: layer.into(),
            round: 0,
            roster: Arc::default(),
            balances: Vec::new(),
        };
        for (player, balance) in entries {
            state.push_player(player.into(), balance)?;
        }
        Ok(state)
    }

    /// Builds a layer whose players are named by slot number (`"0"`, `"1"`, ...).
    pub fn from_balances(layer: impl Into<String>, balances: &[f64]) -> Result<Self, EngineError> {
        Self::new(layer, balances.iter().enumerate().map(|(i, &b)| (i.to_string(), b)))
    }

    pub fn from_ledger(layer: impl Into<String>, round: u64, ledger: &Ledger) -> Result<Self, EngineError> {
        let mut state = Self::new(layer, ledger.iter())?;
        state.round = round;
        Ok(state)
    }

    pub fn with_round(mut self, round: u64) -> Self {
        self.round = round;
        self
    }

    pub fn layer(&self) -> &str {
        &self.layer
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn len(&self) -> usize {
        self.balances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }

    pub fn balances(&self) -> &[f64] {
        &self.balances
    }

    pub fn players(&self) -> &[String] {
        &self.roster.players
    }

    pub fn slot(&self, player: &str) -> Option<usize> {
        self.roster.index.get(player).copied()
    }

    pub fn balance(&self, player: &str) -> Option<f64> {
        self.slot(player).map(|i| self.balances[i])
    }

    /// Appends a new player with zero balance and returns its slot. An
    /// existing player keeps its slot.
    pub fn add_player(&mut self, player: impl Into<String>) -> usize {
        let player = player.into();
        if let Some(slot) = self.slot(&player) {
            return slot;
        }
        let roster = Arc::make_mut(&mut self.roster);
        roster.players.push(player.clone());
        roster.index.insert(player, roster.players.len() - 1);
        self.balances.push(0.0);
        self.balances.len() - 1
    }

    pub fn set_balance(&mut self, player: &str, balance: f64) -> Result<(), EngineError> {
        check_balance(player, balance)?;
        let slot = self
            .slot(player)
            .ok_or_else(|| EngineError::UnknownPlayer(player.to_owned()))?;
        self.balances[slot] = balance;
        Ok(())
    }

    pub fn supply(&self) -> f64 {
        token_supply(self)
    }

    pub fn to_ledger(&self) -> Ledger {
        Ledger::new(self.roster.players.iter().cloned().zip(self.balances.iter().copied()))
            .expect("layer state invariants imply a valid ledger")
    }

    fn push_player(&mut self, player: String, balance: f64) -> Result<(), EngineError> {
        check_balance(&player, balance)?;
        if self.roster.index.contains_key(&player) {
            return Err(EngineError::DuplicatePlayer(player));
        }
        let roster = Arc::make_mut(&mut self.roster);
        roster.index.insert(player.clone(), roster.players.len());
        roster.players.push(player);
        self.balances.push(balance);
        Ok(())
    }

    fn remove_slot(&mut self, slot: usize) -> f64 {
        let balance = self.balances.remove(slot);
        let roster = Arc::make_mut(&mut self.roster);
        roster.players.remove(slot);
        roster.index = roster.players.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        balance
    }

    fn successor(&self, balances: Vec<f64>) -> Self {
        Self {
            layer: self.layer.clone(),
            round: self.round + 1,
            roster: Arc::clone(&self.roster),
            balances,
        }
    }
}

fn check_balance(player: &str, balance: f64) -> Result<(), EngineError> {
    if balance.is_finite() && balance >= 0.0 {
        Ok(())
    } else {
        Err(EngineError::InvalidBalance {
            player: player.to_owned(),
            balance,
        })
    }
}

/// Sum of all balances in the layer.
pub fn token_supply(state: &LayerState) -> f64 {
    state.balances.iter().sum()
}

fn check_step(state: &LayerState, w: &TransferMatrix) -> Result<(), EngineError> {
    if w.n() != state.len() {
        return Err(EngineError::DimensionMismatch {
            expected: state.len(),
            found: w.n(),
        });
    }
    validate_transfer_matrix(w).map_err(EngineError::InvalidMatrix)
}

/// One closed round: `x' = W x`.
pub fn step_closed(state: &LayerState, w: &TransferMatrix) -> Result<LayerState, EngineError> {
    check_step(state, w)?;
    Ok(state.successor(w.mul_vec(&state.balances)))
}

/// One open round: `x' = W x + y`, where `y` must satisfy
/// `y_i >= -x_i * w_ii`.
pub fn step_open(state: &LayerState, w: &TransferMatrix, y: &MintBurnVector) -> Result<LayerState, EngineError> {
    check_step(state, w)?;
    y.check_bound(&state.balances, w)?;
    let mut next = w.mul_vec(&state.balances);
    for (x, d) in next.iter_mut().zip(&y.deltas) {
        // The bound guarantees a non-negative result up to rounding.
        *x = (*x + d).max(0.0);
    }
    Ok(state.successor(next))
}

/// What a provider supplies for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundInput {
    pub matrix: TransferMatrix,
    pub delta: Option<MintBurnVector>,
    /// Players joining with zero balance before this round is applied. The
    /// matrix must already have the enlarged dimension.
    pub joining: Vec<String>,
}

impl RoundInput {
    pub fn closed(matrix: TransferMatrix) -> Self {
        Self {
            matrix,
            delta: None,
            joining: Vec::new(),
        }
    }

    pub fn open(matrix: TransferMatrix, delta: MintBurnVector) -> Self {
        Self {
            matrix,
            delta: Some(delta),
            joining: Vec::new(),
        }
    }
}

/// Per-round source of transfer matrices and optional mint/burn vectors.
pub trait RoundProvider {
    fn next_round(&mut self, round: u64, state: &LayerState) -> Result<RoundInput, EngineError>;
}

impl<F> RoundProvider for F
where
    F: FnMut(u64, &LayerState) -> Result<RoundInput, EngineError>,
{
    fn next_round(&mut self, round: u64, state: &LayerState) -> Result<RoundInput, EngineError> {
        self(round, state)
    }
}

/// States of a single layer across rounds, with the inputs that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRun {
    pub states: Vec<LayerState>,
    pub inputs: Vec<RoundInput>,
}

impl GameRun {
    pub fn initial(&self) -> &LayerState {
        &self.states[0]
    }

    pub fn last(&self) -> &LayerState {
        self.states.last().expect("a run holds at least its initial state")
    }

    pub fn ledger_sequence(&self) -> LedgerSequence {
        let mut seq = LedgerSequence::new();
        for (i, state) in self.states.iter().enumerate() {
            seq.push(i as u64, state.to_ledger())
                .expect("round indices are consecutive");
        }
        seq
    }
}

/// Iterates `rounds` rounds from `initial`, using [`step_open`] when the
/// provider returns a delta and [`step_closed`] otherwise.
pub fn run<P: RoundProvider>(initial: LayerState, provider: &mut P, rounds: u64) -> Result<GameRun, EngineError> {
    let mut states = Vec::with_capacity(rounds as usize + 1);
    let mut inputs = Vec::with_capacity(rounds as usize);
    let mut current = initial;
    for round in 0..rounds {
        let at = |e: EngineError| EngineError::AtRound {
            round,
            source: Box::new(e),
        };
        let input = provider.next_round(round, &current).map_err(at)?;
        let mut before = current.clone();
        for player in &input.joining {
            before.add_player(player.clone());
        }
        let next = match &input.delta {
            Some(y) => step_open(&before, &input.matrix, y),
            None => step_closed(&before, &input.matrix),
        }
        .map_err(at)?;
        states.push(std::mem::replace(&mut current, next));
        inputs.push(input);
    }
    states.push(current);
    Ok(GameRun { states, inputs })
}

/// Default label of the parent-layer slot that holds a channel's funds.
pub const CHANNEL_SLOT: &str = "chan";

/// Moves each commitment from the parent layer into a new channel slot and
/// returns the parent together with the sub-layer's initial state.
pub fn commit_sublayer(
    parent: &LayerState,
    commitments: &BTreeMap<String, f64>,
    channel: &str,
) -> Result<(LayerState, LayerState), EngineError> {
    if commitments.is_empty() {
        return Err(EngineError::EmptyChannel);
    }
    if parent.slot(channel).is_some() {
        return Err(EngineError::DuplicatePlayer(channel.to_owned()));
    }
    let mut next = parent.clone();
    let mut total = 0.0;
    for (player, &amount) in commitments {
        if !(amount.is_finite() && amount > 0.0) {
            return Err(EngineError::NonPositiveCommitment {
                player: player.clone(),
                amount,
            });
        }
        let slot = parent
            .slot(player)
            .ok_or_else(|| EngineError::UnknownPlayer(player.clone()))?;
        let balance = parent.balances[slot];
        if balance < amount {
            return Err(EngineError::InsufficientBalance {
                player: player.clone(),
                balance,
                requested: amount,
            });
        }
        next.balances[slot] = balance - amount;
        total += amount;
    }
    next.push_player(channel.to_owned(), total)?;
    let sub = LayerState::new(
        format!("{}/{}", parent.layer, channel),
        commitments.iter().map(|(p, &a)| (p.clone(), a)),
    )?;
    Ok((next, sub))
}

/// Closes a channel: removes its slot and credits each participant with
/// their final sub-layer balance.
pub fn settle_sublayer(parent: &LayerState, sub_final: &LayerState, channel: &str) -> Result<LayerState, EngineError> {
    let chan_slot = parent
        .slot(channel)
        .ok_or_else(|| EngineError::MissingChannel(channel.to_owned()))?;
    let locked = parent.balances[chan_slot];
    let found = sub_final.supply();
    if (found - locked).abs() > STOCHASTIC_TOL * locked.max(1.0) {
        return Err(EngineError::SupplyMismatch {
            expected: locked,
            found,
        });
    }
    for player in sub_final.players() {
        if player == channel || parent.slot(player).is_none() {
            return Err(EngineError::UnknownPlayer(player.clone()));
        }
    }
    let mut next = parent.clone();
    next.remove_slot(chan_slot);
    for (player, &amount) in sub_final.players().iter().zip(sub_final.balances()) {
        let slot = next.slot(player).expect("checked above");
        next.balances[slot] += amount;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub round: u64,
    pub sender: String,
    pub receiver: String,
    pub amount: f64,
}

/// Offline transfer history, one record per transfer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransactionLog {
    pub records: Vec<TransactionRecord>,
}

impl TransactionLog {
    pub fn new(records: Vec<TransactionRecord>) -> Result<Self, EngineError> {
        if let Some(r) = records.iter().find(|r| !(r.amount.is_finite() && r.amount >= 0.0)) {
            return Err(EngineError::InvalidAmount(r.amount));
        }
        Ok(Self { records })
    }

    pub fn for_round(&self, round: u64) -> impl Iterator<Item = &TransactionRecord> {
        self.records.iter().filter(move |r| r.round == round)
    }

    pub fn last_round(&self) -> Option<u64> {
        self.records.iter().map(|r| r.round).max()
    }
}

/// Builds the transfer matrix that reproduces one round of transactions:
/// column `j` sends `amount / balance_j` to each receiver and keeps the rest
/// as a self-loop. Senders with zero balance keep a self-loop of one.
pub fn build_matrix_from_transactions<'a, I>(records: I, holdings: &LayerState) -> Result<TransferMatrix, EngineError>
where
    I: IntoIterator<Item = &'a TransactionRecord>,
{
    let n = holdings.len();
    let mut outgoing: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for r in records {
        if !(r.amount.is_finite() && r.amount >= 0.0) {
            return Err(EngineError::InvalidAmount(r.amount));
        }
        let s = holdings
            .slot(&r.sender)
            .ok_or_else(|| EngineError::UnknownPlayer(r.sender.clone()))?;
        let t = holdings
            .slot(&r.receiver)
            .ok_or_else(|| EngineError::UnknownPlayer(r.receiver.clone()))?;
        if r.amount > 0.0 && s != t {
            *outgoing[s].entry(t).or_insert(0.0) += r.amount;
        }
    }
    let mut triplets = Vec::new();
    for (col, sends) in outgoing.iter().enumerate() {
        let balance = holdings.balances[col];
        let total: f64 = sends.values().sum();
        if total > balance * (1.0 + STOCHASTIC_TOL) {
            return Err(EngineError::Overspend {
                sender: holdings.roster.players[col].clone(),
                balance,
                outgoing: total,
            });
        }
        if total == 0.0 {
            triplets.push((col, col, 1.0));
            continue;
        }
        let mut sent = 0.0;
        for (&row, &amount) in sends {
            let w = (amount / balance).min(1.0);
            sent += w;
            triplets.push((row, col, w));
        }
        let retained = 1.0 - sent;
        if retained > STOCHASTIC_TOL {
            triplets.push((col, col, retained));
        }
    }
    TransferMatrix::from_triplets(n, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(balances: &[f64]) -> LayerState {
        LayerState::from_balances("L", balances).unwrap()
    }

    fn m(n: usize, t: &[(usize, usize, f64)]) -> TransferMatrix {
        TransferMatrix::from_triplets(n, t.iter().copied()).unwrap()
    }

    #[test]
    fn validate_matrix_examples() {
        assert_eq!(validate_transfer_matrix(&TransferMatrix::identity(3)), Ok(()));
        let bad = m(2, &[(0, 0, 0.5), (1, 0, 0.6), (1, 1, 1.0)]);
        match validate_transfer_matrix(&bad) {
            Err(MatrixViolation::ColumnSum { col: 0, sum }) => assert!((sum - 1.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        let zero = m(2, &[(0, 0, 1.0), (1, 0, 0.0), (1, 1, 1.0)]);
        assert_eq!(
            validate_transfer_matrix(&zero),
            Err(MatrixViolation::ZeroEntry { row: 1, col: 0 })
        );
        let empty_col = m(2, &[(0, 0, 1.0)]);
        assert!(matches!(
            validate_transfer_matrix(&empty_col),
            Err(MatrixViolation::ColumnSum { col: 1, .. })
        ));
    }

    #[test]
    fn from_triplets_rejects_duplicates_and_range() {
        assert!(matches!(
            TransferMatrix::from_triplets(2, [(0, 0, 0.5), (0, 0, 0.5)]),
            Err(EngineError::DuplicateEntry { row: 0, col: 0 })
        ));
        assert!(matches!(
            TransferMatrix::from_triplets(2, [(2, 0, 1.0)]),
            Err(EngineError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn step_closed_examples() {
        let w = m(2, &[(1, 0, 1.0), (1, 1, 1.0)]);
        let next = step_closed(&layer(&[10.0, 0.0]), &w).unwrap();
        assert_eq!(next.balances(), &[0.0, 10.0]);
        assert_eq!(next.round(), 1);

        let next = step_closed(&layer(&[8.0, 4.0]), &TransferMatrix::identity(2)).unwrap();
        assert_eq!(next.balances(), &[8.0, 4.0]);

        let w = m(2, &[(0, 0, 0.5), (1, 0, 0.5), (1, 1, 1.0)]);
        let next = step_closed(&layer(&[10.0, 10.0]), &w).unwrap();
        assert_eq!(next.balances(), &[5.0, 15.0]);
    }

    #[test]
    fn step_closed_errors() {
        assert!(matches!(
            step_closed(&layer(&[1.0]), &TransferMatrix::identity(2)),
            Err(EngineError::DimensionMismatch { expected: 1, found: 2 })
        ));
        let bad = m(1, &[(0, 0, 0.5)]);
        assert!(matches!(
            step_closed(&layer(&[1.0]), &bad),
            Err(EngineError::InvalidMatrix(_))
        ));
    }

    #[test]
    fn step_open_examples() {
        let i2 = TransferMatrix::identity(2);
        let next = step_open(&layer(&[5.0, 5.0]), &i2, &MintBurnVector::new(vec![-3.0, 2.0])).unwrap();
        assert_eq!(next.balances(), &[2.0, 7.0]);
        assert_eq!(next.supply(), 9.0);

        let next = step_open(&layer(&[5.0, 5.0]), &i2, &MintBurnVector::zeros(2)).unwrap();
        assert_eq!(next.balances(), &[5.0, 5.0]);

        let err = step_open(&layer(&[4.0, 0.0]), &i2, &MintBurnVector::new(vec![-5.0, 0.0]));
        assert!(matches!(err, Err(EngineError::NegativeBalanceRisk { slot: 0, .. })));
    }

    #[test]
    fn step_open_with_zero_delta_equals_closed() {
        let w = m(3, &[(0, 0, 0.2), (1, 0, 0.8), (2, 1, 1.0), (0, 2, 0.3), (2, 2, 0.7)]);
        let x = layer(&[3.0, 1.5, 7.25]);
        assert_eq!(
            step_open(&x, &w, &MintBurnVector::zeros(3)).unwrap(),
            step_closed(&x, &w).unwrap()
        );
    }

    #[test]
    fn supply_examples() {
        assert_eq!(layer(&[8.0, 4.0]).supply(), 12.0);
        assert_eq!(layer(&[]).supply(), 0.0);
        assert!((layer(&[0.1, 0.2, 0.7]).supply() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn run_identity_is_fixed_point() {
        let x0 = layer(&[3.0, 9.0, 1.0]);
        let mut provider = |_: u64, _: &LayerState| Ok(RoundInput::closed(TransferMatrix::identity(3)));
        let run = run(x0.clone(), &mut provider, 100).unwrap();
        assert_eq!(run.states.len(), 101);
        assert_eq!(run.last().balances(), x0.balances());
        assert_eq!(run.ledger_sequence().len(), 101);
    }

    #[test]
    fn run_reports_failing_round() {
        let mut provider = |r: u64, _: &LayerState| {
            if r == 2 {
                Ok(RoundInput::closed(TransferMatrix::identity(5)))
            } else {
                Ok(RoundInput::closed(TransferMatrix::identity(1)))
            }
        };
        let err = run(layer(&[1.0]), &mut provider, 4).unwrap_err();
        assert!(matches!(err, EngineError::AtRound { round: 2, .. }));
    }

    #[test]
    fn run_with_joining_player() {
        let mut provider = |r: u64, s: &LayerState| {
            if r == 0 {
                let mut input = RoundInput::closed(m(2, &[(0, 0, 0.5), (1, 0, 0.5), (1, 1, 1.0)]));
                input.joining.push("new".into());
                Ok(input)
            } else {
                Ok(RoundInput::closed(TransferMatrix::identity(s.len())))
            }
        };
        let run = run(LayerState::new("L", [("old", 4.0)]).unwrap(), &mut provider, 2).unwrap();
        assert_eq!(run.last().balance("new"), Some(2.0));
        assert_eq!(run.last().balance("old"), Some(2.0));
    }

    fn abc() -> LayerState {
        LayerState::new("main", [("A", 10.0), ("B", 7.0), ("C", 3.0)]).unwrap()
    }

    fn commits(c: &[(&str, f64)]) -> BTreeMap<String, f64> {
        c.iter().map(|&(p, a)| (p.to_owned(), a)).collect()
    }

    #[test]
    fn commit_and_settle() {
        let (parent, sub) = commit_sublayer(&abc(), &commits(&[("A", 4.0), ("B", 2.0)]), CHANNEL_SLOT).unwrap();
        assert_eq!(parent.balance("A"), Some(6.0));
        assert_eq!(parent.balance("B"), Some(5.0));
        assert_eq!(parent.balance("C"), Some(3.0));
        assert_eq!(parent.balance("chan"), Some(6.0));
        assert_eq!(parent.supply(), 20.0);
        assert_eq!(sub.balance("A"), Some(4.0));
        assert_eq!(sub.balance("B"), Some(2.0));

        let sub_final = LayerState::new("x", [("A", 1.0), ("B", 5.0)]).unwrap();
        let settled = settle_sublayer(&parent, &sub_final, CHANNEL_SLOT).unwrap();
        assert_eq!(settled.balance("A"), Some(7.0));
        assert_eq!(settled.balance("B"), Some(10.0));
        assert_eq!(settled.balance("C"), Some(3.0));
        assert_eq!(settled.slot("chan"), None);
        assert_eq!(settled.supply(), 20.0);

        let round_trip = settle_sublayer(&parent, &sub, CHANNEL_SLOT).unwrap();
        assert_eq!(round_trip.balances(), abc().balances());
        assert_eq!(round_trip.players(), abc().players());
    }

    #[test]
    fn commit_errors() {
        assert_eq!(
            commit_sublayer(&abc(), &BTreeMap::new(), CHANNEL_SLOT).unwrap_err(),
            EngineError::EmptyChannel
        );
        assert!(matches!(
            commit_sublayer(&abc(), &commits(&[("A", 11.0)]), CHANNEL_SLOT),
            Err(EngineError::InsufficientBalance { ref player, .. }) if player == "A"
        ));
        assert!(matches!(
            commit_sublayer(&abc(), &commits(&[("Z", 1.0)]), CHANNEL_SLOT),
            Err(EngineError::UnknownPlayer(_))
        ));
    }

    #[test]
    fn settle_errors() {
        let (parent, _) = commit_sublayer(&abc(), &commits(&[("A", 4.0), ("B", 2.0)]), CHANNEL_SLOT).unwrap();
        let short = LayerState::new("x", [("A", 1.0), ("B", 4.0)]).unwrap();
        assert!(matches!(
            settle_sublayer(&parent, &short, CHANNEL_SLOT),
            Err(EngineError::SupplyMismatch { .. })
        ));
        let stranger = LayerState::new("x", [("A", 1.0), ("Q", 5.0)]).unwrap();
        assert!(matches!(
            settle_sublayer(&parent, &stranger, CHANNEL_SLOT),
            Err(EngineError::UnknownPlayer(_))
        ));
        assert!(matches!(
            settle_sublayer(&abc(), &short, CHANNEL_SLOT),
            Err(EngineError::MissingChannel(_))
        ));
    }

    fn tx(sender: &str, receiver: &str, amount: f64) -> TransactionRecord {
        TransactionRecord {
            round: 0,
            sender: sender.into(),
            receiver: receiver.into(),
            amount,
        }
    }

    #[test]
    fn empirical_matrix_examples() {
        let holdings = LayerState::new("L", [("A", 10.0), ("B", 5.0)]).unwrap();
        let w = build_matrix_from_transactions(&[tx("A", "B", 4.0)], &holdings).unwrap();
        assert!((w.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((w.get(1, 0) - 0.4).abs() < 1e-15);
        assert_eq!(w.get(1, 1), 1.0);
        assert_eq!(w.nnz(), 3);
        assert_eq!(validate_transfer_matrix(&w), Ok(()));

        let w = build_matrix_from_transactions(&[], &holdings).unwrap();
        assert_eq!(w, TransferMatrix::identity(2));

        assert!(matches!(
            build_matrix_from_transactions(&[tx("A", "B", 11.0)], &holdings),
            Err(EngineError::Overspend { ref sender, .. }) if sender == "A"
        ));
    }

    #[test]
    fn empirical_matrix_reproduces_transfers() {
        let holdings = LayerState::new("L", [("A", 10.0), ("B", 5.0), ("C", 0.0)]).unwrap();
        let log = [
            tx("A", "B", 4.0),
            tx("A", "C", 6.0),
            tx("B", "C", 1.0),
            tx("B", "C", 1.5),
            tx("B", "B", 2.0),
        ];
        let w = build_matrix_from_transactions(&log, &holdings).unwrap();
        assert_eq!(validate_transfer_matrix(&w), Ok(()));
        // A spent everything, so no self-loop is stored.
        assert_eq!(w.diagonal(0), 0.0);
        assert_eq!(w.diagonal(2), 1.0);
        let next = step_closed(&holdings, &w).unwrap();
        assert_eq!(next.balances(), &[0.0, 6.5, 8.5]);
    }

    #[test]
    fn renormalize_repairs_small_drift() {
        let mut w = m(2, &[(0, 0, 0.5 + 5e-7), (1, 0, 0.5), (1, 1, 1.0)]);
        assert!(validate_transfer_matrix(&w).is_err());
        w.renormalize().unwrap();
        assert_eq!(validate_transfer_matrix(&w), Ok(()));
        let mut far = m(1, &[(0, 0, 0.9)]);
        assert!(far.renormalize().is_err());
    }
}
