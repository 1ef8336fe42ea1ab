//! Cross-layer structure: portfolios, fungibility matrices and graphs,
//! arbitrage search and the tree-or-zero-cost dichotomy check.
//!
//! Rates follow the convention `rates[i][j]` = layer-`j` tokens obtained per
//! layer-`i` token. A missing rate (`None`) stands for the non-fungible case,
//! which is equally described as a rate of zero or of infinity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::engine::{EngineError, LayerState};

/// Default tolerance for arbitrage gains and reciprocal checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Graphs up to this many layers are searched exhaustively so the most
/// profitable simple cycle is reported.
pub const EXHAUSTIVE_CYCLE_LIMIT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultilayerError {
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("layer index {0} out of range")]
    LayerIndex(usize),
    #[error("rate between layers {0} and {1} is unavailable")]
    RateUnavailable(usize, usize),
    #[error("no exchange rate for the swap")]
    NoSwapRate,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("kappa is zero on present edge ({0}, {1})")]
    CostEdgeMismatch(usize, usize),
    #[error("cost at ({0}, {1}) is {2}, costs must be finite and non-negative")]
    InvalidCost(usize, usize, f64),
    #[error("invalid fungibility matrix: {0}")]
    InvalidMatrix(FungibilityViolation),
    #[error("graph has a cycle but no mu weights were given")]
    MissingMu,
    #[error("{side} `{player}` holds {balance} in layer `{layer}`, needs {needed}")]
    InsufficientBalance {
        side: SwapSide,
        player: String,
        layer: String,
        balance: f64,
        needed: f64,
    },
    #[error("swap amount {0} must be finite and non-negative")]
    InvalidAmount(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapSide {
    Payer,
    Payee,
}

impl fmt::Display for SwapSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Payer => "payer",
            Self::Payee => "payee",
        })
    }
}

/// A player's balances across layers, in the order the layers were given.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioVector {
    pub player: String,
    pub holdings: Vec<(String, f64)>,
}

impl PortfolioVector {
    pub fn get(&self, layer: &str) -> Option<f64> {
        self.holdings.iter().find(|(l, _)| l == layer).map(|&(_, b)| b)
    }

    pub fn values(&self) -> Vec<f64> {
        self.holdings.iter().map(|&(_, b)| b).collect()
    }
}

pub fn portfolio(player: &str, states: &[&LayerState]) -> PortfolioVector {
    PortfolioVector {
        player: player.to_owned(),
        holdings: states
            .iter()
            .map(|s| (s.layer().to_owned(), s.balance(player).unwrap_or(0.0)))
            .collect(),
    }
}

/// Why a fungibility matrix is invalid.
#[derive(Debug, Clone, PartialEq)]
pub enum FungibilityViolation {
    NotSquare { rows: usize, layers: usize },
    Diagonal { index: usize, value: Option<f64> },
    NonPositive { row: usize, col: usize, value: f64 },
}

impl fmt::Display for FungibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { rows, layers } => write!(f, "{rows} rows for {layers} layers"),
            Self::Diagonal { index, value } => write!(f, "diagonal {index} is {value:?}, must be 1"),
            Self::NonPositive { row, col, value } => {
                write!(f, "rate ({row}, {col}) = {value} must be positive and finite")
            }
        }
    }
}

/// Pairwise exchange rates between layers for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct FungibilityMatrix {
    layers: Vec<String>,
    rates: Vec<Vec<Option<f64>>>,
}

impl FungibilityMatrix {
    /// All off-diagonal rates unavailable.
    pub fn isolated(layers: Vec<String>) -> Self {
        let n = layers.len();
        let rates = (0..n)
            .map(|i| (0..n).map(|j| (i == j).then_some(1.0)).collect())
            .collect();
        Self { layers, rates }
    }

    pub fn new_unchecked(layers: Vec<String>, rates: Vec<Vec<Option<f64>>>) -> Self {
        Self { layers, rates }
    }

    pub fn new(layers: Vec<String>, rates: Vec<Vec<Option<f64>>>) -> Result<Self, MultilayerError> {
        let m = Self::new_unchecked(layers, rates);
        validate_fungibility_matrix(&m).map_err(MultilayerError::InvalidMatrix)?;
        Ok(m)
    }

    /// Builds from dense values where `0` and `inf` mean unavailable.
    pub fn from_dense(layers: Vec<String>, dense: &[Vec<f64>]) -> Result<Self, MultilayerError> {
        let rates = dense
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| (v != 0.0 && !v.is_infinite()).then_some(v))
                    .collect()
            })
            .collect();
        Self::new(layers, rates)
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn index_of(&self, layer: &str) -> Option<usize> {
        self.layers.iter().position(|l| l == layer)
    }

    pub fn rate(&self, i: usize, j: usize) -> Option<f64> {
        self.rates.get(i).and_then(|r| r.get(j)).copied().flatten()
    }

    pub fn set_rate(&mut self, i: usize, j: usize, rate: Option<f64>) -> Result<(), MultilayerError> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(MultilayerError::LayerIndex(i.max(j)));
        }
        self.rates[i][j] = rate;
        Ok(())
    }

    /// Marks every pair involving an isolated layer as unavailable.
    pub fn mark_isolated(&mut self, player_sets: &BTreeMap<String, BTreeSet<String>>) -> Result<(), MultilayerError> {
        for i in 0..self.len() {
            if is_isolated(&self.layers[i], player_sets)? {
                for j in (0..self.len()).filter(|&j| j != i) {
                    self.rates[i][j] = None;
                    self.rates[j][i] = None;
                }
            }
        }
        Ok(())
    }
}

pub fn validate_fungibility_matrix(m: &FungibilityMatrix) -> Result<(), FungibilityViolation> {
    let n = m.layers.len();
    if m.rates.len() != n || m.rates.iter().any(|r| r.len() != n) {
        return Err(FungibilityViolation::NotSquare {
            rows: m.rates.len(),
            layers: n,
        });
    }
    for (row, rates) in m.rates.iter().enumerate() {
        for (col, &value) in rates.iter().enumerate() {
            if row == col {
                if value != Some(1.0) {
                    return Err(FungibilityViolation::Diagonal { index: row, value });
                }
            } else if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(FungibilityViolation::NonPositive { row, col, value: v });
                }
            }
        }
    }
    Ok(())
}

/// True when `layer` shares no player with any other layer.
pub fn is_isolated(layer: &str, player_sets: &BTreeMap<String, BTreeSet<String>>) -> Result<bool, MultilayerError> {
    let own = player_sets
        .get(layer)
        .ok_or_else(|| MultilayerError::UnknownLayer(layer.to_owned()))?;
    Ok(player_sets
        .iter()
        .filter(|(other, _)| other.as_str() != layer)
        .all(|(_, players)| own.is_disjoint(players)))
}

/// True when `rho_ij * rho_ji` is within `tol` of one.
pub fn local_equilibrium(m: &FungibilityMatrix, i: usize, j: usize, tol: f64) -> Result<bool, MultilayerError> {
    let forward = m.rate(i, j).ok_or(MultilayerError::RateUnavailable(i, j))?;
    let backward = m.rate(j, i).ok_or(MultilayerError::RateUnavailable(j, i))?;
    Ok((forward * backward - 1.0).abs() <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FungibilityEdge {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Directed graph on layers with one edge per available off-diagonal rate,
/// optionally weighted by contract cost `kappa` and arbitrage-prevention cost
/// `mu` (both in bits).
#[derive(Debug, Clone, PartialEq)]
pub struct FungibilityGraph {
    layers: Vec<String>,
    edges: Vec<FungibilityEdge>,
    kappa: Option<Vec<Vec<f64>>>,
    mu: Option<Vec<Vec<f64>>>,
}

impl FungibilityGraph {
    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn edges(&self) -> &[FungibilityEdge] {
        &self.edges
    }

    pub fn kappa(&self, i: usize, j: usize) -> Option<f64> {
        self.kappa.as_ref().map(|k| k[i][j])
    }

    pub fn mu(&self, i: usize, j: usize) -> Option<f64> {
        self.mu.as_ref().map(|m| m[i][j])
    }

    pub fn has_mu(&self) -> bool {
        self.mu.is_some()
    }

    /// Undirected simple edges `{i, j}` with `i < j`.
    pub fn undirected_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| (e.from.min(e.to), e.from.max(e.to)))
            .collect()
    }
}

fn check_costs(costs: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>, MultilayerError> {
    if costs.len() != n {
        return Err(MultilayerError::DimensionMismatch {
            expected: n,
            found: costs.len(),
        });
    }
    let mut out = costs.to_vec();
    for (i, row) in out.iter_mut().enumerate() {
        if row.len() != n {
            return Err(MultilayerError::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        for (j, v) in row.iter_mut().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(MultilayerError::InvalidCost(i, j, *v));
            }
            if i == j {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

pub fn fungibility_graph(
    rates: &FungibilityMatrix,
    kappa: Option<&[Vec<f64>]>,
    mu: Option<&[Vec<f64>]>,
) -> Result<FungibilityGraph, MultilayerError> {
    validate_fungibility_matrix(rates).map_err(MultilayerError::InvalidMatrix)?;
    let n = rates.len();
    let kappa = kappa.map(|k| check_costs(k, n)).transpose()?;
    let mu = mu.map(|m| check_costs(m, n)).transpose()?;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if let Some(rate) = rates.rate(i, j) {
                if kappa.as_ref().is_some_and(|k| k[i][j] == 0.0) {
                    return Err(MultilayerError::CostEdgeMismatch(i, j));
                }
                edges.push(FungibilityEdge { from: i, to: j, rate });
            }
        }
    }
    Ok(FungibilityGraph {
        layers: rates.layers.clone(),
        edges,
        kappa,
        mu,
    })
}

/// A directed cycle of layers whose rate product exceeds one.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageCycle {
    /// Layer indices along the cycle, starting at the smallest index; the
    /// closing edge back to the first layer is implied.
    pub path: Vec<usize>,
    pub gain: f64,
}

impl ArbitrageCycle {
    pub fn labels<'a>(&self, layers: &'a [String]) -> Vec<&'a str> {
        self.path
            .iter()
            .chain(self.path.first())
            .map(|&i| layers[i].as_str())
            .collect()
    }
}

fn adjacency(h: &FungibilityGraph) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); h.layers.len()];
    for e in &h.edges {
        adj[e.from].push((e.to, e.rate));
    }
    adj
}

fn cycle_gain(h: &FungibilityGraph, path: &[usize]) -> f64 {
    let adj = adjacency(h);
    path.iter()
        .zip(path.iter().cycle().skip(1))
        .map(|(&a, &b)| adj[a].iter().find(|&&(t, _)| t == b).map_or(0.0, |&(_, r)| r))
        .product()
}

fn rotate_to_min(mut path: Vec<usize>) -> Vec<usize> {
    if let Some(pos) = path.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
        path.rotate_left(pos);
    }
    path
}

/// Searches for a cycle whose rate product exceeds `1 + tol`.
///
/// Small graphs are enumerated exhaustively and the most profitable simple
/// cycle is returned. Larger graphs use Bellman-Ford negative-cycle
/// detection on weights `-ln(rate) + ln(1 + tol)`, which only reports cycles
/// whose gain exceeds `(1 + tol)^len`.
pub fn find_arbitrage(h: &FungibilityGraph, tol: f64) -> Option<ArbitrageCycle> {
    if h.layers.len() <= EXHAUSTIVE_CYCLE_LIMIT {
        best_simple_cycle(h).filter(|c| c.gain > 1.0 + tol)
    } else {
        bellman_ford_cycle(h, tol)
    }
}

fn best_simple_cycle(h: &FungibilityGraph) -> Option<ArbitrageCycle> {
    let adj = adjacency(h);
    let n = adj.len();
    let mut best: Option<ArbitrageCycle> = None;
    let mut path = Vec::with_capacity(n);
    let mut on_path = vec![false; n];

    // Cycles are enumerated once each, rooted at their smallest vertex.
    fn extend(
        start: usize,
        v: usize,
        log_gain: f64,
        adj: &[Vec<(usize, f64)>],
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        best: &mut Option<ArbitrageCycle>,
    ) {
        for &(t, rate) in &adj[v] {
            let lg = log_gain + rate.ln();
            if t == start {
                let gain = lg.exp();
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    *best = Some(ArbitrageCycle {
                        path: path.clone(),
                        gain,
                    });
                }
            } else if t > start && !on_path[t] {
                on_path[t] = true;
                path.push(t);
                extend(start, t, lg, adj, path, on_path, best);
                path.pop();
                on_path[t] = false;
            }
        }
    }

    for start in 0..n {
        path.clear();
        path.push(start);
        on_path[start] = true;
        extend(start, start, 0.0, &adj, &mut path, &mut on_path, &mut best);
        on_path[start] = false;
    }
    best.map(|mut c| {
        c.gain = cycle_gain(h, &c.path);
        c
    })
}

fn bellman_ford_cycle(h: &FungibilityGraph, tol: f64) -> Option<ArbitrageCycle> {
    let n = h.layers.len();
    let penalty = tol.ln_1p();
    let weighted: Vec<(usize, usize, f64)> = h.edges.iter().map(|e| (e.from, e.to, -e.rate.ln() + penalty)).collect();
    // Distances start at zero everywhere, as if from a virtual source.
    let mut dist = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last_relaxed = None;
    for _ in 0..n {
        last_relaxed = None;
        for &(u, v, w) in &weighted {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                pred[v] = Some(u);
                last_relaxed = Some(v);
            }
        }
        last_relaxed?;
    }
    // Walking back n steps from a vertex relaxed in round n lands on a cycle.
    let mut v = last_relaxed?;
    for _ in 0..n {
        v = pred[v]?;
    }
    let mut cycle = vec![v];
    let mut u = pred[v]?;
    while u != v {
        cycle.push(u);
        u = pred[u]?;
    }
    cycle.reverse();
    let path = rotate_to_min(cycle);
    let gain = cycle_gain(h, &path);
    (gain > 1.0 + tol).then_some(ArbitrageCycle { path, gain })
}

/// Outcome of checking that a fungibility graph is a forest or carries zero
/// arbitrage-prevention cost.
#[derive(Debug, Clone, PartialEq)]
pub enum ForestVerdict {
    /// No undirected cycle.
    Acyclic,
    /// Cycles exist but every `mu` weight is zero.
    ZeroMu,
    /// A cycle exists while some `mu` weight is positive. The cycle
    /// contains a positive-`mu` edge whenever one lies on a cycle.
    Counterexample { cycle: Vec<usize> },
}

/// Checks the forest-or-zero-`mu` dichotomy on `h`, treated as an undirected
/// simple graph. `mu` is only required when `h` has a cycle.
pub fn check_forest_condition(h: &FungibilityGraph) -> Result<ForestVerdict, MultilayerError> {
    let n = h.layers.len();
    let edges = h.undirected_edges();
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in &edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let Some(any_cycle) = find_undirected_cycle(&adj) else {
        return Ok(ForestVerdict::Acyclic);
    };
    let mu = h.mu.as_ref().ok_or(MultilayerError::MissingMu)?;
    let edge_mu = |a: usize, b: usize| mu[a][b].max(mu[b][a]);
    if mu.iter().flatten().all(|&v| v == 0.0) {
        return Ok(ForestVerdict::ZeroMu);
    }
    for &(a, b) in &edges {
        if edge_mu(a, b) > 0.0 {
            if let Some(path) = path_avoiding_edge(&adj, a, b) {
                return Ok(ForestVerdict::Counterexample {
                    cycle: canonical_undirected(path),
                });
            }
        }
    }
    Ok(ForestVerdict::Counterexample {
        cycle: canonical_undirected(any_cycle),
    })
}

/// Starts the cycle at its smallest vertex and walks towards the smaller of
/// its two neighbours.
fn canonical_undirected(cycle: Vec<usize>) -> Vec<usize> {
    let mut cycle = rotate_to_min(cycle);
    if cycle.len() > 2 && cycle[cycle.len() - 1] < cycle[1] {
        cycle[1..].reverse();
    }
    cycle
}

/// Shortest path from `a` to `b` that does not use the edge `{a, b}`.
fn path_avoiding_edge(adj: &[BTreeSet<usize>], a: usize, b: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[a] = a;
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if (u == a && v == b) || prev[v] != usize::MAX {
                continue;
            }
            prev[v] = u;
            if v == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(v);
        }
    }
    None
}

fn find_undirected_cycle(adj: &[BTreeSet<usize>]) -> Option<Vec<usize>> {
    for a in 0..adj.len() {
        for &b in adj[a].iter().filter(|&&b| b > a) {
            if let Some(path) = path_avoiding_edge(adj, a, b) {
                return Some(path);
            }
        }
    }
    None
}

/// Exchanges `amount` layer-`i` tokens from `payer` to `payee` against
/// `amount * rate` layer-`j` tokens from `payee` to `payer`. Both legs are
/// checked before either is applied.
pub fn cross_layer_swap(
    layer_i: &LayerState,
    layer_j: &LayerState,
    payer: &str,
    payee: &str,
    amount: f64,
    rate: Option<f64>,
) -> Result<(LayerState, LayerState), MultilayerError> {
    if !(amount.is_finite() && amount >= 0.0) {
        return Err(MultilayerError::InvalidAmount(amount));
    }
    let rate = rate.ok_or(MultilayerError::NoSwapRate)?;
    if amount == 0.0 {
        return Ok((layer_i.clone(), layer_j.clone()));
    }
    let counter = amount * rate;
    let payer_has = layer_i.balance(payer).unwrap_or(0.0);
    if payer_has < amount {
        return Err(MultilayerError::InsufficientBalance {
            side: SwapSide::Payer,
            player: payer.to_owned(),
            layer: layer_i.layer().to_owned(),
            balance: payer_has,
            needed: amount,
        });
    }
    let payee_has = layer_j.balance(payee).unwrap_or(0.0);
    if payee_has < counter {
        return Err(MultilayerError::InsufficientBalance {
            side: SwapSide::Payee,
            player: payee.to_owned(),
            layer: layer_j.layer().to_owned(),
            balance: payee_has,
            needed: counter,
        });
    }
    let mut next_i = layer_i.clone();
    let mut next_j = layer_j.clone();
    transfer(&mut next_i, payer, payee, amount)?;
    transfer(&mut next_j, payee, payer, counter)?;
    Ok((next_i, next_j))
}

fn transfer(state: &mut LayerState, from: &str, to: &str, amount: f64) -> Result<(), EngineError> {
    state.add_player(to);
    let from_balance = state.balance(from).unwrap_or(0.0);
    let to_balance = state.balance(to).unwrap_or(0.0);
    state.set_balance(from, (from_balance - amount).max(0.0))?;
    if from != to {
        state.set_balance(to, to_balance + amount)?;
    } else {
        state.set_balance(to, from_balance)?;
    }
    Ok(())
}
