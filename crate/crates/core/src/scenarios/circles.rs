//! Personal-coin economy on a growing trust graph.
//!
//! Every player owns one coin type (one layer). Each round every coin mints
//! one token to its owner, optional transfers are applied, and one new
//! player joins, trusting `m` existing players chosen with probability
//! proportional to their degree.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

use crate::bargaining::{seeded_rng, SimRng};
use crate::engine::{build_matrix_from_transactions, step_open, LayerState, MintBurnVector, TransactionRecord};

use super::ScenarioError;

/// Undirected simple graph of mutual trust between players.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<BTreeSet<usize>>,
    // Each vertex appears once per incident edge, so a uniform pick from
    // this list is a degree-proportional pick of a vertex.
    endpoints: Vec<usize>,
}

impl TrustGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from named edges; isolated vertices may be listed in
    /// `vertices`. Duplicate edges are merged.
    pub fn from_edges<S: AsRef<str>>(vertices: &[S], edges: &[(S, S)]) -> Result<Self, ScenarioError> {
        let mut g = Self::new();
        for v in vertices {
            g.add_vertex(v.as_ref());
        }
        for (a, b) in edges {
            if a.as_ref() == b.as_ref() {
                return Err(ScenarioError::SelfTrust(a.as_ref().to_owned()));
            }
            let a = g.add_vertex(a.as_ref());
            let b = g.add_vertex(b.as_ref());
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Star `K_{1,k}` with centre `0`.
    pub fn star(leaves: usize) -> Self {
        let mut g = Self::new();
        let centre = g.add_vertex("0");
        for i in 1..=leaves {
            let leaf = g.add_vertex(&i.to_string());
            g.add_edge(centre, leaf).expect("distinct vertices");
        }
        g
    }

    /// Returns the existing index when the name is already present.
    pub fn add_vertex(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_owned());
        self.adj.push(BTreeSet::new());
        self.index.insert(name.to_owned(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), ScenarioError> {
        let n = self.n();
        for v in [a, b] {
            if v >= n {
                return Err(ScenarioError::UnknownVertex(v));
            }
        }
        if a == b {
            return Err(ScenarioError::SelfTrust(self.names[a].clone()));
        }
        if self.adj[a].insert(b) {
            self.adj[b].insert(a);
            self.endpoints.push(a);
            self.endpoints.push(b);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degree_sum(&self) -> usize {
        self.endpoints.len()
    }

    pub fn edge_count(&self) -> usize {
        self.endpoints.len() / 2
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    pub fn is_connected(&self) -> bool {
        if self.n() == 0 {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Adds a vertex and connects it to `min(m, n)` distinct existing
    /// vertices drawn by [`sample_attachment`]. Returns the new index.
    pub fn attach<R: Rng>(&mut self, name: &str, m: usize, rng: &mut R) -> usize {
        let targets = self.sample_targets(m, rng);
        let v = self.add_vertex(name);
        for t in targets {
            self.add_edge(v, t).expect("targets are existing, distinct vertices");
        }
        v
    }

    fn sample_targets<R: Rng>(&self, m: usize, rng: &mut R) -> Vec<usize> {
        let want = m.min(self.n());
        let mut chosen = Vec::with_capacity(want);
        if want == self.n() {
            chosen.extend(0..self.n());
            return chosen;
        }
        while chosen.len() < want {
            let v = sample_attachment(self, rng).expect("graph has vertices");
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        chosen
    }
}

/// `degree(v) / sum of degrees`.
pub fn attachment_probability(graph: &TrustGraph, v: usize) -> Result<f64, ScenarioError> {
    if v >= graph.n() {
        return Err(ScenarioError::UnknownVertex(v));
    }
    let total = graph.degree_sum();
    if total == 0 {
        return Err(ScenarioError::EmptyGraph);
    }
    Ok(graph.degree(v) as f64 / total as f64)
}

pub fn attachment_probabilities(graph: &TrustGraph) -> Result<Vec<f64>, ScenarioError> {
    (0..graph.n()).map(|v| attachment_probability(graph, v)).collect()
}

/// Draws one vertex with probability proportional to its degree. A graph
/// without edges falls back to a uniform draw; `None` when it is empty.
pub fn sample_attachment<R: Rng>(graph: &TrustGraph, rng: &mut R) -> Option<usize> {
    if graph.n() == 0 {
        return None;
    }
    if graph.endpoints.is_empty() {
        return Some(rng.random_range(0..graph.n()));
    }
    Some(graph.endpoints[rng.random_range(0..graph.endpoints.len())])
}

/// `(degree, fraction of vertices)` pairs in increasing degree order.
pub fn degree_distribution(graph: &TrustGraph) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..graph.n() {
        *counts.entry(graph.degree(v)).or_default() += 1;
    }
    let n = graph.n() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

/// Least-squares slope of `log P(k)` against `log k` for degrees `>= k_min`,
/// using logarithmic bins `[k_min 2^b, k_min 2^(b+1))` with the density
/// normalised by bin width. Bins holding fewer than `min_count` vertices are
/// dropped. `None` if fewer than two bins remain.
pub fn power_law_tail_slope(graph: &TrustGraph, k_min: usize, min_count: usize) -> Option<f64> {
    let k_min = k_min.max(1);
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for v in 0..graph.n() {
        let k = graph.degree(v);
        if k >= k_min {
            let b = (k / k_min).ilog2();
            *bins.entry(b).or_default() += 1;
        }
    }
    let points: Vec<(f64, f64)> = bins
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .map(|(b, c)| {
            let lo = (k_min << b) as f64;
            let width = lo;
            let centre = (lo * (2.0 * lo - 1.0)).sqrt();
            (centre.ln(), (c as f64 / width).ln())
        })
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// A transfer of `amount` tokens of `coin` between two players.
#[derive(Debug, Clone, PartialEq)]
pub enum CirclesAction {
    Transfer {
        coin: String,
        from: String,
        to: String,
        amount: f64,
    },
}

/// Chooses the transfers applied in a round, before issuance is added.
pub trait SwapPolicy {
    fn actions(&mut self, state: &CirclesState, rng: &mut SimRng) -> Vec<CirclesAction>;
}

/// Nobody trades.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTrades;

impl SwapPolicy for NoTrades {
    fn actions(&mut self, _: &CirclesState, _: &mut SimRng) -> Vec<CirclesAction> {
        Vec::new()
    }
}

/// Fixed actions keyed by round.
#[derive(Debug, Clone, Default)]
pub struct ScriptedActions(pub BTreeMap<u64, Vec<CirclesAction>>);

impl SwapPolicy for ScriptedActions {
    fn actions(&mut self, state: &CirclesState, _: &mut SimRng) -> Vec<CirclesAction> {
        self.0.get(&state.round).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirclesState {
    pub graph: TrustGraph,
    /// Coin `i` is owned by player `i` of the graph; its layer id is the
    /// owner's name.
    pub coins: Vec<LayerState>,
    pub round: u64,
    pub m: usize,
}

impl CirclesState {
    /// Starts from a connected seed graph; every player's coin begins empty.
    pub fn seed(graph: TrustGraph, m: usize) -> Result<Self, ScenarioError> {
        if graph.n() == 0 {
            return Err(ScenarioError::NoPlayers);
        }
        if !graph.is_connected() {
            return Err(ScenarioError::Disconnected);
        }
        let coins = graph
            .names()
            .iter()
            .map(|name| LayerState::new(name.clone(), [(name.clone(), 0.0)]))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            graph,
            coins,
            round: 0,
            m,
        })
    }

    pub fn coin(&self, owner: &str) -> Option<&LayerState> {
        self.graph.index_of(owner).map(|i| &self.coins[i])
    }

    pub fn players(&self) -> usize {
        self.graph.n()
    }

    fn fresh_name(&self) -> String {
        let mut k = self.graph.n();
        loop {
            let name = format!("p{k}");
            if self.graph.index_of(&name).is_none() {
                return name;
            }
            k += 1;
        }
    }
}

/// One round with a generator seeded from `seed` and no trades.
pub fn circles_round(state: &CirclesState, seed: u64) -> Result<CirclesState, ScenarioError> {
    circles_round_with(state, &mut seeded_rng(seed), &mut NoTrades)
}

pub fn circles_round_with(
    state: &CirclesState,
    rng: &mut SimRng,
    policy: &mut dyn SwapPolicy,
) -> Result<CirclesState, ScenarioError> {
    let mut by_coin: BTreeMap<usize, Vec<TransactionRecord>> = BTreeMap::new();
    for CirclesAction::Transfer { coin, from, to, amount } in policy.actions(state, rng) {
        let i = state
            .graph
            .index_of(&coin)
            .ok_or_else(|| ScenarioError::UnknownCoin(coin.clone()))?;
        by_coin.entry(i).or_default().push(TransactionRecord {
            round: state.round,
            sender: from,
            receiver: to,
            amount,
        });
    }

    let mut coins = Vec::with_capacity(state.coins.len() + 1);
    for (i, coin) in state.coins.iter().enumerate() {
        let mut holders = coin.clone();
        let records = by_coin.remove(&i).unwrap_or_default();
        for r in &records {
            holders.add_player(r.receiver.clone());
        }
        let w = build_matrix_from_transactions(&records, &holders)?;
        let mut mint = MintBurnVector::zeros(holders.len());
        let owner = holders.slot(coin.layer()).expect("owner holds a slot in their coin");
        mint.deltas[owner] = 1.0;
        coins.push(step_open(&holders, &w, &mint)?);
    }

    let mut graph = state.graph.clone();
    let name = state.fresh_name();
    graph.attach(&name, state.m, rng);
    coins.push(LayerState::new(name.clone(), [(name, 0.0)])?.with_round(state.round + 1));

    Ok(CirclesState {
        graph,
        coins,
        round: state.round + 1,
        m: state.m,
    })
}

/// Bipartite holder/coin graph with an edge for every positive holding.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnershipGraph {
    pub players: Vec<String>,
    pub tokens: Vec<String>,
    /// `(player index, token index, balance)`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl OwnershipGraph {
    pub fn player_weight(&self, player: &str) -> f64 {
        self.players
            .iter()
            .position(|p| p == player)
            .map_or(0.0, |i| self.edges.iter().filter(|e| e.0 == i).map(|e| e.2).sum())
    }

    pub fn token_weight(&self, token: &str) -> f64 {
        self.tokens
            .iter()
            .position(|t| t == token)
            .map_or(0.0, |j| self.edges.iter().filter(|e| e.1 == j).map(|e| e.2).sum())
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn player_edges(&self, player: &str) -> Vec<(&str, f64)> {
        self.players
            .iter()
            .position(|p| p == player)
            .map_or_else(Vec::new, |i| {
                self.edges
                    .iter()
                    .filter(|e| e.0 == i)
                    .map(|e| (self.tokens[e.1].as_str(), e.2))
                    .collect()
            })
    }

    /// Every player holds exactly one coin type and every coin has exactly one
    /// holder.
    pub fn is_perfect_matching(&self) -> bool {
        let mut p = vec![0usize; self.players.len()];
        let mut t = vec![0usize; self.tokens.len()];
        for e in &self.edges {
            p[e.0] += 1;
            t[e.1] += 1;
        }
        p.iter().chain(&t).all(|&d| d == 1)
    }
}

pub fn ownership_bipartite(coins: &[LayerState]) -> OwnershipGraph {
    let mut players: Vec<String> = Vec::new();
    let mut player_index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let tokens: Vec<String> = coins.iter().map(|c| c.layer().to_owned()).collect();
    for (j, coin) in coins.iter().enumerate() {
        for (player, &balance) in coin.players().iter().zip(coin.balances()) {
            if balance <= 0.0 {
                continue;
            }
            let i = *player_index.entry(player.clone()).or_insert_with(|| {
                players.push(player.clone());
                players.len() - 1
            });
            edges.push((i, j, balance));
        }
    }
    OwnershipGraph { players, tokens, edges }
}
