//! PageRank as an open token exchange game.
//!
//! Each page holds a fraction of a unit of "surfer" tokens. Every round a
//! page sends a share `p` of its balance along its outlinks and keeps
//! `1 - p`, after which the kept share is burned and replaced by a uniform
//! teleport mint of `(1 - p) / n`. The mint/burn vector
//! `y_i = (1 - p) / n - (1 - p) x_i` always satisfies `y_i >= -x_i w_ii`
//! because `w_ii = 1 - p`, so each round is a valid open-game step and the
//! net update is `x' = p L x + (1 - p) / n`.

use crate::engine::{step_open, EngineError, LayerState, MintBurnVector, RoundInput, RoundProvider, TransferMatrix};

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankSpec {
    pub pages: Vec<String>,
    /// `links[i][j]` counts links from page `i` to page `j`.
    pub links: Vec<Vec<u32>>,
    pub damping: f64,
    /// Spread a dangling page's share uniformly instead of failing.
    pub dangling_fallback: bool,
}

impl PageRankSpec {
    /// Builds a spec from `(from, to)` page pairs. Pages are ordered by
    /// first appearance unless listed in `pages` beforehand.
    pub fn from_edges<S: AsRef<str>>(pages: &[S], edges: &[(S, S)], damping: f64) -> Self {
        let mut names: Vec<String> = pages.iter().map(|p| p.as_ref().to_owned()).collect();
        let slot = |name: &str, names: &mut Vec<String>| match names.iter().position(|p| p == name) {
            Some(i) => i,
            None => {
                names.push(name.to_owned());
                names.len() - 1
            }
        };
        let pairs: Vec<(usize, usize)> = edges
            .iter()
            .map(|(a, b)| (slot(a.as_ref(), &mut names), slot(b.as_ref(), &mut names)))
            .collect();
        let n = names.len();
        let mut links = vec![vec![0; n]; n];
        for (a, b) in pairs {
            links[a][b] += 1;
        }
        Self {
            pages: names,
            links,
            damping,
            dangling_fallback: false,
        }
    }
}

/// Matrix, teleport mint and initial state of a PageRank game.
#[derive(Debug, Clone, PartialEq)]
pub struct PageRankGame {
    pub matrix: TransferMatrix,
    pub damping: f64,
    pub initial: LayerState,
}

impl PageRankGame {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Teleport mint minus the burned retained share for the given state.
    pub fn delta(&self, state: &LayerState) -> MintBurnVector {
        let leave = 1.0 - self.damping;
        let teleport = leave / self.n() as f64;
        MintBurnVector::new(state.balances().iter().map(|x| teleport - leave * x).collect())
    }

    pub fn provider(&self) -> impl RoundProvider + '_ {
        move |_: u64, state: &LayerState| -> Result<RoundInput, EngineError> {
            Ok(RoundInput::open(self.matrix.clone(), self.delta(state)))
        }
    }

    /// Steps until the L1 change between rounds drops below `tol`, or
    /// `max_rounds` is reached. Returns the final state and rounds used.
    pub fn iterate(&self, max_rounds: u64, tol: f64) -> Result<(LayerState, u64), EngineError> {
        let mut state = self.initial.clone();
        for round in 1..=max_rounds {
            let next = step_open(&state, &self.matrix, &self.delta(&state))?;
            let change: f64 = next
                .balances()
                .iter()
                .zip(state.balances())
                .map(|(a, b)| (a - b).abs())
                .sum();
            state = next;
            if change < tol {
                return Ok((state, round));
            }
        }
        Ok((state, max_rounds))
    }
}

pub fn build_pagerank_game(spec: &PageRankSpec) -> Result<PageRankGame, ScenarioError> {
    let n = spec.pages.len();
    if spec.links.len() != n || spec.links.iter().any(|r| r.len() != n) {
        return Err(ScenarioError::LinkShape {
            rows: spec.links.len(),
            cols: spec.links.first().map_or(0, Vec::len),
            pages: n,
        });
    }
    let p = spec.damping;
    if !(0.0..=1.0).contains(&p) {
        return Err(ScenarioError::InvalidDamping(p));
    }
    let mut triplets = Vec::new();
    for (j, row) in spec.links.iter().enumerate() {
        if row[j] != 0 {
            return Err(ScenarioError::SelfLink(spec.pages[j].clone()));
        }
        let out_degree: u32 = row.iter().sum();
        let mut column = vec![0.0; n];
        if out_degree == 0 {
            if !spec.dangling_fallback {
                return Err(ScenarioError::DanglingPage(spec.pages[j].clone()));
            }
            column.iter_mut().for_each(|w| *w = p / n as f64);
        } else {
            for (i, &count) in row.iter().enumerate() {
                column[i] = p * f64::from(count) / f64::from(out_degree);
            }
        }
        column[j] += 1.0 - p;
        triplets.extend(
            column
                .into_iter()
                .enumerate()
                .filter(|&(_, w)| w > 0.0)
                .map(|(i, w)| (i, j, w)),
        );
    }
    let matrix = TransferMatrix::from_triplets(n, triplets)?;
    let initial = LayerState::new("pagerank", spec.pages.iter().map(|page| (page.clone(), 1.0 / n as f64)))?;
    Ok(PageRankGame {
        matrix,
        damping: p,
        initial,
    })
}
