//! Distributional and velocity metrics. All logarithms are base 2, so
//! entropies and divergences are in bits.

use thiserror::Error;

use crate::engine::{LayerState, TransferMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("total supply is zero, no distribution exists")]
    ZeroSupply,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("divergence rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("divergence is infinite, target is unreachable")]
    InfiniteDivergence,
    #[error("active slot set is empty")]
    EmptyActiveSet,
    #[error("slot {slot} outside matrix dimension {n}")]
    SlotOutOfRange { slot: usize, n: usize },
    #[error("round or layer index set is empty")]
    EmptyIndexSets,
    #[error("row {0} has a different length than row 0")]
    RaggedRows(usize),
    #[error("no circulating supply in the second layer, the rate is unbounded")]
    NoDemand,
    #[error("at least two snapshots are needed to estimate a rate")]
    TooFewSnapshots,
}

const SUM_TOL: f64 = 1e-12;

/// Probability vector `p_i = v_i / |v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, MetricsError> {
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(MetricsError::InvalidDistribution(format!("entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(MetricsError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Normalizes non-negative balances into a distribution.
pub fn normalize(balances: &[f64]) -> Result<TokenDistribution, MetricsError> {
    if let Some(b) = balances.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(MetricsError::InvalidDistribution(format!("balance {b}")));
    }
    let total: f64 = balances.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::ZeroSupply);
    }
    Ok(TokenDistribution {
        probs: balances.iter().map(|b| b / total).collect(),
    })
}

/// Shannon entropy in bits with `0 log 0 = 0`, clamped to `[0, log2 n]`.
/// Mass spread evenly over `k` slots gives exactly `log2 k`.
pub fn entropy(p: &TokenDistribution) -> f64 {
    let mut support = p.probs.iter().copied().filter(|&x| x > 0.0);
    if let Some(first) = support.next() {
        if support.clone().all(|x| x == first) {
            return ((support.count() + 1) as f64).log2();
        }
    }
    let h: f64 = -p.probs.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>();
    let upper = (p.len().max(1) as f64).log2();
    h.clamp(0.0, upper)
}

/// Kullback-Leibler divergence `D(p || q)` in bits. Returns
/// `f64::INFINITY` when `p` puts mass where `q` has none.
pub fn relative_entropy(p: &TokenDistribution, q: &TokenDistribution) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DimensionMismatch(p.len(), q.len()));
    }
    let mut d = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        d += pi * (pi / qi).log2();
    }
    Ok(d.max(0.0))
}

/// Rounds needed to close the divergence `D(p || q)` at `ell` bits per round.
pub fn rounds_to_target(p: &TokenDistribution, q: &TokenDistribution, ell: f64) -> Result<f64, MetricsError> {
    if !(ell.is_finite() && ell > 0.0) {
        return Err(MetricsError::NonPositiveRate(ell));
    }
    let d = relative_entropy(p, q)?;
    if d.is_infinite() {
        return Err(MetricsError::InfiniteDivergence);
    }
    Ok(d / ell)
}

/// Average per-round reduction of `D(p_r || q)` over consecutive snapshots.
/// Useful as the `ell` argument of [`rounds_to_target`].
pub fn estimate_divergence_rate(
    snapshots: &[TokenDistribution],
    target: &TokenDistribution,
) -> Result<f64, MetricsError> {
    if snapshots.len() < 2 {
        return Err(MetricsError::TooFewSnapshots);
    }
    let first = relative_entropy(&snapshots[0], target)?;
    let last = relative_entropy(&snapshots[snapshots.len() - 1], target)?;
    if first.is_infinite() || last.is_infinite() {
        return Err(MetricsError::InfiniteDivergence);
    }
    Ok((first - last) / (snapshots.len() - 1) as f64)
}

/// Retained (`zeta`) and circulated (`zeta_star`) fractions for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirculationReport {
    pub zeta: f64,
    pub zeta_star: f64,
    pub active_count: usize,
}

/// Mean self-loop weight of `w`, over all slots or over `active` only
/// (partial trace).
pub fn zeta(w: &TransferMatrix, active: Option<&[usize]>) -> Result<CirculationReport, MetricsError> {
    let (trace, count) = match active {
        None => ((0..w.n()).map(|i| w.diagonal(i)).sum::<f64>(), w.n()),
        Some([]) => return Err(MetricsError::EmptyActiveSet),
        Some(slots) => {
            let mut trace = 0.0;
            for &slot in slots {
                if slot >= w.n() {
                    return Err(MetricsError::SlotOutOfRange { slot, n: w.n() });
                }
                trace += w.diagonal(slot);
            }
            (trace, slots.len())
        }
    };
    if count == 0 {
        return Err(MetricsError::EmptyActiveSet);
    }
    let zeta = (trace / count as f64).clamp(0.0, 1.0);
    Ok(CirculationReport {
        zeta,
        zeta_star: 1.0 - zeta,
        active_count: count,
    })
}

/// Slots holding a positive balance, for use as the active set of [`zeta`].
pub fn positive_slots(state: &LayerState) -> Vec<usize> {
    state
        .balances()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Mean of a rounds-by-layers matrix of circulation values.
pub fn zeta_global(values: &[Vec<f64>]) -> Result<f64, MetricsError> {
    let width = values.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(MetricsError::EmptyIndexSets);
    }
    if let Some(i) = values.iter().position(|row| row.len() != width) {
        return Err(MetricsError::RaggedRows(i));
    }
    let sum: f64 = values.iter().flatten().sum();
    Ok(sum / (values.len() * width) as f64)
}

/// Layer-1 tokens per layer-2 token implied by circulating volumes:
/// `((1 - zeta1) chi1) / ((1 - zeta2) chi2)`.
pub fn inflation_ratio(zeta1: f64, chi1: f64, zeta2: f64, chi2: f64) -> Result<f64, MetricsError> {
    let denominator = (1.0 - zeta2) * chi2;
    if denominator <= 0.0 {
        return Err(MetricsError::NoDemand);
    }
    Ok((1.0 - zeta1) * chi1 / denominator)
}

/// `M V = P Q` for one round of a two-layer exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeIdentity {
    pub money_supply: f64,
    pub velocity: f64,
    pub price_level: f64,
    pub real_expenditure: f64,
}

impl ExchangeIdentity {
    pub fn lhs(&self) -> f64 {
        self.money_supply * self.velocity
    }

    pub fn rhs(&self) -> f64 {
        self.price_level * self.real_expenditure
    }

    pub fn holds(&self, tol: f64) -> bool {
        (self.lhs() - self.rhs()).abs() <= tol * self.lhs().abs().max(1.0)
    }
}

/// Sets `M = chi1`, `V = 1 - zeta1`, `P = x_r` and `Q = (1 - zeta2) chi2`.
pub fn exchange_identity(chi1: f64, zeta1: f64, chi2: f64, zeta2: f64) -> Result<ExchangeIdentity, MetricsError> {
    let price_level = inflation_ratio(zeta1, chi1, zeta2, chi2)?;
    Ok(ExchangeIdentity {
        money_supply: chi1,
        velocity: 1.0 - zeta1,
        price_level,
        real_expenditure: (1.0 - zeta2) * chi2,
    })
}
