//! Oracle procedures that fix a fungibility rate between two layers for one
//! round: sealed-bid auction, averaged dice rolls and blind majority vote.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with a 64-bit seed through
//! `SeedableRng::seed_from_u64`, so a seed fixes every outcome bit-for-bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Generator used for every stochastic mechanism.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BargainingError {
    #[error("auction quantity must be positive, got {0}")]
    NonPositiveQuantity(f64),
    #[error("minimum bid for layer `{layer}` must be positive, got {value}")]
    NonPositiveMinimum { layer: String, value: f64 },
    #[error("layer `{0}` cannot bid for its own tokens")]
    BidOnItemLayer(String),
    #[error("dice need at least one side and one player per group")]
    InvalidDice,
    #[error("{group} has {expected} players but {found} rolls were given")]
    RollCount {
        group: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("roll {roll} outside 1..={sides}")]
    RollOutOfRange { roll: u32, sides: u32 },
    #[error("vote candidates must satisfy 0 < alpha < beta, got {alpha} and {beta}")]
    InvalidCandidates { alpha: f64, beta: f64 },
    #[error("voter set is empty")]
    EmptyVoterSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bid {
    pub layer: String,
    pub bidder: String,
    pub amount: f64,
}

/// Players of the item layer offer `quantity` tokens and accept bids from
/// other layers at or above a per-layer minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionSpec {
    pub item_layer: String,
    pub quantity: f64,
    pub minimum_bids: BTreeMap<String, f64>,
    pub bids: Vec<Bid>,
}

impl AuctionSpec {
    pub fn validate(&self) -> Result<(), BargainingError> {
        if !(self.quantity.is_finite() && self.quantity > 0.0) {
            return Err(BargainingError::NonPositiveQuantity(self.quantity));
        }
        for (layer, &value) in &self.minimum_bids {
            if layer == &self.item_layer {
                return Err(BargainingError::BidOnItemLayer(layer.clone()));
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(BargainingError::NonPositiveMinimum {
                    layer: layer.clone(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Bid layers that share no player with the item layer. Such layers are
    /// not eligible bidders, but the auction still runs; callers decide
    /// whether to act on the warning.
    pub fn disjoint_bid_layers(&self, player_sets: &BTreeMap<String, BTreeSet<String>>) -> Vec<String> {
        let empty = BTreeSet::new();
        let item = player_sets.get(&self.item_layer).unwrap_or(&empty);
        self.minimum_bids
            .keys()
            .filter(|l| player_sets.get(*l).is_none_or(|p| p.is_disjoint(item)))
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub winner_layer: String,
    pub bidder: String,
    pub winning_bid: f64,
    /// `winning_bid / quantity`: winner-layer tokens per item-layer token.
    pub rate: f64,
}

/// Picks the valid bid with the largest bid-to-minimum ratio. Ties go to the
/// lexicographically smallest layer, then bidder. Bids below their layer's
/// minimum, or in layers without a minimum, are discarded.
pub fn run_auction(spec: &AuctionSpec) -> Result<Option<AuctionOutcome>, BargainingError> {
    spec.validate()?;
    let mut best: Option<(f64, &Bid)> = None;
    for bid in &spec.bids {
        let Some(&minimum) = spec.minimum_bids.get(&bid.layer) else {
            continue;
        };
        if !(bid.amount.is_finite() && bid.amount >= minimum) {
            continue;
        }
        let ratio = bid.amount / minimum;
        let better = match best {
            None => true,
            Some((r, b)) => ratio > r || (ratio == r && (&bid.layer, &bid.bidder) < (&b.layer, &b.bidder)),
        };
        if better {
            best = Some((ratio, bid));
        }
    }
    Ok(best.map(|(_, bid)| AuctionOutcome {
        winner_layer: bid.layer.clone(),
        bidder: bid.bidder.clone(),
        winning_bid: bid.amount,
        rate: bid.amount / spec.quantity,
    }))
}

/// Group A rolls `kappa`-sided dice, group B rolls `alpha`-sided dice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiceSpec {
    pub kappa: u32,
    pub alpha: u32,
    pub group_a: usize,
    pub group_b: usize,
}

impl DiceSpec {
    pub fn validate(&self) -> Result<(), BargainingError> {
        if self.kappa < 1 || self.alpha < 1 || self.group_a < 1 || self.group_b < 1 {
            return Err(BargainingError::InvalidDice);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomRatioOutcome {
    pub rolls_a: Vec<u32>,
    pub rolls_b: Vec<u32>,
    pub x_a: f64,
    pub y_b: f64,
    pub rho_xy: f64,
    pub rho_yx: f64,
}

/// Computes the outcome from explicit rolls.
pub fn random_ratio_from_rolls(
    spec: &DiceSpec,
    rolls_a: Vec<u32>,
    rolls_b: Vec<u32>,
) -> Result<RandomRatioOutcome, BargainingError> {
    spec.validate()?;
    check_rolls("group A", spec.group_a, spec.kappa, &rolls_a)?;
    check_rolls("group B", spec.group_b, spec.alpha, &rolls_b)?;
    let x_a = mean(&rolls_a);
    let y_b = mean(&rolls_b);
    Ok(RandomRatioOutcome {
        rolls_a,
        rolls_b,
        x_a,
        y_b,
        rho_xy: y_b / x_a,
        rho_yx: x_a / y_b,
    })
}

fn check_rolls(group: &'static str, expected: usize, sides: u32, rolls: &[u32]) -> Result<(), BargainingError> {
    if rolls.len() != expected {
        return Err(BargainingError::RollCount {
            group,
            expected,
            found: rolls.len(),
        });
    }
    if let Some(&roll) = rolls.iter().find(|&&r| r < 1 || r > sides) {
        return Err(BargainingError::RollOutOfRange { roll, sides });
    }
    Ok(())
}

fn mean(rolls: &[u32]) -> f64 {
    rolls.iter().map(|&r| f64::from(r)).sum::<f64>() / rolls.len() as f64
}

/// Rolls every die with a generator seeded from `seed`.
pub fn run_random_ratio(spec: &DiceSpec, seed: u64) -> Result<RandomRatioOutcome, BargainingError> {
    run_random_ratio_with(spec, &mut seeded_rng(seed))
}

pub fn run_random_ratio_with<R: Rng>(spec: &DiceSpec, rng: &mut R) -> Result<RandomRatioOutcome, BargainingError> {
    spec.validate()?;
    let rolls_a = (0..spec.group_a).map(|_| rng.random_range(1..=spec.kappa)).collect();
    let rolls_b = (0..spec.group_b).map(|_| rng.random_range(1..=spec.alpha)).collect();
    random_ratio_from_rolls(spec, rolls_a, rolls_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Alpha,
    Beta,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Alpha => "alpha",
            Self::Beta => "beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindVoteSpec {
    pub alpha: f64,
    pub beta: f64,
    pub votes_a: Vec<Choice>,
    pub votes_b: Vec<Choice>,
}

impl BlindVoteSpec {
    pub fn validate(&self) -> Result<(), BargainingError> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && 0.0 < self.alpha && self.alpha < self.beta) {
            return Err(BargainingError::InvalidCandidates {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if self.votes_a.is_empty() || self.votes_b.is_empty() {
            return Err(BargainingError::EmptyVoterSet);
        }
        Ok(())
    }

    fn value(&self, c: Choice) -> f64 {
        match c {
            Choice::Alpha => self.alpha,
            Choice::Beta => self.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindVoteOutcome {
    /// Chosen by majority of group B.
    pub x_a: f64,
    /// Chosen by majority of group A.
    pub y_b: f64,
    pub rho_xy: f64,
    pub rho_yx: f64,
    pub tie_a: bool,
    pub tie_b: bool,
}

/// Majority choice; a tie goes to `Alpha`. Returns the choice and whether
/// the vote was tied.
pub fn majority(votes: &[Choice]) -> (Choice, bool) {
    let betas = votes.iter().filter(|&&c| c == Choice::Beta).count();
    let alphas = votes.len() - betas;
    match betas.cmp(&alphas) {
        std::cmp::Ordering::Greater => (Choice::Beta, false),
        std::cmp::Ordering::Less => (Choice::Alpha, false),
        std::cmp::Ordering::Equal => (Choice::Alpha, true),
    }
}

pub fn run_blind_vote(spec: &BlindVoteSpec) -> Result<BlindVoteOutcome, BargainingError> {
    spec.validate()?;
    let (choice_a, tie_a) = majority(&spec.votes_a);
    let (choice_b, tie_b) = majority(&spec.votes_b);
    let y_b = spec.value(choice_a);
    let x_a = spec.value(choice_b);
    Ok(BlindVoteOutcome {
        x_a,
        y_b,
        rho_xy: y_b / x_a,
        rho_yx: x_a / y_b,
        tie_a,
        tie_b,
    })
}

/// Draws `n` independent fair votes.
pub fn random_votes<R: Rng>(n: usize, rng: &mut R) -> Vec<Choice> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                Choice::Beta
            } else {
                Choice::Alpha
            }
        })
        .collect()
}
