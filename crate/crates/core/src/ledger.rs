//! Ledgers, ledger sequences and denomination-based tokenisation.
//!
//! A [`Ledger`] maps opaque player labels to non-negative real balances. A
//! [`TokenSet`] is a list of denominations used to express those balances as
//! whole tokens; [`tokenise`] performs the greedy largest-first decomposition.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("balance of `{player}` is {balance}, balances must be finite and non-negative")]
    InvalidBalance { player: String, balance: f64 },
    #[error("duplicate player label `{0}`")]
    DuplicateLabel(String),
    #[error("round {found} out of order, expected {expected}")]
    RoundOutOfOrder { expected: u64, found: u64 },
    #[error("token set has no denominations")]
    EmptyTokenSet,
    #[error("invalid token set: {0}")]
    InvalidTokenSet(TokenSetViolation),
    #[error("cannot tokenise {0}, value must be finite and non-negative")]
    InvalidValue(f64),
}

/// A collection of (player, balance) pairs with unique labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    entries: BTreeMap<String, f64>,
}

impl Ledger {
    pub fn new<I, S>(entries: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (label, balance) in entries {
            let label = label.into();
            check_balance(&label, balance)?;
            if map.insert(label.clone(), balance).is_some() {
                return Err(LedgerError::DuplicateLabel(label));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn balance(&self, player: &str) -> Option<f64> {
        self.entries.get(player).copied()
    }

    /// Sets a balance, inserting the player if absent.
    pub fn set(&mut self, player: impl Into<String>, balance: f64) -> Result<(), LedgerError> {
        let player = player.into();
        check_balance(&player, balance)?;
        self.entries.insert(player, balance);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

fn check_balance(player: &str, balance: f64) -> Result<(), LedgerError> {
    if balance.is_finite() && balance >= 0.0 {
        Ok(())
    } else {
        Err(LedgerError::InvalidBalance {
            player: player.to_owned(),
            balance,
        })
    }
}

/// Ledgers indexed by round, starting at round 0 with strictly increasing
/// round numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LedgerSequence {
    snapshots: Vec<(u64, Ledger)>,
}

impl LedgerSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, round: u64, ledger: Ledger) -> Result<(), LedgerError> {
        match self.snapshots.last() {
            None if round != 0 => {
                return Err(LedgerError::RoundOutOfOrder {
                    expected: 0,
                    found: round,
                })
            }
            Some((last, _)) if round <= *last => {
                return Err(LedgerError::RoundOutOfOrder {
                    expected: last + 1,
                    found: round,
                })
            }
            _ => {}
        }
        self.snapshots.push((round, ledger));
        Ok(())
    }

    pub fn snapshots(&self) -> &[(u64, Ledger)] {
        &self.snapshots
    }

    pub fn last(&self) -> Option<&(u64, Ledger)> {
        self.snapshots.last()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Why a token set was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum TokenSetViolation {
    Empty,
    NonPositive {
        index: usize,
        value: f64,
    },
    NotAscending {
        index: usize,
    },
    /// The smallest denomination exceeds the granularity bound.
    Granularity {
        smallest: f64,
        epsilon: f64,
    },
    /// A ledger balance cannot be represented to within the smallest
    /// denomination.
    Residual {
        player: String,
        residual: f64,
    },
}

impl fmt::Display for TokenSetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "no denominations"),
            Self::NonPositive { index, value } => {
                write!(f, "denomination {index} is {value}, must be positive")
            }
            Self::NotAscending { index } => {
                write!(f, "denomination {index} is not strictly greater than its predecessor")
            }
            Self::Granularity { smallest, epsilon } => {
                write!(f, "smallest denomination {smallest} exceeds epsilon {epsilon}")
            }
            Self::Residual { player, residual } => {
                write!(f, "balance of `{player}` leaves residual {residual}")
            }
        }
    }
}

/// Ascending denominations `t_1 < ... < t_k` with a granularity bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    denominations: Vec<f64>,
    epsilon: f64,
}

impl TokenSet {
    /// Builds a token set, checking ordering, positivity and `t_1 <= epsilon`.
    pub fn new(denominations: Vec<f64>, epsilon: f64) -> Result<Self, LedgerError> {
        let set = Self::new_unchecked(denominations, epsilon);
        set.check_structure().map_err(LedgerError::InvalidTokenSet)?;
        Ok(set)
    }

    /// Builds a token set without validation; use [`validate_token_set`] to
    /// obtain a verdict.
    pub fn new_unchecked(denominations: Vec<f64>, epsilon: f64) -> Self {
        Self { denominations, epsilon }
    }

    pub fn denominations(&self) -> &[f64] {
        &self.denominations
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn smallest(&self) -> Option<f64> {
        self.denominations.first().copied()
    }

    fn check_structure(&self) -> Result<(), TokenSetViolation> {
        if self.denominations.is_empty() {
            return Err(TokenSetViolation::Empty);
        }
        for (index, &value) in self.denominations.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(TokenSetViolation::NonPositive { index, value });
            }
            if index > 0 && value <= self.denominations[index - 1] {
                return Err(TokenSetViolation::NotAscending { index });
            }
        }
        let smallest = self.denominations[0];
        if smallest > self.epsilon {
            return Err(TokenSetViolation::Granularity {
                smallest,
                epsilon: self.epsilon,
            });
        }
        Ok(())
    }
}

/// Result of tokenising one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenisation {
    /// `(denomination, count)` pairs with non-zero counts, largest first.
    pub tokens: Vec<(f64, u64)>,
    /// `value - sum(count * denomination)`, never negative.
    pub residual: f64,
}

impl Tokenisation {
    pub fn represented(&self) -> f64 {
        self.tokens.iter().map(|&(t, m)| t * m as f64).sum()
    }

    pub fn count_of(&self, denomination: f64) -> u64 {
        self.tokens
            .iter()
            .find(|(t, _)| *t == denomination)
            .map_or(0, |&(_, m)| m)
    }
}

// Slack for floating-point division when a value is an exact multiple of a
// denomination (0.3 / 0.1 = 2.9999999999999996).
const QUOTIENT_SLACK: f64 = 1e-9;

/// Greedy largest-denomination-first decomposition that never overshoots.
pub fn tokenise(value: f64, token_set: &TokenSet) -> Result<Tokenisation, LedgerError> {
    if token_set.denominations.is_empty() {
        return Err(LedgerError::EmptyTokenSet);
    }
    if !(value.is_finite() && value >= 0.0) {
        return Err(LedgerError::InvalidValue(value));
    }
    let mut remaining = value;
    let mut tokens = Vec::new();
    for &t in token_set.denominations.iter().rev() {
        if remaining <= 0.0 {
            break;
        }
        let mut count = (remaining / t + QUOTIENT_SLACK).floor();
        // Never pay more than what is left beyond rounding noise.
        if count * t > remaining + QUOTIENT_SLACK * t {
            count -= 1.0;
        }
        if count >= 1.0 {
            remaining = (remaining - count * t).max(0.0);
            tokens.push((t, count as u64));
        }
    }
    Ok(Tokenisation {
        tokens,
        residual: remaining,
    })
}

/// Checks the token set's structure and that every balance of `ledger`
/// tokenises to within the smallest denomination. Returns the first violation.
pub fn validate_token_set(token_set: &TokenSet, ledger: &Ledger) -> Result<(), TokenSetViolation> {
    token_set.check_structure()?;
    let smallest = token_set.denominations[0];
    for (player, balance) in ledger.iter() {
        // Structure was checked above, so tokenise cannot fail on the set.
        let t = tokenise(balance, token_set).map_err(|_| TokenSetViolation::Empty)?;
        if (balance - t.represented()).abs() > smallest {
            return Err(TokenSetViolation::Residual {
                player: player.to_owned(),
                residual: t.residual,
            });
        }
    }
    Ok(())
}
