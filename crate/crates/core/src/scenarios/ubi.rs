//! Two-player UBI game: a treasury `A` issues `f = delta * omega` tokens per
//! round to the rest of the system `B`, and `B` returns a fraction
//! `epsilon` of its balance to the treasury.

use crate::engine::{EngineError, LayerState, RoundInput, RoundProvider, TransferMatrix};

use super::ScenarioError;

pub const TREASURY: &str = "A";
pub const SYSTEM: &str = "B";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UbiSpec {
    pub omega: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl UbiSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(ScenarioError::InvalidUbi(format!(
                "omega = {} must be positive",
                self.omega
            )));
        }
        for (name, v) in [("delta", self.delta), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScenarioError::InvalidUbi(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Tokens issued per round.
    pub fn issuance(&self) -> f64 {
        self.delta * self.omega
    }
}

/// Transfer matrix for round `j` given the treasury balance `x_a`.
pub fn ubi_matrix(j: u64, x_a: f64, spec: &UbiSpec) -> Result<TransferMatrix, ScenarioError> {
    spec.validate()?;
    let f = spec.issuance();
    let e = spec.epsilon;
    let mut triplets = Vec::with_capacity(4);
    if f == 0.0 {
        triplets.push((0, 0, 1.0));
    } else {
        // Allow the treasury to issue its last tokens despite rounding.
        if f > x_a * (1.0 + 1e-12) {
            return Err(ScenarioError::TreasuryDepleted {
                round: j,
                needed: f,
                available: x_a,
            });
        }
        let issued = (f / x_a).min(1.0);
        if issued < 1.0 {
            triplets.push((0, 0, 1.0 - issued));
        }
        triplets.push((1, 0, issued));
    }
    if e > 0.0 {
        triplets.push((0, 1, e));
    }
    if e < 1.0 {
        triplets.push((1, 1, 1.0 - e));
    }
    Ok(TransferMatrix::from_triplets(2, triplets)?)
}

/// Treasury holds `omega`, the system holds nothing.
pub fn ubi_initial_state(spec: &UbiSpec) -> Result<LayerState, ScenarioError> {
    spec.validate()?;
    Ok(LayerState::new("ubi", [(TREASURY, spec.omega), (SYSTEM, 0.0)])?)
}

/// Round provider that rebuilds the matrix from the current treasury balance.
pub fn ubi_provider(spec: UbiSpec) -> impl RoundProvider {
    move |round: u64, state: &LayerState| -> Result<RoundInput, EngineError> {
        let x_a = state.balances()[0];
        ubi_matrix(round, x_a, &spec)
            .map(RoundInput::closed)
            .map_err(|e| match e {
                ScenarioError::Engine(inner) => inner,
                other => EngineError::Provider(other.to_string()),
            })
    }
}

/// Closed-form balances `(x_a, x_b)` at round `j`, starting from
/// `(omega, 0)`. For `epsilon = 0` the system balance is `j * f`.
pub fn ubi_closed_form(j: u64, spec: &UbiSpec) -> (f64, f64) {
    let f = spec.issuance();
    let e = spec.epsilon;
    let accumulated = if e == 0.0 {
        j as f64
    } else {
        // (1 - (1 - e)^j) / e, computed without cancellation for small e.
        -(j as f64 * (-e).ln_1p()).exp_m1() / e
    };
    let x_b = f * accumulated;
    (spec.omega - x_b, x_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, validate_transfer_matrix};

    const SPEC: UbiSpec = UbiSpec {
        omega: 100.0,
        delta: 0.1,
        epsilon: 0.5,
    };

    #[test]
    fn matrix_example() {
        let w = ubi_matrix(0, 100.0, &SPEC).unwrap();
        assert_eq!(validate_transfer_matrix(&w), Ok(()));
        assert!((w.get(0, 0) - 0.9).abs() < 1e-15);
        assert!((w.get(1, 0) - 0.1).abs() < 1e-15);
        assert_eq!((w.get(0, 1), w.get(1, 1)), (0.5, 0.5));
    }

    #[test]
    fn matrix_without_issuance() {
        let w = ubi_matrix(3, 42.0, &UbiSpec { delta: 0.0, ..SPEC }).unwrap();
        assert_eq!((w.get(0, 0), w.get(1, 0)), (1.0, 0.0));
    }

    #[test]
    fn matrix_depleted() {
        assert!(matches!(
            ubi_matrix(7, 5.0, &SPEC),
            Err(ScenarioError::TreasuryDepleted { round: 7, .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let (a, b) = ubi_closed_form(2, &SPEC);
        assert!((a - 85.0).abs() < 1e-12 && (b - 15.0).abs() < 1e-12);
        assert_eq!(ubi_closed_form(0, &SPEC), (100.0, 0.0));
        let (_, b) = ubi_closed_form(200, &SPEC);
        assert!((b - 20.0).abs() < 1e-12);
        let (a, b) = ubi_closed_form(4, &UbiSpec { epsilon: 0.0, ..SPEC });
        assert_eq!((a, b), (60.0, 40.0));
    }

    #[test]
    fn iteration_matches_closed_form() {
        let mut provider = ubi_provider(SPEC);
        let r = run(ubi_initial_state(&SPEC).unwrap(), &mut provider, 2).unwrap();
        assert_eq!(r.last().balances(), &[85.0, 15.0]);
        let mut provider = ubi_provider(SPEC);
        let r = run(ubi_initial_state(&SPEC).unwrap(), &mut provider, 300).unwrap();
        for (j, s) in r.states.iter().enumerate() {
            let (a, b) = ubi_closed_form(j as u64, &SPEC);
            assert!((s.balances()[0] - a).abs() < 1e-9);
            assert!((s.balances()[1] - b).abs() < 1e-9);
        }
    }

    #[test]
    fn provider_reports_depletion() {
        let spec = UbiSpec {
            omega: 10.0,
            delta: 1.0,
            epsilon: 0.1,
        };
        let mut provider = ubi_provider(spec);
        let err = run(ubi_initial_state(&spec).unwrap(), &mut provider, 5).unwrap_err();
        assert!(matches!(err, EngineError::AtRound { round: 1, .. }));
    }

    #[test]
    fn invalid_parameters() {
        assert!(UbiSpec { epsilon: 1.5, ..SPEC }.validate().is_err());
        assert!(UbiSpec { omega: 0.0, ..SPEC }.validate().is_err());
    }
}
