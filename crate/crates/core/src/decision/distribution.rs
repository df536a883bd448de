use std::fmt::Debug;

use super::{DecisionError, Label, Result};
use crate::scalar::{sum, Scalar};

/// A finite probability mass function over labelled outcomes.
///
/// Iteration order is the declared order of `outcomes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T, O = Label> {
    outcomes: Vec<O>,
    mass: Vec<T>,
}

/// Distribution over numeric cost values, in utility units.
pub type CostDistribution<T> = Distribution<T, T>;

impl<T: Scalar, O: Clone + PartialEq + Debug> Distribution<T, O> {
    /// Validates masses as given; they must already sum to one.
    pub fn new(outcomes: Vec<O>, mass: Vec<T>) -> Result<Self> {
        check_outcomes(&outcomes)?;
        if mass.len() != outcomes.len() {
            return Err(DecisionError::LengthMismatch {
                what: "distribution masses".into(),
                expected: outcomes.len(),
                found: mass.len(),
            });
        }
        check_masses("distribution", &mass)?;
        Ok(Self { outcomes, mass })
    }

    /// Scales nonnegative weights so they sum to one.
    pub fn from_weights(outcomes: Vec<O>, weights: Vec<T>) -> Result<Self> {
        check_outcomes(&outcomes)?;
        if weights.len() != outcomes.len() {
            return Err(DecisionError::LengthMismatch {
                what: "weights".into(),
                expected: outcomes.len(),
                found: weights.len(),
            });
        }
        let mass = normalize(&weights)?;
        Ok(Self { outcomes, mass })
    }

    pub fn uniform(outcomes: Vec<O>) -> Result<Self> {
        let n = outcomes.len();
        Self::from_weights(outcomes, vec![T::one(); n])
    }

    pub fn point(outcome: O) -> Self {
        Self {
            outcomes: vec![outcome],
            mass: vec![T::one()],
        }
    }

    pub fn outcomes(&self) -> &[O] {
        &self.outcomes
    }

    pub fn masses(&self) -> &[T] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn index_of(&self, outcome: &O) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    pub fn mass_of(&self, outcome: &O) -> Option<&T> {
        self.index_of(outcome).map(|i| &self.mass[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&O, &T)> {
        self.outcomes.iter().zip(self.mass.iter())
    }

    /// `sum_o mass(o) * f(o)`.
    pub fn expect(&self, mut f: impl FnMut(&O) -> T) -> T {
        sum(self.iter().map(|(o, m)| m.clone() * f(o)))
    }

    pub fn total(&self) -> T {
        sum(self.mass.iter().cloned())
    }
}

impl<T: Scalar> Distribution<T, T> {
    pub fn mean(&self) -> T {
        self.expect(|v| v.clone())
    }
}

/// Rescales `weights` to sum to one.
pub fn normalize<T: Scalar>(weights: &[T]) -> Result<Vec<T>> {
    for (index, w) in weights.iter().enumerate() {
        if !w.is_finite_value() {
            return Err(DecisionError::NonFinite {
                what: "weights".into(),
            });
        }
        if *w < T::zero() {
            return Err(DecisionError::NegativeWeight { index });
        }
    }
    let total = sum(weights.iter().cloned());
    if total <= T::zero() {
        return Err(DecisionError::AllZero);
    }
    Ok(weights.iter().map(|w| w.clone() / total.clone()).collect())
}

fn check_outcomes<O: PartialEq + Debug>(outcomes: &[O]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(DecisionError::Empty("distribution outcomes".into()));
    }
    for (i, o) in outcomes.iter().enumerate() {
        if outcomes[..i].contains(o) {
            return Err(DecisionError::DuplicateOutcome(format!("{o:?}")));
        }
    }
    Ok(())
}

pub(crate) fn check_masses<T: Scalar>(what: &str, mass: &[T]) -> Result<()> {
    for (index, m) in mass.iter().enumerate() {
        if !m.is_finite_value() {
            return Err(DecisionError::NonFinite { what: what.into() });
        }
        if *m < T::zero() || *m > T::one() {
            return Err(DecisionError::InvalidProbability {
                what: format!("{what} mass[{index}]"),
                value: m.as_f64(),
            });
        }
    }
    let total = sum(mass.iter().cloned());
    if (total.clone() - T::one()).abs_value() > T::mass_tolerance() {
        return Err(DecisionError::NotNormalized {
            what: what.into(),
            sum: total.as_f64(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn labels(names: &[&str]) -> Vec<Label> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalize_symmetric_weights() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_matches_hand_arithmetic() {
        // 0.48 / 0.56 = 6/7 and 0.08 / 0.56 = 1/7
        let got: Vec<f64> = normalize(&[0.48, 0.08]).unwrap();
        assert!((got[0] - 6.0 / 7.0).abs() < 1e-12);
        assert!((got[1] - 1.0 / 7.0).abs() < 1e-12);
        let exact = normalize(&[Rational64::new(12, 25), Rational64::new(2, 25)]).unwrap();
        assert_eq!(exact, vec![Rational64::new(6, 7), Rational64::new(1, 7)]);
    }

    #[test]
    fn normalize_rejects_degenerate_input() {
        assert_eq!(normalize(&[0.0, 0.0]), Err(DecisionError::AllZero));
        assert_eq!(
            normalize(&[1.0, -0.5]),
            Err(DecisionError::NegativeWeight { index: 1 })
        );
        assert!(matches!(
            normalize(&[f64::NAN, 1.0]),
            Err(DecisionError::NonFinite { .. })
        ));
    }

    #[test]
    fn new_checks_sum_and_labels() {
        let err = Distribution::new(labels(&["a", "b"]), vec![0.5, 0.4]).unwrap_err();
        assert!(matches!(err, DecisionError::NotNormalized { .. }));
        let err = Distribution::new(labels(&["a", "a"]), vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, DecisionError::DuplicateOutcome(_)));
        let d = Distribution::new(labels(&["a", "b"]), vec![0.25, 0.75]).unwrap();
        assert_eq!(d.mass_of(&"b".to_string()), Some(&0.75));
        assert_eq!(d.outcomes(), labels(&["a", "b"]).as_slice());
    }

    #[test]
    fn cost_mean() {
        let c: CostDistribution<f64> = Distribution::new(vec![0.0, 10.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(c.mean(), 5.0);
    }
}
