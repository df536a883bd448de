use super::distribution::check_masses;
use super::{DecisionError, Label, Result};
use crate::scalar::Scalar;

/// Conditional distribution `Pr(signal | input)` as a row-stochastic table.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    inputs: Vec<Label>,
    signals: Vec<Label>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> Channel<T> {
    pub fn new(inputs: Vec<Label>, signals: Vec<Label>, rows: Vec<Vec<T>>) -> Result<Self> {
        check_labels("channel inputs", &inputs)?;
        check_labels("channel signals", &signals)?;
        if rows.len() != inputs.len() {
            return Err(DecisionError::LengthMismatch {
                what: "channel rows".into(),
                expected: inputs.len(),
                found: rows.len(),
            });
        }
        for (input, row) in inputs.iter().zip(&rows) {
            if row.len() != signals.len() {
                return Err(DecisionError::LengthMismatch {
                    what: format!("channel row `{input}`"),
                    expected: signals.len(),
                    found: row.len(),
                });
            }
            check_masses(&format!("channel row `{input}`"), row)?;
        }
        Ok(Self {
            inputs,
            signals,
            rows,
        })
    }

    /// Perfect channel: the signal names the input.
    pub fn identity(labels: Vec<Label>) -> Result<Self> {
        let n = labels.len();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { T::one() } else { T::zero() })
                    .collect()
            })
            .collect();
        Self::new(labels.clone(), labels, rows)
    }

    /// Every row uniform over the signals; carries no information.
    pub fn uniform(inputs: Vec<Label>, signals: Vec<Label>) -> Result<Self> {
        if signals.is_empty() {
            return Err(DecisionError::Empty("channel signals".into()));
        }
        let p = T::one() / T::from_count(signals.len());
        let rows = vec![vec![p; signals.len()]; inputs.len()];
        Self::new(inputs, signals, rows)
    }

    /// Every row puts all mass on `signal`.
    pub fn constant(inputs: Vec<Label>, signals: Vec<Label>, signal: &str) -> Result<Self> {
        let k = signals
            .iter()
            .position(|s| s == signal)
            .ok_or_else(|| DecisionError::UnknownSignal(signal.to_string()))?;
        let row: Vec<T> = (0..signals.len())
            .map(|j| if j == k { T::one() } else { T::zero() })
            .collect();
        let rows = vec![row; inputs.len()];
        Self::new(inputs, signals, rows)
    }

    pub fn inputs(&self) -> &[Label] {
        &self.inputs
    }

    pub fn signals(&self) -> &[Label] {
        &self.signals
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn row(&self, input: usize) -> &[T] {
        &self.rows[input]
    }

    pub fn likelihood(&self, input: usize, signal: usize) -> &T {
        &self.rows[input][signal]
    }

    pub fn signal_index(&self, signal: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == signal)
    }

    pub fn input_index(&self, input: &str) -> Option<usize> {
        self.inputs.iter().position(|s| s == input)
    }

    /// Builds a channel over `new_inputs` whose row `j` is this channel's
    /// row `via[j]`. Used to push a decision-conditioned channel through
    /// the state-to-optimal-decision map.
    pub fn pull_back(&self, new_inputs: Vec<Label>, via: &[usize]) -> Result<Self> {
        if via.len() != new_inputs.len() {
            return Err(DecisionError::LengthMismatch {
                what: "pull-back map".into(),
                expected: new_inputs.len(),
                found: via.len(),
            });
        }
        let rows = via
            .iter()
            .map(|&i| {
                self.rows.get(i).cloned().ok_or_else(|| {
                    DecisionError::SpaceMismatch(format!("no channel input at index {i}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(new_inputs, self.signals.clone(), rows)
    }
}

fn check_labels(what: &str, labels: &[Label]) -> Result<()> {
    if labels.is_empty() {
        return Err(DecisionError::Empty(what.into()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(DecisionError::DuplicateOutcome(l.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<Label> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = Channel::new(
            labels(&["x1", "x2"]),
            labels(&["s1", "s2"]),
            vec![vec![0.8, 0.2], vec![0.3, 0.8]],
        )
        .unwrap_err();
        assert!(matches!(err, DecisionError::NotNormalized { .. }));
        let err =
            Channel::new(labels(&["x1"]), labels(&["s1", "s2"]), vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, DecisionError::LengthMismatch { .. }));
    }

    #[test]
    fn constructors() {
        let id: Channel<f64> = Channel::identity(labels(&["a", "b"])).unwrap();
        assert_eq!(id.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let u: Channel<f64> =
            Channel::uniform(labels(&["a", "b"]), labels(&["s", "t", "u", "v"])).unwrap();
        assert!(u.rows().iter().flatten().all(|&p| p == 0.25));
        let c: Channel<f64> =
            Channel::constant(labels(&["a", "b"]), labels(&["s0", "s1"]), "s0").unwrap();
        assert_eq!(c.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn pull_back_copies_rows() {
        let ch = Channel::new(
            labels(&["d1", "d2"]),
            labels(&["d1", "d2"]),
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap();
        let pulled = ch
            .pull_back(labels(&["x1", "x2", "x3"]), &[1, 0, 1])
            .unwrap();
        assert_eq!(pulled.row(0), &[0.1, 0.9]);
        assert_eq!(pulled.row(1), &[0.9, 0.1]);
        assert_eq!(pulled.inputs()[2], "x3");
    }
}
