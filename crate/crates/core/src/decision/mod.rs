//! Meta-level control over finite spaces.
//!
//! A [`ControlProblem`] holds the world states, the primary decisions, a
//! prior over states, a utility table and a set of candidate reasoning
//! methods. Each method is a noisy sensor: a [`Channel`] from states (or
//! from the optimal decision) to output signals, plus a cost distribution
//! that depends on the method alone.
//!
//! The evaluation routines in [`evaluate`] compute, for a method `m`,
//!
//! ```text
//! EU(m) = sum_s Pr(s|m) * max_d sum_x sum_c U(x, d, c) Pr(x|s,m) Pr(c|m)
//! ```
//!
//! and pick the method with the highest value. All sums are exact finite
//! sums; there is no sampling anywhere in this module.

mod channel;
mod distribution;
pub mod evaluate;
mod problem;
mod regret;

pub use channel::Channel;
pub use distribution::{CostDistribution, Distribution};
pub use evaluate::{
    bayes_update, clairvoyant_expected_utility, expected_utility_of_method,
    optimal_primary_decision, preposterior, prior_decision, rank_by_expected_utility,
    select_method, value_of_information, MethodSelection, PolicyEntry, SolutionReport,
};
pub use problem::{ControlProblem, CostCombiner, MethodKind, MethodModel, UtilityModel};
pub use regret::{regret_table, RegretTable};

/// Outcome, signal, decision and method identifiers.
pub type Label = String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("all weights are zero; nothing to normalize")]
    AllZero,
    #[error("weight at position {index} is negative")]
    NegativeWeight { index: usize },
    #[error("{what} contains a non-finite value")]
    NonFinite { what: String },
    #[error("{what} sums to {sum}, expected 1")]
    NotNormalized { what: String, sum: f64 },
    #[error("duplicate outcome label `{0}`")]
    DuplicateOutcome(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{0} must not be empty")]
    Empty(String),
    #[error("signal `{0}` is not in the channel's signal space")]
    UnknownSignal(String),
    #[error("signal `{0}` has zero probability under the prior")]
    ImpossibleSignal(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("{what} = {value} is not a probability")]
    InvalidProbability { what: String, value: f64 },
    #[error("method `{method}` has negative cost outcome {cost}")]
    NegativeCost { method: String, cost: f64 },
    #[error("cost combiner rate must be positive")]
    InvalidCombiner,
    #[error("label `{0}` does not carry a numeric value")]
    NonNumericLabel(String),
}

pub type Result<T> = std::result::Result<T, DecisionError>;
