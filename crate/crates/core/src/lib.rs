//! Decision-theoretic control of problem solving.
//!
//! - [`decision`]: expected utility of reasoning methods over finite
//!   spaces, value of information, regret tables.
//! - [`methods`]: channel families for recommendation methods and for
//!   methods whose quality depends on available time and processors.
//! - [`pathplan`]: the route-planning method selection sweep.
//! - [`scheduler`]: a logically clocked blackboard runtime with aged
//!   priorities, conflict resolution and critical-event preemption.
//! - [`scenario`]: the JSON scenario format and trace files.
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix
//! the common choices.

pub mod decision;
pub mod methods;
pub mod pathplan;
pub mod scalar;
pub mod scenario;
pub mod scheduler;

pub use scalar::Scalar;

/// Arbitrary-precision rational, used for exact checks.
pub type Exact = num_rational::BigRational;

pub type Distribution64 = decision::Distribution<f64>;
pub type Channel64 = decision::Channel<f64>;
pub type ControlProblem64 = decision::ControlProblem<f64>;
pub type MethodModel64 = decision::MethodModel<f64>;
pub type SolutionReport64 = decision::SolutionReport<f64>;
pub type ExactControlProblem = decision::ControlProblem<Exact>;
