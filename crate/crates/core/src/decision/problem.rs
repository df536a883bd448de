use super::{Channel, CostDistribution, DecisionError, Distribution, Label, Result};
use crate::scalar::{definitely_greater, Scalar};

/// How a method's cost is folded into the primary utility.
///
/// Both variants are strictly decreasing in the cost.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CostCombiner<T> {
    /// `U_p(x, d) - c`
    #[default]
    Subtract,
    /// `U_p(x, d) - rate * c`, `rate > 0`
    Scaled(T),
}

impl<T: Scalar> CostCombiner<T> {
    pub fn combine(&self, primary: &T, cost: &T) -> T {
        match self {
            CostCombiner::Subtract => primary.clone() - cost.clone(),
            CostCombiner::Scaled(rate) => primary.clone() - rate.clone() * cost.clone(),
        }
    }
}

/// Dense primary utility table `U_p(x, d)` plus the cost combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityModel<T> {
    states: Vec<Label>,
    decisions: Vec<Label>,
    primary: Vec<Vec<T>>,
    combiner: CostCombiner<T>,
}

impl<T: Scalar> UtilityModel<T> {
    /// `primary[x][d]`, one row per state in declared order.
    pub fn new(
        states: Vec<Label>,
        decisions: Vec<Label>,
        primary: Vec<Vec<T>>,
        combiner: CostCombiner<T>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(DecisionError::Empty("states".into()));
        }
        if decisions.is_empty() {
            return Err(DecisionError::Empty("decisions".into()));
        }
        if primary.len() != states.len() {
            return Err(DecisionError::LengthMismatch {
                what: "utility rows".into(),
                expected: states.len(),
                found: primary.len(),
            });
        }
        for (x, row) in states.iter().zip(&primary) {
            if row.len() != decisions.len() {
                return Err(DecisionError::LengthMismatch {
                    what: format!("utility row `{x}`"),
                    expected: decisions.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|u| !u.is_finite_value()) {
                return Err(DecisionError::NonFinite {
                    what: format!("utility row `{x}`"),
                });
            }
        }
        if let CostCombiner::Scaled(rate) = &combiner {
            if !(rate.is_finite_value() && *rate > T::zero()) {
                return Err(DecisionError::InvalidCombiner);
            }
        }
        Ok(Self {
            states,
            decisions,
            primary,
            combiner,
        })
    }

    pub fn states(&self) -> &[Label] {
        &self.states
    }

    pub fn decisions(&self) -> &[Label] {
        &self.decisions
    }

    pub fn table(&self) -> &[Vec<T>] {
        &self.primary
    }

    pub fn combiner(&self) -> &CostCombiner<T> {
        &self.combiner
    }

    pub fn primary(&self, state: usize, decision: usize) -> &T {
        &self.primary[state][decision]
    }

    /// `U(x, d, c)`.
    pub fn utility(&self, state: usize, decision: usize, cost: &T) -> T {
        self.combiner.combine(&self.primary[state][decision], cost)
    }

    /// Index of the decision maximizing `U_p(x, .)`; earliest wins ties.
    pub fn best_decision(&self, state: usize) -> usize {
        let row = &self.primary[state];
        let mut best = 0;
        for d in 1..row.len() {
            if definitely_greater(&row[d], &row[best]) {
                best = d;
            }
        }
        best
    }

    /// `E_c[U(x, d, c)]` for every cell.
    pub fn cost_adjusted(&self, cost: &CostDistribution<T>) -> Vec<Vec<T>> {
        (0..self.states.len())
            .map(|x| {
                (0..self.decisions.len())
                    .map(|d| cost.expect(|c| self.utility(x, d, c)))
                    .collect()
            })
            .collect()
    }

    /// Applies `a * U_p + b` to every cell; costs are scaled by `a` through
    /// the combiner so `U(x, d, c)` transforms the same way.
    pub fn affine(&self, a: T, b: T) -> Self {
        let primary = self
            .primary
            .iter()
            .map(|row| {
                row.iter()
                    .map(|u| a.clone() * u.clone() + b.clone())
                    .collect()
            })
            .collect();
        let combiner = match &self.combiner {
            CostCombiner::Subtract => CostCombiner::Scaled(a),
            CostCombiner::Scaled(r) => CostCombiner::Scaled(a * r.clone()),
        };
        Self {
            states: self.states.clone(),
            decisions: self.decisions.clone(),
            primary,
            combiner,
        }
    }
}

/// Whether a method's output estimates the world state or recommends a
/// decision directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    /// Channel conditioned on the state `x`.
    StateEstimation,
    /// Channel conditioned on the optimal decision `d*`.
    Recommendation,
}

/// A candidate reasoning method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodModel<T> {
    pub id: Label,
    pub kind: MethodKind,
    pub channel: Channel<T>,
    pub cost: CostDistribution<T>,
}

impl<T: Scalar> MethodModel<T> {
    pub fn new(
        id: impl Into<Label>,
        kind: MethodKind,
        channel: Channel<T>,
        cost: CostDistribution<T>,
    ) -> Result<Self> {
        let id = id.into();
        for c in cost.outcomes() {
            if !c.is_finite_value() {
                return Err(DecisionError::NonFinite {
                    what: format!("cost of `{id}`"),
                });
            }
            if *c < T::zero() {
                return Err(DecisionError::NegativeCost {
                    method: id,
                    cost: c.as_f64(),
                });
            }
        }
        Ok(Self {
            id,
            kind,
            channel,
            cost,
        })
    }

    /// Uninformative, free method: acting on the prior.
    pub fn null(id: impl Into<Label>, states: Vec<Label>) -> Result<Self> {
        let channel = Channel::uniform(states, vec!["none".to_string()])?;
        Self::new(
            id,
            MethodKind::StateEstimation,
            channel,
            Distribution::point(T::zero()),
        )
    }

    pub fn expected_cost(&self) -> T {
        self.cost.mean()
    }

    pub fn with_cost(&self, cost: CostDistribution<T>) -> Self {
        Self {
            cost,
            ..self.clone()
        }
    }
}

/// The meta-level decision problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem<T> {
    context: Label,
    prior: Distribution<T>,
    utility: UtilityModel<T>,
    methods: Vec<MethodModel<T>>,
}

impl<T: Scalar> ControlProblem<T> {
    pub fn new(
        context: impl Into<Label>,
        prior: Distribution<T>,
        utility: UtilityModel<T>,
        methods: Vec<MethodModel<T>>,
    ) -> Result<Self> {
        if prior.outcomes() != utility.states() {
            return Err(DecisionError::SpaceMismatch(
                "prior outcomes differ from utility states".into(),
            ));
        }
        if methods.is_empty() {
            return Err(DecisionError::Empty("methods".into()));
        }
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].iter().any(|o| o.id == m.id) {
                return Err(DecisionError::DuplicateOutcome(m.id.clone()));
            }
            let expected = match m.kind {
                MethodKind::StateEstimation => utility.states(),
                MethodKind::Recommendation => utility.decisions(),
            };
            if m.channel.inputs() != expected {
                return Err(DecisionError::SpaceMismatch(format!(
                    "method `{}` channel inputs do not match its kind",
                    m.id
                )));
            }
        }
        Ok(Self {
            context: context.into(),
            prior,
            utility,
            methods,
        })
    }

    pub fn context(&self) -> &str {
        &self.context
    }

    pub fn states(&self) -> &[Label] {
        self.utility.states()
    }

    pub fn decisions(&self) -> &[Label] {
        self.utility.decisions()
    }

    pub fn prior(&self) -> &Distribution<T> {
        &self.prior
    }

    pub fn utility(&self) -> &UtilityModel<T> {
        &self.utility
    }

    pub fn methods(&self) -> &[MethodModel<T>] {
        &self.methods
    }

    pub fn method(&self, id: &str) -> Result<&MethodModel<T>> {
        self.methods
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| DecisionError::UnknownMethod(id.to_string()))
    }

    /// The method's channel expressed over world states. Recommendation
    /// channels are composed with the per-state optimal decision.
    pub fn state_channel(&self, method: &MethodModel<T>) -> Result<Channel<T>> {
        match method.kind {
            MethodKind::StateEstimation => Ok(method.channel.clone()),
            MethodKind::Recommendation => {
                let via: Vec<usize> = (0..self.states().len())
                    .map(|x| self.utility.best_decision(x))
                    .collect();
                method.channel.pull_back(self.states().to_vec(), &via)
            }
        }
    }

    pub fn with_methods(&self, methods: Vec<MethodModel<T>>) -> Result<Self> {
        Self::new(
            self.context.clone(),
            self.prior.clone(),
            self.utility.clone(),
            methods,
        )
    }

    pub fn with_utility(&self, utility: UtilityModel<T>) -> Result<Self> {
        Self::new(
            self.context.clone(),
            self.prior.clone(),
            utility,
            self.methods.clone(),
        )
    }
}
