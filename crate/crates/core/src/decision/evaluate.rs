//! Bayesian updating, preposterior analysis and method selection.

use super::{
    Channel, ControlProblem, CostDistribution, DecisionError, Distribution, Label, MethodModel,
    Result,
};
use crate::scalar::{approx_eq, definitely_greater, sum, Scalar};

/// Decision chosen for one possible method output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry<T> {
    pub signal: Label,
    pub decision: Label,
    /// `Pr(s | m)`
    pub preposterior: T,
    /// `max_d E_xc[U | d, m, s]`
    pub expected_utility: T,
}

/// Result of evaluating one method against a control problem.
///
/// `policy` lists only signals with positive preposterior mass, in the
/// channel's signal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport<T> {
    pub method_id: Label,
    pub expected_utility: T,
    pub expected_cost: T,
    pub policy: Vec<PolicyEntry<T>>,
}

impl<T> SolutionReport<T> {
    pub fn decision_for(&self, signal: &str) -> Option<&str> {
        self.policy
            .iter()
            .find(|e| e.signal == signal)
            .map(|e| e.decision.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSelection<T> {
    pub selected: Label,
    /// One report per method, in declaration order.
    pub reports: Vec<SolutionReport<T>>,
    /// Report indices, best first.
    pub ranking: Vec<usize>,
}

impl<T: Scalar> MethodSelection<T> {
    pub fn selected_report(&self) -> &SolutionReport<T> {
        &self.reports[self.ranking[0]]
    }

    /// Methods other than the winner whose expected utility ties it.
    pub fn tied_with_selected(&self) -> Vec<&SolutionReport<T>> {
        let best = self.selected_report();
        self.ranking[1..]
            .iter()
            .map(|&i| &self.reports[i])
            .filter(|r| approx_eq(&r.expected_utility, &best.expected_utility))
            .collect()
    }
}

/// Posterior over the channel inputs after observing `observed`.
pub fn bayes_update<T: Scalar>(
    prior: &Distribution<T>,
    channel: &Channel<T>,
    observed: &str,
) -> Result<Distribution<T>> {
    check_spaces(prior, channel)?;
    let s = channel
        .signal_index(observed)
        .ok_or_else(|| DecisionError::UnknownSignal(observed.to_string()))?;
    let joint: Vec<T> = prior
        .masses()
        .iter()
        .enumerate()
        .map(|(x, p)| p.clone() * channel.likelihood(x, s).clone())
        .collect();
    Distribution::from_weights(prior.outcomes().to_vec(), joint).map_err(|e| match e {
        DecisionError::AllZero => DecisionError::ImpossibleSignal(observed.to_string()),
        other => other,
    })
}

/// Marginal distribution of the channel's output before it is observed.
pub fn preposterior<T: Scalar>(
    prior: &Distribution<T>,
    channel: &Channel<T>,
) -> Result<Distribution<T>> {
    check_spaces(prior, channel)?;
    let mass: Vec<T> = (0..channel.signals().len())
        .map(|s| {
            sum(prior
                .masses()
                .iter()
                .enumerate()
                .map(|(x, p)| p.clone() * channel.likelihood(x, s).clone()))
        })
        .collect();
    Distribution::from_weights(channel.signals().to_vec(), mass)
}

/// `d*(m, s)` and its expected utility.
pub fn optimal_primary_decision<T: Scalar>(
    problem: &ControlProblem<T>,
    method_id: &str,
    observed: &str,
) -> Result<(Label, T)> {
    let method = problem.method(method_id)?;
    let channel = problem.state_channel(method)?;
    let posterior = bayes_update(problem.prior(), &channel, observed)?;
    let table = problem.utility().cost_adjusted(&method.cost);
    let (d, eu) = best_response(posterior.masses(), &table);
    Ok((problem.decisions()[d].clone(), eu))
}

/// Preposterior expected utility of running `method_id` and acting on
/// its output.
pub fn expected_utility_of_method<T: Scalar>(
    problem: &ControlProblem<T>,
    method_id: &str,
) -> Result<SolutionReport<T>> {
    let method = problem.method(method_id)?;
    evaluate_method(problem, method)
}

fn evaluate_method<T: Scalar>(
    problem: &ControlProblem<T>,
    method: &MethodModel<T>,
) -> Result<SolutionReport<T>> {
    let channel = problem.state_channel(method)?;
    let table = problem.utility().cost_adjusted(&method.cost);
    evaluate_channel(
        problem,
        &method.id,
        &channel,
        &table,
        method.expected_cost(),
    )
}

fn evaluate_channel<T: Scalar>(
    problem: &ControlProblem<T>,
    method_id: &str,
    channel: &Channel<T>,
    table: &[Vec<T>],
    expected_cost: T,
) -> Result<SolutionReport<T>> {
    let pre = preposterior(problem.prior(), channel)?;
    let mut policy = Vec::new();
    for (signal, mass) in pre.iter() {
        if *mass <= T::zero() {
            continue;
        }
        let posterior = bayes_update(problem.prior(), channel, signal)?;
        let (d, eu) = best_response(posterior.masses(), table);
        policy.push(PolicyEntry {
            signal: signal.clone(),
            decision: problem.decisions()[d].clone(),
            preposterior: mass.clone(),
            expected_utility: eu,
        });
    }
    let expected_utility = sum(policy
        .iter()
        .map(|e| e.preposterior.clone() * e.expected_utility.clone()));
    Ok(SolutionReport {
        method_id: method_id.to_string(),
        expected_utility,
        expected_cost,
        policy,
    })
}

/// Evaluates every method and picks the best one.
///
/// Ties on expected utility go to the lower expected cost, then to the
/// earlier method.
pub fn select_method<T: Scalar>(problem: &ControlProblem<T>) -> Result<MethodSelection<T>> {
    let reports = problem
        .methods()
        .iter()
        .map(|m| evaluate_method(problem, m))
        .collect::<Result<Vec<_>>>()?;
    let keys: Vec<(T, T)> = reports
        .iter()
        .map(|r| (r.expected_utility.clone(), r.expected_cost.clone()))
        .collect();
    let ranking = rank_by_expected_utility(&keys);
    Ok(MethodSelection {
        selected: reports[ranking[0]].method_id.clone(),
        reports,
        ranking,
    })
}

/// Orders `(expected utility, expected cost)` candidates best first.
///
/// Repeated selection rather than a sort: the tolerance-based comparison
/// is not a total order.
pub fn rank_by_expected_utility<T: Scalar>(candidates: &[(T, T)]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut order = Vec::with_capacity(candidates.len());
    while !remaining.is_empty() {
        let mut pos = 0;
        for k in 1..remaining.len() {
            let (eu, cost) = &candidates[remaining[k]];
            let (best_eu, best_cost) = &candidates[remaining[pos]];
            let better = definitely_greater(eu, best_eu)
                || (approx_eq(eu, best_eu) && definitely_greater(best_cost, cost));
            if better {
                pos = k;
            }
        }
        order.push(remaining.remove(pos));
    }
    order
}

/// Best decision on the prior alone, with no cost: the acting-now baseline.
pub fn prior_decision<T: Scalar>(problem: &ControlProblem<T>) -> (Label, T) {
    let table = problem
        .utility()
        .cost_adjusted(&Distribution::point(T::zero()));
    let (d, eu) = best_response(problem.prior().masses(), &table);
    (problem.decisions()[d].clone(), eu)
}

/// Expected utility with free, perfect knowledge of the state.
pub fn clairvoyant_expected_utility<T: Scalar>(problem: &ControlProblem<T>) -> T {
    let u = problem.utility();
    problem.prior().expect_indexed(|x| {
        let d = u.best_decision(x);
        u.utility(x, d, &T::zero())
    })
}

/// Gain from observing the method's output for free, relative to acting on
/// the prior. Never negative up to rounding.
pub fn value_of_information<T: Scalar>(problem: &ControlProblem<T>, method_id: &str) -> Result<T> {
    let method = problem.method(method_id)?;
    let free: CostDistribution<T> = Distribution::point(T::zero());
    let free_method = method.with_cost(free);
    let informed = evaluate_method(problem, &free_method)?.expected_utility;
    let (_, baseline) = prior_decision(problem);
    Ok(informed - baseline)
}

/// Maximizes `sum_x w[x] * table[x][d]` over `d`; earliest wins ties.
pub(crate) fn best_response<T: Scalar>(weights: &[T], table: &[Vec<T>]) -> (usize, T) {
    let n_decisions = table.first().map_or(0, |r| r.len());
    let value = |d: usize| {
        sum(weights
            .iter()
            .zip(table)
            .map(|(w, row)| w.clone() * row[d].clone()))
    };
    let mut best = 0;
    let mut best_value = value(0);
    for d in 1..n_decisions {
        let v = value(d);
        if definitely_greater(&v, &best_value) {
            best = d;
            best_value = v;
        }
    }
    (best, best_value)
}

fn check_spaces<T: Scalar>(prior: &Distribution<T>, channel: &Channel<T>) -> Result<()> {
    if prior.outcomes() != channel.inputs() {
        return Err(DecisionError::SpaceMismatch(
            "channel inputs differ from prior outcomes".into(),
        ));
    }
    Ok(())
}

impl<T: Scalar> Distribution<T> {
    /// `sum_i mass[i] * f(i)`.
    pub fn expect_indexed(&self, mut f: impl FnMut(usize) -> T) -> T {
        sum(self
            .masses()
            .iter()
            .enumerate()
            .map(|(i, m)| m.clone() * f(i)))
    }
}
