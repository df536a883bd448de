//! Channel families for reasoning methods.
//!
//! Two kinds of construction live here. Recommendation channels describe a
//! method that outputs a candidate decision and is right with probability
//! `p_m`. Resource profiles describe a method whose output quality depends
//! on the time left before the next interrupt and on the processor count;
//! the realized channel is a mixture of the full-quality channel and a
//! uniform one, weighted by a fidelity `q(t_i, n)` in `[0, 1]`. Mixing with
//! pure noise is a garbling, so more fidelity never lowers expected utility.

use crate::decision::{
    expected_utility_of_method, preposterior, Channel, ControlProblem, CostDistribution,
    DecisionError, Distribution, Label, MethodModel, PolicyEntry, Result, SolutionReport,
};
use crate::scalar::{approx_eq, definitely_greater, sum, Scalar};

/// How the probability of a wrong recommendation is spread.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Dispersion<T> {
    /// Evenly over the non-optimal decisions.
    #[default]
    Uniform,
    /// `rows[d*][s]`: a distribution over decisions for each true optimum,
    /// with zero mass on `d*` itself.
    Rows(Vec<Vec<T>>),
}

/// A method that recommends the optimal decision with probability
/// `p_optimal`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationChannel<T> {
    pub decisions: Vec<Label>,
    pub p_optimal: T,
    pub dispersion: Dispersion<T>,
}

impl<T: Scalar> RecommendationChannel<T> {
    pub fn uniform(decisions: Vec<Label>, p_optimal: T) -> Self {
        Self {
            decisions,
            p_optimal,
            dispersion: Dispersion::Uniform,
        }
    }
}

pub fn make_recommendation_channel<T: Scalar>(
    spec: &RecommendationChannel<T>,
) -> Result<Channel<T>> {
    let p = &spec.p_optimal;
    if !(p.is_finite_value() && *p >= T::zero() && *p <= T::one()) {
        return Err(DecisionError::InvalidProbability {
            what: "p_optimal".into(),
            value: p.as_f64(),
        });
    }
    let k = spec.decisions.len();
    let miss = T::one() - p.clone();
    let rows: Vec<Vec<T>> = match &spec.dispersion {
        Dispersion::Uniform => {
            if k < 2 && miss > T::zero() {
                return Err(DecisionError::InvalidProbability {
                    what: "p_optimal with a single decision".into(),
                    value: p.as_f64(),
                });
            }
            let off = if k < 2 {
                T::zero()
            } else {
                miss / T::from_count(k - 1)
            };
            (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| if i == j { p.clone() } else { off.clone() })
                        .collect()
                })
                .collect()
        }
        Dispersion::Rows(rows) => {
            if rows.len() != k {
                return Err(DecisionError::LengthMismatch {
                    what: "dispersion rows".into(),
                    expected: k,
                    found: rows.len(),
                });
            }
            let mut out = Vec::with_capacity(k);
            for (i, row) in rows.iter().enumerate() {
                Distribution::new(spec.decisions.clone(), row.clone())?;
                if row[i] != T::zero() {
                    return Err(DecisionError::InvalidProbability {
                        what: format!("dispersion mass on the optimum `{}`", spec.decisions[i]),
                        value: row[i].as_f64(),
                    });
                }
                out.push(
                    row.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            if i == j {
                                p.clone()
                            } else {
                                miss.clone() * v.clone()
                            }
                        })
                        .collect(),
                );
            }
            out
        }
    };
    Channel::new(spec.decisions.clone(), spec.decisions.clone(), rows)
}

/// True when every row's mean output equals its input value.
///
/// Input and signal labels must parse as numbers.
pub fn is_unbiased<T: Scalar>(channel: &Channel<T>) -> Result<bool> {
    let inputs = numeric_labels::<T>(channel.inputs())?;
    let signals = numeric_labels::<T>(channel.signals())?;
    Ok(inputs.iter().enumerate().all(|(i, target)| {
        let mean = sum(channel
            .row(i)
            .iter()
            .zip(&signals)
            .map(|(p, s)| p.clone() * s.clone()));
        approx_eq(&mean, target)
    }))
}

fn numeric_labels<T: Scalar>(labels: &[Label]) -> Result<Vec<T>> {
    labels
        .iter()
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .and_then(T::from_f64)
                .ok_or_else(|| DecisionError::NonNumericLabel(l.clone()))
        })
        .collect()
}

/// Fidelity as a function of ticks to the next interrupt and processors.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityShape<T> {
    /// Same fidelity regardless of resources.
    Constant(T),
    /// `min(1, ticks * processors / work)`: anytime behaviour, improving
    /// with every unit of processor time.
    Ramp { work: T },
    /// Useless below `min_ticks`, full quality at or above.
    Threshold { min_ticks: u64 },
}

impl<T: Scalar> QualityShape<T> {
    pub fn is_monotone(&self) -> bool {
        !matches!(self, QualityShape::Threshold { .. })
    }
}

/// A method whose channel degrades with fewer resources.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceProfile<T> {
    pub base: Channel<T>,
    pub shape: QualityShape<T>,
}

impl<T: Scalar> ResourceProfile<T> {
    pub fn new(base: Channel<T>, shape: QualityShape<T>) -> Result<Self> {
        match &shape {
            QualityShape::Constant(q) if !(*q >= T::zero() && *q <= T::one()) => {
                return Err(DecisionError::InvalidProbability {
                    what: "constant fidelity".into(),
                    value: q.as_f64(),
                });
            }
            QualityShape::Ramp { work } if !(work.is_finite_value() && *work > T::zero()) => {
                return Err(DecisionError::InvalidProbability {
                    what: "ramp work".into(),
                    value: work.as_f64(),
                });
            }
            _ => {}
        }
        Ok(Self { base, shape })
    }

    /// `q(t_i, n)`.
    pub fn fidelity(&self, ticks: u64, processors: u32) -> T {
        match &self.shape {
            QualityShape::Constant(q) => q.clone(),
            QualityShape::Ramp { work } => {
                let effort = T::from_u64(ticks).expect("tick count representable")
                    * T::from_u32(processors).expect("processor count representable");
                let q = effort / work.clone();
                if q > T::one() {
                    T::one()
                } else {
                    q
                }
            }
            QualityShape::Threshold { min_ticks } => {
                if ticks >= *min_ticks {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// The channel a profiled method delivers with `ticks` until interrupt and
/// `processors` processors.
pub fn realize_channel<T: Scalar>(
    profile: &ResourceProfile<T>,
    ticks: u64,
    processors: u32,
) -> Result<Channel<T>> {
    if processors == 0 {
        return Err(DecisionError::InvalidProbability {
            what: "processor count".into(),
            value: 0.0,
        });
    }
    let q = profile.fidelity(ticks, processors);
    garble(&profile.base, &q)
}

/// `q * base + (1 - q) * uniform`, row by row.
pub fn garble<T: Scalar>(base: &Channel<T>, q: &T) -> Result<Channel<T>> {
    let noise = T::one() / T::from_count(base.signals().len());
    let rest = T::one() - q.clone();
    let rows = base
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| q.clone() * p.clone() + rest.clone() * noise.clone())
                .collect()
        })
        .collect();
    Channel::new(base.inputs().to_vec(), base.signals().to_vec(), rows)
}

/// Axes of a resource sweep; both must be ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub ticks: Vec<u64>,
    pub processors: Vec<u32>,
}

/// Expected utility of the method with its channel replaced by the
/// profile's realization, for every grid point: `surface[t][n]`.
pub fn value_surface<T: Scalar>(
    profile: &ResourceProfile<T>,
    problem: &ControlProblem<T>,
    method_id: &str,
    grid: &ResourceGrid,
) -> Result<Vec<Vec<T>>> {
    let method = problem.method(method_id)?;
    let mut surface = Vec::with_capacity(grid.ticks.len());
    for &t in &grid.ticks {
        let mut row = Vec::with_capacity(grid.processors.len());
        for &n in &grid.processors {
            let realized = MethodModel {
                channel: realize_channel(profile, t, n)?,
                ..method.clone()
            };
            let single = problem.with_methods(vec![realized])?;
            row.push(expected_utility_of_method(&single, method_id)?.expected_utility);
        }
        surface.push(row);
    }
    Ok(surface)
}

/// Whether expected utility never drops as ticks or processors grow.
pub fn check_monotone_value<T: Scalar>(
    profile: &ResourceProfile<T>,
    problem: &ControlProblem<T>,
    method_id: &str,
    grid: &ResourceGrid,
) -> Result<bool> {
    let ascending_t = grid.ticks.windows(2).all(|w| w[0] <= w[1]);
    let ascending_n = grid.processors.windows(2).all(|w| w[0] <= w[1]);
    if !(ascending_t && ascending_n) {
        return Err(DecisionError::SpaceMismatch(
            "resource grid axes must be ascending".into(),
        ));
    }
    let surface = value_surface(profile, problem, method_id, grid)?;
    let along_t = (1..surface.len()).all(|i| {
        (0..grid.processors.len()).all(|j| !definitely_greater(&surface[i - 1][j], &surface[i][j]))
    });
    let along_n = surface
        .iter()
        .all(|row| row.windows(2).all(|w| !definitely_greater(&w[0], &w[1])));
    Ok(along_t && along_n)
}

/// Loss of adopting a recommendation when another decision was optimal.
#[derive(Debug, Clone, PartialEq)]
pub enum RecommendationLoss<T> {
    /// The same error cost for every wrong pick.
    Uniform(T),
    /// `loss[d*][s]`, zero on the diagonal.
    Matrix(Vec<Vec<T>>),
}

impl<T: Scalar> RecommendationLoss<T> {
    fn loss(&self, optimum: usize, pick: usize) -> T {
        match self {
            _ if optimum == pick => T::zero(),
            RecommendationLoss::Uniform(c) => c.clone(),
            RecommendationLoss::Matrix(m) => m[optimum][pick].clone(),
        }
    }
}

/// A decision problem where the method's output is adopted as the action.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationProblem<T> {
    pub method_id: Label,
    /// Uncertainty about which decision is optimal.
    pub prior: Distribution<T>,
    pub loss: RecommendationLoss<T>,
    pub channel: RecommendationChannel<T>,
    pub cost: CostDistribution<T>,
}

/// Expected utility of following the recommendation, with
/// `U(d*, s, c) = -loss(d*, s) - c`.
pub fn solve_recommendation_problem<T: Scalar>(
    rp: &RecommendationProblem<T>,
) -> Result<SolutionReport<T>> {
    let channel = make_recommendation_channel(&rp.channel)?;
    let k = channel.signals().len();
    if let RecommendationLoss::Matrix(m) = &rp.loss {
        if m.len() != k || m.iter().any(|r| r.len() != k) {
            return Err(DecisionError::LengthMismatch {
                what: "loss matrix".into(),
                expected: k,
                found: m.len(),
            });
        }
    }
    let pre = preposterior(&rp.prior, &channel)?;
    let expected_cost = rp.cost.mean();
    let mut policy = Vec::new();
    for (s, (signal, mass)) in pre.iter().enumerate() {
        if *mass <= T::zero() {
            continue;
        }
        let expected_loss = sum(rp
            .prior
            .masses()
            .iter()
            .enumerate()
            .map(|(d, p)| p.clone() * channel.likelihood(d, s).clone() * rp.loss.loss(d, s)))
            / mass.clone();
        policy.push(PolicyEntry {
            signal: signal.clone(),
            decision: signal.clone(),
            preposterior: mass.clone(),
            expected_utility: T::zero() - expected_loss - expected_cost.clone(),
        });
    }
    let expected_utility = sum(policy
        .iter()
        .map(|e| e.preposterior.clone() * e.expected_utility.clone()));
    Ok(SolutionReport {
        method_id: rp.method_id.clone(),
        expected_utility,
        expected_cost,
        policy,
    })
}
