//! Route-planning method selection over time-to-interrupt and error cost.
//!
//! A robot chooses among route-finding methods ordered by thoroughness (a
//! quick feasible-path planner, a basic probabilistic model, a model that
//! also reasons about gathering information). Each method is a
//! recommendation channel over `K` candidate routes that finds the optimal
//! one with probability `p_m`, needs `runtime` ticks to finish, and costs
//! `compute_cost` utility units whether or not it finishes. A method that
//! cannot finish before the interrupt yields an uninformed pick, i.e. the
//! threshold profile drops its success probability to `1/K`.
//!
//! Per cell `(t_i, C_e)`:
//!
//! ```text
//! EU(m) = -(1 - p_eff) * C_e - compute_cost
//! ```

use std::io::{self, Write};

use crate::decision::{
    rank_by_expected_utility, Channel, ControlProblem, CostCombiner, DecisionError, Distribution,
    Label, MethodKind, MethodModel, UtilityModel,
};
use crate::methods::{
    make_recommendation_channel, solve_recommendation_problem, QualityShape, RecommendationChannel,
    RecommendationLoss, RecommendationProblem, ResourceProfile,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathPlanError {
    #[error("invalid path-planning parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

pub type Result<T> = std::result::Result<T, PathPlanError>;

#[derive(Debug, Clone, PartialEq)]
pub struct PathMethod<T> {
    pub id: Label,
    /// Ticks needed to produce a recommendation.
    pub runtime: u64,
    /// Charged on start, in utility units.
    pub compute_cost: T,
    /// Probability of recommending the optimal route when it finishes.
    pub p_success: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid<T> {
    pub ticks: Vec<u64>,
    pub error_costs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPlanParams<T> {
    routes: usize,
    methods: Vec<PathMethod<T>>,
    grid: SweepGrid<T>,
    prior: Distribution<T>,
}

impl<T: Scalar> PathPlanParams<T> {
    /// `methods` must be listed from least to most thorough: success
    /// probability and runtime both nondecreasing.
    pub fn new(
        routes: usize,
        methods: Vec<PathMethod<T>>,
        grid: SweepGrid<T>,
        prior: Option<Vec<T>>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(PathPlanError::InvalidParams(msg));
        if routes < 2 {
            return invalid(format!("need at least 2 routes, got {routes}"));
        }
        if methods.is_empty() {
            return invalid("no methods".into());
        }
        let floor = T::one() / T::from_count(routes);
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].iter().any(|o| o.id == m.id) {
                return invalid(format!("duplicate method id `{}`", m.id));
            }
            if !(m.p_success >= floor && m.p_success <= T::one()) {
                return invalid(format!(
                    "method `{}`: p_success {} outside [1/K, 1]",
                    m.id, m.p_success
                ));
            }
            if !(m.compute_cost.is_finite_value() && m.compute_cost >= T::zero()) {
                return invalid(format!("method `{}`: negative compute cost", m.id));
            }
            if i > 0 {
                let prev = &methods[i - 1];
                if m.p_success < prev.p_success || m.runtime < prev.runtime {
                    return invalid(format!(
                        "methods must be ordered by thoroughness: `{}` after `{}`",
                        m.id, prev.id
                    ));
                }
            }
        }
        if grid
            .error_costs
            .iter()
            .any(|c| !c.is_finite_value() || *c < T::zero())
        {
            return invalid("error costs must be finite and nonnegative".into());
        }
        let labels = route_labels(routes);
        let prior = match prior {
            None => Distribution::uniform(labels)?,
            Some(p) => Distribution::new(labels, p)?,
        };
        Ok(Self {
            routes,
            methods,
            grid,
            prior,
        })
    }

    /// Three routes; F (1 tick, cost 1, p 0.6), B (4, 4, 0.85), I (9, 9,
    /// 0.97); ticks 1..=10 and error costs 10, 20, .., 100.
    pub fn reference() -> Self {
        let num = |n: i64, d: i64| T::from_i64(n).unwrap() / T::from_i64(d).unwrap();
        let method = |id: &str, runtime: u64, cost: i64, p: T| PathMethod {
            id: id.into(),
            runtime,
            compute_cost: num(cost, 1),
            p_success: p,
        };
        Self::new(
            3,
            vec![
                method("F", 1, 1, num(60, 100)),
                method("B", 4, 4, num(85, 100)),
                method("I", 9, 9, num(97, 100)),
            ],
            SweepGrid {
                ticks: (1..=10).collect(),
                error_costs: (1..=10).map(|k| num(10 * k, 1)).collect(),
            },
            None,
        )
        .expect("reference parameters are valid")
    }

    pub fn routes(&self) -> usize {
        self.routes
    }

    pub fn methods(&self) -> &[PathMethod<T>] {
        &self.methods
    }

    pub fn grid(&self) -> &SweepGrid<T> {
        &self.grid
    }

    pub fn prior(&self) -> &Distribution<T> {
        &self.prior
    }

    pub fn with_grid(&self, grid: SweepGrid<T>) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }

    fn method_index(&self, id: &str) -> Result<usize> {
        self.methods
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| PathPlanError::Decision(DecisionError::UnknownMethod(id.into())))
    }

    /// Success probability once the interrupt deadline is applied.
    pub fn effective_success(&self, method: &PathMethod<T>, ticks: u64) -> T {
        if ticks >= method.runtime {
            method.p_success.clone()
        } else {
            T::one() / T::from_count(self.routes)
        }
    }
}

pub fn route_labels(routes: usize) -> Vec<Label> {
    (1..=routes).map(|i| format!("r{i}")).collect()
}

/// One recommendation problem per method for the cell `(ticks, error_cost)`.
///
/// The channel is the method's full-quality recommendation channel passed
/// through its threshold resource profile at `ticks` with one processor.
pub fn build_cell_problem<T: Scalar>(
    params: &PathPlanParams<T>,
    ticks: u64,
    error_cost: T,
) -> Result<Vec<RecommendationProblem<T>>> {
    let labels = route_labels(params.routes);
    params
        .methods
        .iter()
        .map(|m| {
            let full = RecommendationChannel::uniform(labels.clone(), m.p_success.clone());
            let profile = ResourceProfile::new(
                make_recommendation_channel(&full)?,
                QualityShape::Threshold {
                    min_ticks: m.runtime,
                },
            )?;
            // garbling a uniform-dispersion channel keeps uniform dispersion
            let q = profile.fidelity(ticks, 1);
            let floor = T::one() / T::from_count(params.routes);
            let p_eff = q.clone() * m.p_success.clone() + (T::one() - q) * floor;
            Ok(RecommendationProblem {
                method_id: m.id.clone(),
                prior: params.prior.clone(),
                loss: RecommendationLoss::Uniform(error_cost.clone()),
                channel: RecommendationChannel::uniform(labels.clone(), p_eff),
                cost: Distribution::point(m.compute_cost.clone()),
            })
        })
        .collect()
}

/// Expected utility of every method at one cell, in declaration order.
pub fn cell_expected_utilities<T: Scalar>(
    params: &PathPlanParams<T>,
    ticks: u64,
    error_cost: T,
) -> Result<Vec<T>> {
    build_cell_problem(params, ticks, error_cost)?
        .iter()
        .map(|rp| Ok(solve_recommendation_problem(rp)?.expected_utility))
        .collect()
}

/// The same cell as a general control problem: states are "route `k` is
/// optimal", decisions are routes, and each method is a recommendation
/// channel. Used to cross-check the closed form against Bayesian
/// evaluation.
pub fn cell_control_problem<T: Scalar>(
    params: &PathPlanParams<T>,
    ticks: u64,
    error_cost: T,
) -> Result<ControlProblem<T>> {
    let labels = route_labels(params.routes);
    let table = (0..params.routes)
        .map(|x| {
            (0..params.routes)
                .map(|d| {
                    if x == d {
                        T::zero()
                    } else {
                        T::zero() - error_cost.clone()
                    }
                })
                .collect()
        })
        .collect();
    let utility = UtilityModel::new(
        labels.clone(),
        labels.clone(),
        table,
        CostCombiner::Subtract,
    )?;
    let methods = build_cell_problem(params, ticks, error_cost)?
        .into_iter()
        .map(|rp| {
            let channel: Channel<T> = make_recommendation_channel(&rp.channel)?;
            MethodModel::new(rp.method_id, MethodKind::Recommendation, channel, rp.cost)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ControlProblem::new(
        "pathplan-cell",
        params.prior.clone(),
        utility,
        methods,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell<T> {
    pub ticks: u64,
    pub error_cost: T,
    /// Index into the method list.
    pub winner: usize,
    pub expected_utilities: Vec<T>,
}

/// Winning method for every grid cell, ordered error-cost-major then ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap<T> {
    pub method_ids: Vec<Label>,
    pub cells: Vec<RegionCell<T>>,
}

impl<T: Scalar> RegionMap<T> {
    pub fn cell(&self, ticks: u64, error_cost: &T) -> Option<&RegionCell<T>> {
        self.cells
            .iter()
            .find(|c| c.ticks == ticks && c.error_cost == *error_cost)
    }

    pub fn winner_id(&self, cell: &RegionCell<T>) -> &str {
        &self.method_ids[cell.winner]
    }

    /// Cell with the smallest ticks and error cost.
    pub fn min_corner(&self) -> Option<&RegionCell<T>> {
        self.cells.iter().min_by(|a, b| {
            a.ticks.cmp(&b.ticks).then(
                a.error_cost
                    .partial_cmp(&b.error_cost)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
        })
    }

    /// Cell with the largest ticks and error cost.
    pub fn max_corner(&self) -> Option<&RegionCell<T>> {
        self.cells.iter().max_by(|a, b| {
            a.ticks.cmp(&b.ticks).then(
                a.error_cost
                    .partial_cmp(&b.error_cost)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
        })
    }

    pub fn wins(&self, method: usize) -> usize {
        self.cells.iter().filter(|c| c.winner == method).count()
    }
}

pub fn sweep<T: Scalar>(params: &PathPlanParams<T>) -> Result<RegionMap<T>> {
    let mut cells = Vec::with_capacity(params.grid.ticks.len() * params.grid.error_costs.len());
    for c in &params.grid.error_costs {
        for &t in &params.grid.ticks {
            let eus = cell_expected_utilities(params, t, c.clone())?;
            let keys: Vec<(T, T)> = eus
                .iter()
                .zip(&params.methods)
                .map(|(eu, m)| (eu.clone(), m.compute_cost.clone()))
                .collect();
            let winner = rank_by_expected_utility(&keys)[0];
            cells.push(RegionCell {
                ticks: t,
                error_cost: c.clone(),
                winner,
                expected_utilities: eus,
            });
        }
    }
    Ok(RegionMap {
        method_ids: params.methods.iter().map(|m| m.id.clone()).collect(),
        cells,
    })
}

/// Error cost at which methods `a` and `b` have equal expected utility at
/// `ticks`, if their effective success probabilities differ.
pub fn break_even_error_cost<T: Scalar>(
    params: &PathPlanParams<T>,
    a: &str,
    b: &str,
    ticks: u64,
) -> Result<Option<T>> {
    let ma = &params.methods[params.method_index(a)?];
    let mb = &params.methods[params.method_index(b)?];
    let pa = params.effective_success(ma, ticks);
    let pb = params.effective_success(mb, ticks);
    if pa == pb {
        return Ok(None);
    }
    // -(1 - pa) C - ka = -(1 - pb) C - kb  =>  C = (kb - ka) / (pb - pa)
    Ok(Some(
        (mb.compute_cost.clone() - ma.compute_cost.clone()) / (pb - pa),
    ))
}

fn fixed6<T: Scalar>(v: &T) -> String {
    // adding zero folds -0.0 into 0.0
    format!("{:.6}", v.as_f64() + 0.0)
}

/// Writes the region map as CSV and returns the number of data rows.
pub fn emit_region_csv<T: Scalar, W: Write>(map: &RegionMap<T>, mut sink: W) -> io::Result<usize> {
    let mut header = String::from("t_i,C_e,winner");
    for id in &map.method_ids {
        header.push_str(",eu_");
        header.push_str(id);
    }
    writeln!(sink, "{header}")?;
    for cell in &map.cells {
        let mut line = format!(
            "{},{},{}",
            cell.ticks,
            fixed6(&cell.error_cost),
            map.method_ids[cell.winner]
        );
        for eu in &cell.expected_utilities {
            line.push(',');
            line.push_str(&fixed6(eu));
        }
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(map.cells.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    type Q = Rational64;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn reference_cells() {
        let p = PathPlanParams::<Q>::reference();
        assert_eq!(
            cell_expected_utilities(&p, 1, q(10, 1)).unwrap(),
            vec![q(-5, 1), q(-32, 3), q(-47, 3)]
        );
        assert_eq!(
            cell_expected_utilities(&p, 10, q(100, 1)).unwrap(),
            vec![q(-41, 1), q(-19, 1), q(-12, 1)]
        );
        assert_eq!(
            cell_expected_utilities(&p, 5, q(30, 1)).unwrap(),
            vec![q(-13, 1), q(-17, 2), q(-29, 1)]
        );
    }

    #[test]
    fn sweep_winners_and_order() {
        let p = PathPlanParams::<Q>::reference();
        let map = sweep(&p).unwrap();
        assert_eq!(map.cells.len(), 100);
        assert_eq!(map.cells[0].ticks, 1);
        assert_eq!(map.cells[1].ticks, 2);
        assert_eq!(map.cells[10].error_cost, q(20, 1));
        assert_eq!(map.winner_id(map.min_corner().unwrap()), "F");
        assert_eq!(map.winner_id(map.max_corner().unwrap()), "I");
        assert_eq!(map.winner_id(map.cell(5, &q(30, 1)).unwrap()), "B");
        for m in 0..3 {
            assert!(map.wins(m) > 0);
        }
    }

    #[test]
    fn break_even_points() {
        let p = PathPlanParams::<Q>::reference();
        assert_eq!(
            break_even_error_cost(&p, "F", "B", 4).unwrap(),
            Some(q(12, 1))
        );
        assert_eq!(
            break_even_error_cost(&p, "B", "I", 9).unwrap(),
            Some(q(125, 3))
        );
        // below B's runtime B is no better informed than a random pick
        assert_eq!(
            break_even_error_cost(&p, "F", "B", 3).unwrap(),
            Some(q(-45, 4))
        );
        assert!(break_even_error_cost(&p, "F", "Z", 3).is_err());
    }

    #[test]
    fn csv_rows() {
        let p = PathPlanParams::<f64>::reference();
        let map = sweep(&p).unwrap();
        let mut out = Vec::new();
        assert_eq!(emit_region_csv(&map, &mut out).unwrap(), 100);
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_i,C_e,winner,eu_F,eu_B,eu_I"));
        assert_eq!(
            lines.next(),
            Some("1,10.000000,F,-5.000000,-10.666667,-15.666667")
        );

        let small = p.with_grid(SweepGrid {
            ticks: vec![1, 10],
            error_costs: vec![10.0, 100.0],
        });
        let mut out = Vec::new();
        assert_eq!(
            emit_region_csv(&sweep(&small).unwrap(), &mut out).unwrap(),
            4
        );
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 5);

        let empty = p.with_grid(SweepGrid {
            ticks: vec![],
            error_costs: vec![],
        });
        let mut out = Vec::new();
        assert_eq!(
            emit_region_csv(&sweep(&empty).unwrap(), &mut out).unwrap(),
            0
        );
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "t_i,C_e,winner,eu_F,eu_B,eu_I\n"
        );
    }

    #[test]
    fn negative_zero_is_printed_as_zero() {
        assert_eq!(fixed6(&(-0.0f64)), "0.000000");
    }

    #[test]
    fn params_validation() {
        let f = |p: f64, runtime: u64| PathMethod {
            id: format!("m{runtime}"),
            runtime,
            compute_cost: 1.0,
            p_success: p,
        };
        let grid = SweepGrid {
            ticks: vec![1],
            error_costs: vec![1.0],
        };
        assert!(PathPlanParams::new(1, vec![f(1.0, 1)], grid.clone(), None).is_err());
        assert!(PathPlanParams::new(3, vec![f(0.2, 1)], grid.clone(), None).is_err());
        assert!(PathPlanParams::new(3, vec![f(0.9, 1), f(0.8, 2)], grid.clone(), None).is_err());
        assert!(PathPlanParams::new(3, vec![f(0.8, 3), f(0.9, 2)], grid.clone(), None).is_err());
        assert!(
            PathPlanParams::new(2, vec![f(0.8, 1)], grid.clone(), Some(vec![0.5, 0.6])).is_err()
        );
        assert!(PathPlanParams::new(2, vec![f(0.8, 1)], grid, Some(vec![0.3, 0.7])).is_ok());
    }

    #[test]
    fn slow_thorough_method_never_wins_on_short_horizons() {
        let p = PathPlanParams::<f64>::reference().with_grid(SweepGrid {
            ticks: vec![1, 2, 3, 4, 5, 6, 7, 8],
            error_costs: (1..=10).map(|k| 10.0 * k as f64).collect(),
        });
        let map = sweep(&p).unwrap();
        assert_eq!(map.wins(2), 0);
    }
}
