//! Random control problems and a brute-force evaluator that shares no
//! code with the library: it enumerates every deterministic policy
//! `S -> D` over the joint space of state, signal and cost.

#![allow(dead_code)]

use metacontrol::decision::{
    Channel, ControlProblem, CostCombiner, Distribution, MethodKind, MethodModel, UtilityModel,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RawMethod {
    pub recommendation: bool,
    /// `rows[input][signal]`; inputs are states, or decisions when
    /// `recommendation` is set.
    pub rows: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub cost_probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RawProblem {
    pub prior: Vec<f64>,
    /// `utility[x][d]`.
    pub utility: Vec<Vec<f64>>,
    /// `None` subtracts the cost; `Some(k)` subtracts `k * cost`.
    pub scale: Option<f64>,
    pub signals: usize,
    pub methods: Vec<RawMethod>,
}

fn simplex(rng: &mut ChaCha8Rng, n: usize, zero_chance: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(zero_chance) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|v| v / total).collect();
        }
    }
}

/// `|X|, |D|, |S| <= 4`, up to 3 methods, up to 3 cost points.
pub fn random_problem(rng: &mut ChaCha8Rng) -> RawProblem {
    let nx = rng.gen_range(1..=4);
    let nd = rng.gen_range(1..=4);
    let ns = rng.gen_range(1..=4);
    let nm = rng.gen_range(1..=3);
    let prior = simplex(rng, nx, 0.1);
    let utility = (0..nx)
        .map(|_| (0..nd).map(|_| rng.gen_range(-100.0..100.0)).collect())
        .collect();
    let scale = rng.gen_bool(0.25).then(|| rng.gen_range(0.5..2.0));
    let methods = (0..nm)
        .map(|_| {
            let recommendation = rng.gen_bool(0.25);
            let inputs = if recommendation { nd } else { nx };
            let nc = rng.gen_range(1..=3);
            RawMethod {
                recommendation,
                rows: (0..inputs).map(|_| simplex(rng, ns, 0.15)).collect(),
                costs: (0..nc).map(|_| rng.gen_range(0.0..20.0)).collect(),
                cost_probs: simplex(rng, nc, 0.0),
            }
        })
        .collect();
    RawProblem {
        prior,
        utility,
        scale,
        signals: ns,
        methods,
    }
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn method_id(i: usize) -> String {
    format!("m{i}")
}

impl RawProblem {
    pub fn states(&self) -> usize {
        self.prior.len()
    }

    pub fn decisions(&self) -> usize {
        self.utility[0].len()
    }

    pub fn build(&self) -> ControlProblem<f64> {
        let states = labels("x", self.states());
        let decisions = labels("d", self.decisions());
        let signals = labels("s", self.signals);
        let combiner = match self.scale {
            None => CostCombiner::Subtract,
            Some(k) => CostCombiner::Scaled(k),
        };
        let utility = UtilityModel::new(
            states.clone(),
            decisions.clone(),
            self.utility.clone(),
            combiner,
        )
        .unwrap();
        let methods = self
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (kind, inputs) = if m.recommendation {
                    (MethodKind::Recommendation, decisions.clone())
                } else {
                    (MethodKind::StateEstimation, states.clone())
                };
                MethodModel::new(
                    method_id(i),
                    kind,
                    Channel::new(inputs, signals.clone(), m.rows.clone()).unwrap(),
                    Distribution::new(m.costs.clone(), m.cost_probs.clone()).unwrap(),
                )
                .unwrap()
            })
            .collect();
        ControlProblem::new(
            "random",
            Distribution::new(states, self.prior.clone()).unwrap(),
            utility,
            methods,
        )
        .unwrap()
    }

    fn total_utility(&self, x: usize, d: usize, cost: f64) -> f64 {
        self.utility[x][d] - self.scale.unwrap_or(1.0) * cost
    }

    /// First decision with the highest primary utility in state `x`.
    fn best_in_state(&self, x: usize) -> usize {
        let row = &self.utility[x];
        let mut best = 0;
        for d in 1..row.len() {
            if row[d] > row[best] + 1e-9 {
                best = d;
            }
        }
        best
    }

    fn likelihood(&self, m: &RawMethod, x: usize, s: usize) -> f64 {
        let input = if m.recommendation {
            self.best_in_state(x)
        } else {
            x
        };
        m.rows[input][s]
    }

    pub fn expected_cost(&self, m: usize) -> f64 {
        let m = &self.methods[m];
        m.costs.iter().zip(&m.cost_probs).map(|(c, p)| c * p).sum()
    }

    /// Best policy value over all `|D|^|S|` policies.
    pub fn oracle_eu(&self, m: usize) -> f64 {
        let method = &self.methods[m];
        let nd = self.decisions();
        let ns = self.signals;
        let policies = nd.pow(ns as u32);
        let mut best = f64::NEG_INFINITY;
        for code in 0..policies {
            let policy: Vec<usize> = (0..ns).map(|s| (code / nd.pow(s as u32)) % nd).collect();
            let mut value = 0.0;
            for x in 0..self.states() {
                for (s, &d) in policy.iter().enumerate() {
                    for (c, pc) in method.costs.iter().zip(&method.cost_probs) {
                        value += self.prior[x]
                            * self.likelihood(method, x, s)
                            * pc
                            * self.total_utility(x, d, *c);
                    }
                }
            }
            best = best.max(value);
        }
        best
    }

    /// Highest expected utility; near-ties to the cheaper method, then the
    /// earlier one.
    pub fn oracle_selection(&self, tolerance: f64) -> usize {
        let eus: Vec<f64> = (0..self.methods.len()).map(|m| self.oracle_eu(m)).collect();
        let top = eus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut pick: Option<usize> = None;
        for (m, eu) in eus.iter().enumerate() {
            if *eu < top - tolerance {
                continue;
            }
            match pick {
                Some(p) if self.expected_cost(m) >= self.expected_cost(p) - tolerance => {}
                _ => pick = Some(m),
            }
        }
        pick.unwrap()
    }

    /// Acting on the prior.
    pub fn oracle_prior_eu(&self) -> f64 {
        (0..self.decisions())
            .map(|d| {
                (0..self.states())
                    .map(|x| self.prior[x] * self.utility[x][d])
                    .sum()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Knowing the state for free.
    pub fn oracle_clairvoyant_eu(&self) -> f64 {
        (0..self.states())
            .map(|x| {
                self.prior[x]
                    * self.utility[x]
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum()
    }
}
