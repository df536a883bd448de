use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Handler, KnowledgeSpace, Task};
use crate::decision::{select_method, ControlProblem, MethodModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

/// Test on a fact. Ordering operators compare numerically and fail when
/// either side is not a number; a missing fact fails every test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub key: String,
    pub op: CmpOp,
    pub value: String,
}

impl Condition {
    pub fn holds(&self, space: &KnowledgeSpace) -> bool {
        let Some(observed) = space.value(&self.key) else {
            return false;
        };
        let numeric = || -> Option<(f64, f64)> {
            Some((
                observed.trim().parse().ok()?,
                self.value.trim().parse().ok()?,
            ))
        };
        match self.op {
            CmpOp::Eq => observed == self.value,
            CmpOp::Ne => observed != self.value,
            CmpOp::Lt => numeric().is_some_and(|(a, b)| a < b),
            CmpOp::Le => numeric().is_some_and(|(a, b)| a <= b),
            CmpOp::Gt => numeric().is_some_and(|(a, b)| a > b),
            CmpOp::Ge => numeric().is_some_and(|(a, b)| a >= b),
        }
    }
}

/// Specialized control knowledge: a fixed order for a known set of
/// conflicting handlers, optionally guarded by a condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictRule {
    pub order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Condition>,
}

impl ConflictRule {
    fn applies(&self, handler_ids: &BTreeSet<&str>, space: &KnowledgeSpace) -> bool {
        let mine: BTreeSet<&str> = self.order.iter().map(String::as_str).collect();
        mine == *handler_ids && self.when.as_ref().is_none_or(|c| c.holds(space))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    RuleTable,
    DecisionTheoretic,
    DefaultPriority,
}

impl Tier {
    pub const ALL: [Tier; 3] = [
        Tier::RuleTable,
        Tier::DecisionTheoretic,
        Tier::DefaultPriority,
    ];

    pub fn number(self) -> u8 {
        match self {
            Tier::RuleTable => 1,
            Tier::DecisionTheoretic => 2,
            Tier::DefaultPriority => 3,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::RuleTable => "rule",
            Tier::DecisionTheoretic => "decision",
            Tier::DefaultPriority => "priority",
        })
    }
}

/// Tasks created in one cycle, split into conflict sets and free tasks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictReport {
    /// Task ids per conflict set; every set has at least two members.
    pub groups: Vec<Vec<u64>>,
    pub free: Vec<u64>,
}

/// Two new tasks conflict when their handlers write a common key, or are
/// both method-carrying alternatives for the same goal. Conflict sets are
/// the connected components of that relation, listed by first member.
pub fn detect_conflicts(new: &[Task], handlers: &[Handler]) -> ConflictReport {
    let n = new.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let writes: Vec<BTreeSet<&str>> = new
        .iter()
        .map(|t| handlers[t.handler].write_keys())
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let hi = &handlers[new[i].handler];
            let hj = &handlers[new[j].handler];
            let same_goal = hi.method.is_some()
                && hj.method.is_some()
                && hi.goal.is_some()
                && hi.goal == hj.goal;
            if same_goal || !writes[i].is_disjoint(&writes[j]) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut report = ConflictReport::default();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        if seen.contains(&r) {
            continue;
        }
        seen.push(r);
        let members: Vec<u64> = (0..n)
            .filter(|&k| root(&mut parent, k) == r)
            .map(|k| new[k].id)
            .collect();
        if members.len() > 1 {
            report.groups.push(members);
        } else {
            report.free.push(members[0]);
        }
    }
    report
}

/// Everything conflict resolution may consult.
#[derive(Debug, Clone, Copy)]
pub struct ResolutionContext<'a> {
    pub handlers: &'a [Handler],
    pub rules: &'a [ConflictRule],
    /// Prior, utility and method models for decision-theoretic ordering.
    pub problem: Option<&'a ControlProblem<f64>>,
    pub space: &'a KnowledgeSpace,
    /// Enabled tiers.
    pub tiers: &'a [Tier],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    /// Task ids, first to run first.
    pub order: Vec<u64>,
    pub tier: Tier,
    /// Deliberation ticks charged against the cycle budget.
    pub cost: u64,
    pub detail: String,
}

/// Deliberation cost estimate for decision-theoretic resolution.
pub fn resolution_cost(set_size: usize) -> u64 {
    (set_size * set_size) as u64
}

/// Orders a conflict set. Tries the rule table, then decision-theoretic
/// method selection if every task carries a method model and the estimate
/// fits in `budget`, then priority order. Always succeeds.
pub fn resolve_conflict(set: &[&Task], ctx: &ResolutionContext<'_>, budget: u64) -> Resolution {
    if ctx.tiers.contains(&Tier::RuleTable) {
        if let Some(r) = by_rule(set, ctx) {
            return r;
        }
    }
    if ctx.tiers.contains(&Tier::DecisionTheoretic) {
        if let Some(r) = by_expected_utility(set, ctx, budget) {
            return r;
        }
    }
    by_priority(set)
}

fn by_rule(set: &[&Task], ctx: &ResolutionContext<'_>) -> Option<Resolution> {
    let ids: BTreeSet<&str> = set.iter().map(|t| t.handler_id.as_str()).collect();
    let (index, rule) = ctx
        .rules
        .iter()
        .enumerate()
        .find(|(_, r)| r.applies(&ids, ctx.space))?;
    let mut ordered: Vec<&Task> = set.to_vec();
    ordered.sort_by_key(|t| rule.order.iter().position(|h| *h == t.handler_id));
    Some(Resolution {
        order: ordered.iter().map(|t| t.id).collect(),
        tier: Tier::RuleTable,
        cost: 0,
        detail: format!("rule={index}"),
    })
}

fn by_expected_utility(
    set: &[&Task],
    ctx: &ResolutionContext<'_>,
    budget: u64,
) -> Option<Resolution> {
    let problem = ctx.problem?;
    let cost = resolution_cost(set.len());
    if cost > budget {
        return None;
    }
    let mut methods: Vec<MethodModel<f64>> = Vec::new();
    let mut task_method = Vec::with_capacity(set.len());
    for t in set {
        let id = ctx.handlers[t.handler].method.as_deref()?;
        let pos = match methods.iter().position(|m| m.id == id) {
            Some(p) => p,
            None => {
                methods.push(problem.method(id).ok()?.clone());
                methods.len() - 1
            }
        };
        task_method.push(pos);
    }
    let candidates = problem.with_methods(methods).ok()?;
    let selection = select_method(&candidates).ok()?;
    let rank_of = |m: usize| selection.ranking.iter().position(|&r| r == m);
    let mut order: Vec<(usize, u64)> = set
        .iter()
        .zip(&task_method)
        .map(|(t, &m)| (rank_of(m).unwrap_or(usize::MAX), t.id))
        .collect();
    order.sort_by_key(|&(rank, _)| rank);
    let detail = selection
        .ranking
        .iter()
        .map(|&i| {
            let r = &selection.reports[i];
            format!("{}:{:.6}", r.method_id, r.expected_utility + 0.0)
        })
        .collect::<Vec<_>>()
        .join(",");
    Some(Resolution {
        order: order.into_iter().map(|(_, id)| id).collect(),
        tier: Tier::DecisionTheoretic,
        cost,
        detail: format!("eu={detail}"),
    })
}

fn by_priority(set: &[&Task]) -> Resolution {
    let mut ordered: Vec<&Task> = set.to_vec();
    ordered.sort_by(|a, b| {
        b.current_priority
            .cmp(&a.current_priority)
            .then(a.enqueue_tick.cmp(&b.enqueue_tick))
            .then(a.handler_id.cmp(&b.handler_id))
            .then(a.id.cmp(&b.id))
    });
    Resolution {
        order: ordered.iter().map(|t| t.id).collect(),
        tier: Tier::DefaultPriority,
        cost: 0,
        detail: String::from("by=priority"),
    }
}
