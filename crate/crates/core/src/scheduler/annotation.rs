use std::fmt;

use serde::{Deserialize, Serialize};

use super::{KnowledgeSpace, Tick};

/// A critical assumption a plan was derived under.
///
/// A predicate whose key has never been posted holds: there is no evidence
/// against it yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assumption {
    Equals {
        key: String,
        value: String,
    },
    NotEquals {
        key: String,
        value: String,
    },
    /// Mutual exclusivity: the observed value is one of the enumerated
    /// possibilities considered while planning.
    OneOf {
        key: String,
        values: Vec<String>,
    },
}

impl Assumption {
    pub fn key(&self) -> &str {
        match self {
            Assumption::Equals { key, .. }
            | Assumption::NotEquals { key, .. }
            | Assumption::OneOf { key, .. } => key,
        }
    }

    pub fn holds(&self, space: &KnowledgeSpace) -> bool {
        let Some(observed) = space.value(self.key()) else {
            return true;
        };
        match self {
            Assumption::Equals { value, .. } => observed == value,
            Assumption::NotEquals { value, .. } => observed != value,
            Assumption::OneOf { values, .. } => values.iter().any(|v| v == observed),
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::Equals { key, value } => write!(f, "{key}=={value}"),
            Assumption::NotEquals { key, value } => write!(f, "{key}!={value}"),
            Assumption::OneOf { key, values } => write!(f, "{key}=~{{{}}}", values.join(",")),
        }
    }
}

/// A recommendation being executed, with the assumptions it rests on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanAnnotation {
    pub decision: String,
    #[serde(default)]
    pub assumptions: Vec<Assumption>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_method: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub tick: Tick,
    pub decision: String,
    pub source_method: Option<String>,
    pub predicate: Assumption,
}

/// One violation per failed predicate per annotation, in annotation order
/// then predicate order.
pub fn check_assumptions(
    space: &KnowledgeSpace,
    annotations: &[PlanAnnotation],
    tick: Tick,
) -> Vec<Violation> {
    annotations
        .iter()
        .flat_map(|a| {
            a.assumptions
                .iter()
                .filter(|p| !p.holds(space))
                .map(move |p| Violation {
                    tick,
                    decision: a.decision.clone(),
                    source_method: a.source_method.clone(),
                    predicate: p.clone(),
                })
        })
        .collect()
}
