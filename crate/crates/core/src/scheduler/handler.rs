use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ChangeEvent, Result, RuntimeError, Tick};

/// What kind of occurrence a trigger listens for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSource {
    /// A change in the knowledge space.
    Fact,
    /// An external critical event.
    Interrupt,
    /// A violated plan assumption.
    Violation,
}

/// Predicate over events. `key` and `value` are optional filters; an
/// absent filter matches anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub on: TriggerSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl Trigger {
    pub fn on_fact(key: &str) -> Self {
        Self {
            on: TriggerSource::Fact,
            key: Some(key.into()),
            value: None,
        }
    }

    pub fn matches(&self, source: TriggerSource, key: &str, value: &str) -> bool {
        self.on == source
            && self.key.as_deref().is_none_or(|k| k == key)
            && self.value.as_deref().is_none_or(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactWrite {
    pub key: String,
    pub value: String,
}

/// One scripted unit of work. Writes land when the step completes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub duration: u64,
    #[serde(default)]
    pub writes: Vec<FactWrite>,
}

fn default_aging() -> i64 {
    1
}

fn is_default_aging(a: &i64) -> bool {
    *a == 1
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Handler {
    pub id: String,
    pub trigger: Trigger,
    pub base_priority: i64,
    /// Priority units gained per tick of waiting.
    #[serde(default = "default_aging", skip_serializing_if = "is_default_aging")]
    pub aging_rate: i64,
    pub body: Vec<Step>,
    /// Id of the method model describing this handler, for
    /// decision-theoretic conflict resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Goal this handler is an alternative method for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub event_handler: bool,
    /// Plan annotation installed when the handler completes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<super::PlanAnnotation>,
}

impl Handler {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(RuntimeError::InvalidHandler {
                handler: self.id.clone(),
                reason: reason.into(),
            })
        };
        if self.body.is_empty() {
            return fail("body is empty");
        }
        if self.body.iter().any(|s| s.duration == 0) {
            return fail("step durations must be at least 1 tick");
        }
        if self.aging_rate < 0 {
            return fail("aging rate must be nonnegative");
        }
        let critical_trigger = self.trigger.on != TriggerSource::Fact;
        if self.event_handler != critical_trigger {
            return fail(
                "event handlers must trigger on interrupts or violations, others on facts",
            );
        }
        Ok(())
    }

    /// Keys this handler may write.
    pub fn write_keys(&self) -> BTreeSet<&str> {
        self.body
            .iter()
            .flat_map(|s| s.writes.iter().map(|w| w.key.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Running,
    Suspended,
    Done,
}

/// A scheduled invocation of a handler.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u64,
    /// Index into the handler list.
    pub handler: usize,
    pub handler_id: String,
    pub enqueue_tick: Tick,
    /// Priority at enqueue time; conflict resolution may adjust it.
    pub base_priority: i64,
    pub aging_rate: i64,
    pub current_priority: i64,
    pub state: TaskState,
    /// Index of the next body step.
    pub pc: usize,
    /// Ticks left in the step in progress; zero at a yield point.
    pub remaining: u64,
    /// Description of what created the task.
    pub binding: String,
    pub critical: bool,
    pub(crate) steps_this_dispatch: u32,
}

impl Task {
    pub(crate) fn new(
        id: u64,
        handler_index: usize,
        handler: &Handler,
        tick: Tick,
        priority: i64,
        binding: String,
    ) -> Self {
        Self {
            id,
            handler: handler_index,
            handler_id: handler.id.clone(),
            enqueue_tick: tick,
            base_priority: priority,
            aging_rate: handler.aging_rate,
            current_priority: priority,
            state: TaskState::Pending,
            pc: 0,
            remaining: 0,
            binding,
            critical: handler.event_handler,
            steps_this_dispatch: 0,
        }
    }

    pub fn is_waiting(&self) -> bool {
        matches!(self.state, TaskState::Pending | TaskState::Suspended)
    }

    pub fn at_yield_point(&self) -> bool {
        self.remaining == 0
    }
}

/// One task per (ordinary handler, matching fact change), in handler
/// declaration order and then event order. Ids start at `next_id`.
pub fn match_triggers(handlers: &[Handler], events: &[ChangeEvent], next_id: u64) -> Vec<Task> {
    let mut tasks = Vec::new();
    for (h, handler) in handlers.iter().enumerate() {
        if handler.event_handler {
            continue;
        }
        for ev in events {
            if handler
                .trigger
                .matches(TriggerSource::Fact, &ev.key, &ev.value)
            {
                let id = next_id + tasks.len() as u64;
                tasks.push(Task::new(
                    id,
                    h,
                    handler,
                    ev.tick,
                    handler.base_priority,
                    format!("{}={}@{}", ev.key, ev.value, ev.tick),
                ));
            }
        }
    }
    tasks
}

/// Linear aging: `base + rate * (tick - enqueue)` for every waiting task.
pub fn age_priorities(tasks: &mut [Task], tick: Tick) {
    for t in tasks.iter_mut().filter(|t| t.is_waiting()) {
        let waited = tick.saturating_sub(t.enqueue_tick) as i64;
        t.current_priority = t.base_priority + t.aging_rate * waited;
    }
}
