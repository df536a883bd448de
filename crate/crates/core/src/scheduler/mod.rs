//! A logically clocked blackboard runtime.
//!
//! Handlers are problem-solving skills that watch a shared
//! [`KnowledgeSpace`]. A change to a fact they watch creates a [`Task`]
//! (a carrier) with the handler's base priority; waiting tasks age. Tasks
//! created in the same cycle that write the same facts, or that are
//! alternative methods for the same goal, conflict, and are ordered by a
//! rule table, by decision-theoretic method selection when the per-cycle
//! deliberation budget allows it, or by plain priority.
//!
//! Critical events (external interrupts, or violations of the assumptions
//! a running plan was derived under) preempt ordinary work at the next
//! yield point between handler steps.
//!
//! Each tick runs the same cycle:
//!
//! 1. ingest the trace events for this tick;
//! 2. check plan assumptions and raise critical events;
//! 3. match handler triggers against unprocessed changes;
//! 4. detect and resolve conflicts among the new tasks;
//! 5. age waiting tasks;
//! 6. dispatch one task for one tick of work.

mod annotation;
mod conflict;
mod handler;
mod knowledge;
mod runtime;
mod trace;

pub use annotation::{check_assumptions, Assumption, PlanAnnotation, Violation};
pub use conflict::{
    detect_conflicts, resolve_conflict, CmpOp, Condition, ConflictReport, ConflictRule, Resolution,
    ResolutionContext, Tier,
};
pub use handler::{
    age_priorities, match_triggers, FactWrite, Handler, Step, Task, TaskState, Trigger,
    TriggerSource,
};
pub use knowledge::{ChangeEvent, ChangeSource, Fact, KnowledgeSpace};
pub use runtime::{
    run, CriticalEvent, LogRecord, RaiseOutcome, RunConfig, RunLog, RunOutcome, RunSummary,
    Runtime, SchedulerSetup,
};
pub use trace::{parse_trace, TraceEvent, TraceKind};

/// Logical clock value.
pub type Tick = u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("stale tick {tick}: knowledge space is already at tick {now}")]
    StaleTick { tick: Tick, now: Tick },
    #[error("invalid handler `{handler}`: {reason}")]
    InvalidHandler { handler: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trace line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("run did not settle within {0} ticks")]
    TickLimit(Tick),
}

pub type Result<T> = std::result::Result<T, RuntimeError>;
