use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    age_priorities, check_assumptions, detect_conflicts, match_triggers, resolve_conflict,
    ChangeSource, ConflictRule, Handler, KnowledgeSpace, PlanAnnotation, ResolutionContext, Result,
    RuntimeError, Task, TaskState, Tick, Tier, TraceEvent, TraceKind, TriggerSource, Violation,
};
use crate::decision::ControlProblem;

fn default_tiers() -> Vec<Tier> {
    Tier::ALL.to_vec()
}

fn default_quantum() -> u32 {
    1
}

fn default_max_ticks() -> Tick {
    10_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Enabled resolution tiers. Priority order is always the last resort.
    #[serde(default = "default_tiers")]
    pub tiers: Vec<Tier>,
    /// Deliberation ticks available per cycle for decision-theoretic
    /// resolution.
    pub budget: u64,
    /// Steps a task may run before the scheduler reconsiders.
    #[serde(default = "default_quantum")]
    pub quantum: u32,
    #[serde(default)]
    pub seed: u64,
    /// Run at least until this tick.
    #[serde(default)]
    pub horizon: Tick,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: Tick,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tiers: default_tiers(),
            budget: 0,
            quantum: default_quantum(),
            seed: 0,
            horizon: 0,
            max_ticks: default_max_ticks(),
        }
    }
}

/// Everything needed to start a run.
#[derive(Debug, Clone, Default)]
pub struct SchedulerSetup {
    pub handlers: Vec<Handler>,
    pub rules: Vec<ConflictRule>,
    /// Prior, utility and method models for decision-theoretic resolution.
    pub context: Option<ControlProblem<f64>>,
    /// Plan annotations live from tick 0.
    pub annotations: Vec<PlanAnnotation>,
    pub config: RunConfig,
}

/// An asynchronous occurrence that warrants preemption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CriticalEvent {
    Interrupt { key: String, value: String },
    Violation(Violation),
}

impl CriticalEvent {
    fn matches(&self, h: &Handler) -> bool {
        match self {
            CriticalEvent::Interrupt { key, value } => {
                h.trigger.matches(TriggerSource::Interrupt, key, value)
            }
            // Violation triggers filter on the predicate key and the
            // decision label.
            CriticalEvent::Violation(v) => {
                h.trigger
                    .matches(TriggerSource::Violation, v.predicate.key(), &v.decision)
            }
        }
    }

    fn cause(&self, tick: Tick) -> String {
        match self {
            CriticalEvent::Interrupt { key, value } => {
                format!("interrupt:{key}={}@{tick}", quote(value))
            }
            CriticalEvent::Violation(v) => format!("violation:{}@{tick}", v.predicate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RaiseOutcome {
    /// Event-handler tasks created, in handler declaration order.
    Handled {
        tasks: Vec<u64>,
    },
    Unhandled,
}

/// One line of the run log: `tick kind detail`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub tick: Tick,
    pub kind: &'static str,
    /// Space-separated `name=value` fields, or `-`.
    pub detail: String,
}

impl LogRecord {
    /// Value of a named detail field.
    pub fn field(&self, name: &str) -> Option<&str> {
        self.detail.split(' ').find_map(|f| {
            let (k, v) = f.split_once('=')?;
            (k == name).then_some(v)
        })
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.tick, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a LogRecord> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// One line per record, newline-terminated.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub ticks: Tick,
    pub tasks_created: u64,
    pub tasks_completed: u64,
    pub conflicts: u64,
    pub resolved_by_rule: u64,
    pub resolved_by_decision: u64,
    pub resolved_by_priority: u64,
    pub interrupts: u64,
    pub preemptions: u64,
    pub violations: u64,
    pub unhandled: u64,
}

impl RunSummary {
    pub fn resolved_at(&self, tier: Tier) -> u64 {
        match tier {
            Tier::RuleTable => self.resolved_by_rule,
            Tier::DecisionTheoretic => self.resolved_by_decision,
            Tier::DefaultPriority => self.resolved_by_priority,
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ticks: {}", self.ticks)?;
        writeln!(f, "tasks created: {}", self.tasks_created)?;
        writeln!(f, "tasks completed: {}", self.tasks_completed)?;
        writeln!(f, "conflicts: {}", self.conflicts)?;
        for tier in Tier::ALL {
            writeln!(
                f,
                "resolved tier {} ({tier}): {}",
                tier.number(),
                self.resolved_at(tier)
            )?;
        }
        writeln!(f, "interrupts: {}", self.interrupts)?;
        writeln!(f, "preemptions: {}", self.preemptions)?;
        writeln!(f, "assumption violations: {}", self.violations)?;
        write!(f, "unhandled events: {}", self.unhandled)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub summary: RunSummary,
    pub space: KnowledgeSpace,
    pub tasks: Vec<Task>,
}

fn quote(s: &str) -> String {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '"') {
        format!("{s:?}")
    } else {
        s.to_string()
    }
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

/// The control loop. Drive it with [`Runtime::tick`], or use [`run`].
#[derive(Debug, Clone)]
pub struct Runtime {
    setup: SchedulerSetup,
    space: KnowledgeSpace,
    tasks: Vec<Task>,
    live: Vec<PlanAnnotation>,
    running: Option<usize>,
    /// Index of the first change event not yet matched against triggers.
    cursor: usize,
    now: Tick,
    log: RunLog,
    summary: RunSummary,
}

impl Runtime {
    pub fn new(setup: SchedulerSetup) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for h in &setup.handlers {
            h.validate()?;
            if !ids.insert(h.id.as_str()) {
                return Err(RuntimeError::InvalidHandler {
                    handler: h.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            if let (Some(m), Some(ctx)) = (&h.method, &setup.context) {
                if ctx.method(m).is_err() {
                    return Err(RuntimeError::InvalidHandler {
                        handler: h.id.clone(),
                        reason: format!("method `{m}` is not in the context problem"),
                    });
                }
            }
        }
        for rule in &setup.rules {
            if let Some(unknown) = rule.order.iter().find(|h| !ids.contains(h.as_str())) {
                return Err(RuntimeError::InvalidConfig(format!(
                    "rule names unknown handler `{unknown}`"
                )));
            }
        }
        if setup.config.quantum == 0 {
            return Err(RuntimeError::InvalidConfig(
                "quantum must be at least 1".into(),
            ));
        }
        let live = setup.annotations.clone();
        Ok(Self {
            setup,
            space: KnowledgeSpace::new(),
            tasks: Vec::new(),
            live,
            running: None,
            cursor: 0,
            now: 0,
            log: RunLog::default(),
            summary: RunSummary::default(),
        })
    }

    /// The tick the next call to [`Runtime::tick`] will run.
    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn space(&self) -> &KnowledgeSpace {
        &self.space
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn live_annotations(&self) -> &[PlanAnnotation] {
        &self.live
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn summary(&self) -> &RunSummary {
        &self.summary
    }

    /// No unfinished tasks and no unmatched changes.
    pub fn is_quiescent(&self) -> bool {
        self.cursor == self.space.log().len()
            && self.tasks.iter().all(|t| t.state == TaskState::Done)
    }

    fn record(&mut self, kind: &'static str, detail: String) {
        let detail = if detail.is_empty() {
            "-".into()
        } else {
            detail
        };
        self.log.records.push(LogRecord {
            tick: self.now,
            kind,
            detail,
        });
    }

    /// Runs one full cycle at the current tick with the given external
    /// events, all of which must be stamped with that tick.
    pub fn tick(&mut self, events: &[TraceEvent]) -> Result<()> {
        let t = self.now;
        self.space.advance(t);

        for ev in events {
            if ev.tick != t {
                return Err(RuntimeError::StaleTick {
                    tick: ev.tick,
                    now: t,
                });
            }
            match ev.kind {
                TraceKind::Fact => {
                    self.space
                        .post(&ev.key, &ev.value, t, ChangeSource::External)?;
                    self.record("fact", format!("key={} value={}", ev.key, quote(&ev.value)));
                }
                TraceKind::Interrupt => {
                    self.summary.interrupts += 1;
                    self.record(
                        "interrupt",
                        format!("key={} value={}", ev.key, quote(&ev.value)),
                    );
                    self.raise_interrupt(CriticalEvent::Interrupt {
                        key: ev.key.clone(),
                        value: ev.value.clone(),
                    });
                }
            }
        }

        self.monitor();
        self.trigger_and_resolve();
        age_priorities(&mut self.tasks, t);
        if !self.dispatch() {
            self.record("idle", String::new());
        }
        // Writes made during dispatch are checked in the same tick.
        self.monitor();

        self.now += 1;
        self.summary.ticks = self.now;
        Ok(())
    }

    /// Checks live annotations; each violated one is retired and every
    /// failed predicate raises a critical event.
    fn monitor(&mut self) {
        let violations = check_assumptions(&self.space, &self.live, self.now);
        if violations.is_empty() {
            return;
        }
        let failed: BTreeSet<&str> = violations.iter().map(|v| v.decision.as_str()).collect();
        let space = &self.space;
        self.live.retain(|a| {
            !failed.contains(a.decision.as_str()) || a.assumptions.iter().all(|p| p.holds(space))
        });
        for v in violations {
            self.summary.violations += 1;
            let method = v.source_method.as_deref().unwrap_or("-");
            self.record(
                "violation",
                format!(
                    "decision={} predicate={} method={method}",
                    v.decision, v.predicate
                ),
            );
            self.raise_interrupt(CriticalEvent::Violation(v));
        }
    }

    /// Creates a critical task for every matching event handler, with
    /// priority strictly above every unfinished task. Preemption itself
    /// happens at the running task's next yield point.
    pub fn raise_interrupt(&mut self, event: CriticalEvent) -> RaiseOutcome {
        let t = self.now;
        let matching: Vec<usize> = self
            .setup
            .handlers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.event_handler && event.matches(h))
            .map(|(i, _)| i)
            .collect();
        let cause = event.cause(t);
        if matching.is_empty() {
            self.summary.unhandled += 1;
            self.record("unhandled", format!("cause={cause}"));
            return RaiseOutcome::Unhandled;
        }
        let mut created = Vec::new();
        for h in matching {
            let top = self
                .tasks
                .iter()
                .filter(|t| t.state != TaskState::Done)
                .map(|t| t.current_priority)
                .max();
            let handler = &self.setup.handlers[h];
            let priority = top.map_or(handler.base_priority, |p| p + 1);
            let id = self.tasks.len() as u64;
            let task = Task::new(id, h, handler, t, priority, cause.clone());
            self.record(
                "raise",
                format!(
                    "task={id} handler={} priority={priority} cause={cause}",
                    handler.id
                ),
            );
            self.tasks.push(task);
            self.summary.tasks_created += 1;
            created.push(id);
        }
        RaiseOutcome::Handled { tasks: created }
    }

    fn trigger_and_resolve(&mut self) {
        let pending = &self.space.log()[self.cursor..];
        self.cursor = self.space.log().len();
        let first = self.tasks.len();
        let new = match_triggers(&self.setup.handlers, pending, first as u64);
        if new.is_empty() {
            return;
        }
        for task in &new {
            self.record(
                "trigger",
                format!(
                    "task={} handler={} priority={} binding={}",
                    task.id,
                    task.handler_id,
                    task.current_priority,
                    quote(&task.binding)
                ),
            );
        }
        self.summary.tasks_created += new.len() as u64;
        let report = detect_conflicts(&new, &self.setup.handlers);
        self.tasks.extend(new);

        let mut budget = self.setup.config.budget;
        for group in report.groups {
            self.summary.conflicts += 1;
            self.record("conflict", format!("tasks={}", join_ids(&group)));
            let resolution = {
                let set: Vec<&Task> = group.iter().map(|&id| &self.tasks[id as usize]).collect();
                let ctx = ResolutionContext {
                    handlers: &self.setup.handlers,
                    rules: &self.setup.rules,
                    problem: self.setup.context.as_ref(),
                    space: &self.space,
                    tiers: &self.setup.config.tiers,
                };
                resolve_conflict(&set, &ctx, budget)
            };
            budget -= resolution.cost;
            match resolution.tier {
                Tier::RuleTable => self.summary.resolved_by_rule += 1,
                Tier::DecisionTheoretic => self.summary.resolved_by_decision += 1,
                Tier::DefaultPriority => self.summary.resolved_by_priority += 1,
            }
            self.record(
                "resolve",
                format!(
                    "tier={} order={} cost={} {}",
                    resolution.tier,
                    join_ids(&resolution.order),
                    resolution.cost,
                    resolution.detail
                ),
            );
            // Priority order already agrees with the dispatch key.
            if resolution.tier != Tier::DefaultPriority {
                self.apply_order(&resolution.order);
            }
        }
    }

    /// Rewrites priorities so the dispatch order follows `order`.
    fn apply_order(&mut self, order: &[u64]) {
        let t = self.now;
        let top = order
            .iter()
            .map(|&id| self.tasks[id as usize].current_priority)
            .max()
            .unwrap_or(0);
        for (rank, &id) in order.iter().enumerate() {
            let task = &mut self.tasks[id as usize];
            task.current_priority = top - rank as i64;
            let waited = t.saturating_sub(task.enqueue_tick) as i64;
            task.base_priority = task.current_priority - task.aging_rate * waited;
        }
    }

    fn first_waiting_critical(&self) -> Option<usize> {
        self.tasks.iter().position(|t| t.critical && t.is_waiting())
    }

    fn best_ordinary(&self, extra: Option<usize>) -> Option<usize> {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(i, t)| !t.critical && (t.is_waiting() || Some(*i) == extra))
            .min_by(|(_, a), (_, b)| {
                b.current_priority
                    .cmp(&a.current_priority)
                    .then(a.enqueue_tick.cmp(&b.enqueue_tick))
                    .then(a.handler_id.cmp(&b.handler_id))
                    .then(a.id.cmp(&b.id))
            })
            .map(|(i, _)| i)
    }

    fn suspend(&mut self, i: usize) {
        let task = &mut self.tasks[i];
        task.state = TaskState::Suspended;
        let detail = format!("task={} pc={}", task.id, task.pc);
        self.record("suspend", detail);
    }

    /// Picks a task and runs it for one tick. Returns false when idle.
    fn dispatch(&mut self) -> bool {
        let current = self.running;
        let quantum = self.setup.config.quantum;
        let chosen = match current {
            // Steps are atomic.
            Some(r) if !self.tasks[r].at_yield_point() => Some(r),
            // Critical tasks run to completion, first come first served.
            Some(r) if self.tasks[r].critical => Some(r),
            _ => {
                if let Some(c) = self.first_waiting_critical() {
                    if let Some(r) = current {
                        self.summary.preemptions += 1;
                        let (victim, by) = (self.tasks[r].id, self.tasks[c].id);
                        self.record("preempt", format!("task={victim} by={by}"));
                        self.suspend(r);
                    }
                    Some(c)
                } else if let Some(r) =
                    current.filter(|&r| self.tasks[r].steps_this_dispatch < quantum)
                {
                    Some(r)
                } else {
                    if let Some(r) = current {
                        // Back in the queue at its aged priority.
                        let task = &mut self.tasks[r];
                        let waited = self.now.saturating_sub(task.enqueue_tick) as i64;
                        task.current_priority = task.base_priority + task.aging_rate * waited;
                        task.steps_this_dispatch = 0;
                    }
                    let best = self.best_ordinary(current);
                    if let (Some(r), Some(b)) = (current, best) {
                        if r != b {
                            self.suspend(r);
                        }
                    }
                    best
                }
            }
        };
        let Some(i) = chosen else {
            self.running = None;
            return false;
        };
        if self.running != Some(i) {
            let task = &mut self.tasks[i];
            let kind = match task.state {
                TaskState::Suspended => "resume",
                _ => "dispatch",
            };
            task.state = TaskState::Running;
            task.steps_this_dispatch = 0;
            let detail = format!(
                "task={} handler={} priority={} pc={}",
                task.id, task.handler_id, task.current_priority, task.pc
            );
            self.record(kind, detail);
            self.running = Some(i);
        }
        self.execute(i);
        true
    }

    fn execute(&mut self, i: usize) {
        let t = self.now;
        let handler = &self.setup.handlers[self.tasks[i].handler];
        let task = &mut self.tasks[i];
        let step = &handler.body[task.pc];
        if task.remaining == 0 {
            task.remaining = step.duration;
            task.steps_this_dispatch += 1;
            let detail = format!(
                "task={} step={} duration={}",
                task.id, task.pc, step.duration
            );
            self.log.records.push(LogRecord {
                tick: t,
                kind: "step",
                detail,
            });
        }
        task.remaining -= 1;
        if task.remaining > 0 {
            return;
        }
        let id = task.id;
        task.pc += 1;
        let finished = task.pc == handler.body.len();
        for w in &step.writes {
            // The clock never runs behind a running task.
            self.space
                .post(&w.key, &w.value, t, ChangeSource::Task(id))
                .expect("task writes are stamped with the current tick");
            self.log.records.push(LogRecord {
                tick: t,
                kind: "write",
                detail: format!("task={id} key={} value={}", w.key, quote(&w.value)),
            });
        }
        if !finished {
            return;
        }
        self.tasks[i].state = TaskState::Done;
        self.running = None;
        self.summary.tasks_completed += 1;
        let handler_id = handler.id.clone();
        let annotation = handler.annotation.clone();
        self.record("complete", format!("task={id} handler={handler_id}"));
        if let Some(mut a) = annotation {
            if a.source_method.is_none() {
                a.source_method = Some(handler_id);
            }
            self.record(
                "annotate",
                format!(
                    "task={id} decision={} assumptions={}",
                    a.decision,
                    a.assumptions.len()
                ),
            );
            self.live.retain(|l| l.decision != a.decision);
            self.live.push(a);
        }
    }

    pub fn finish(self) -> RunOutcome {
        RunOutcome {
            log: self.log,
            summary: self.summary,
            space: self.space,
            tasks: self.tasks,
        }
    }
}

/// Runs from tick 0 until the first quiescent tick at or after both the
/// last trace tick and the configured horizon.
pub fn run(setup: SchedulerSetup, trace: &[TraceEvent]) -> Result<RunOutcome> {
    if let Some(w) = trace.windows(2).find(|w| w[1].tick < w[0].tick) {
        return Err(RuntimeError::StaleTick {
            tick: w[1].tick,
            now: w[0].tick,
        });
    }
    let max_ticks = setup.config.max_ticks;
    let end = trace.last().map_or(0, |e| e.tick).max(setup.config.horizon);
    let mut rt = Runtime::new(setup)?;
    let mut next = 0;
    loop {
        let t = rt.now();
        if t > max_ticks {
            return Err(RuntimeError::TickLimit(max_ticks));
        }
        let upto = next + trace[next..].iter().take_while(|e| e.tick == t).count();
        rt.tick(&trace[next..upto])?;
        next = upto;
        if t >= end && rt.is_quiescent() {
            break;
        }
    }
    Ok(rt.finish())
}
