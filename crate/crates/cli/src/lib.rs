//! Subcommands of the `metacontrol` binary.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use metacontrol::decision::{
    prior_decision, regret_table, select_method, value_of_information, ControlProblem,
};
use metacontrol::pathplan::{emit_region_csv, sweep, RegionMap};
use metacontrol::scenario::{load_scenario, IssueKind, Scenario, ScenarioError};
use metacontrol::scheduler::{parse_trace, run, RuntimeError, Tier};

#[derive(Debug, Parser)]
#[command(
    name = "metacontrol",
    version,
    about = "Decision-theoretic control of reasoning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the method with the highest expected utility.
    Solve {
        scenario: PathBuf,
        /// Append the regret table.
        #[arg(long)]
        regret: bool,
    },
    /// Value of information of one method.
    Voi { scenario: PathBuf, method: String },
    /// Sweep the path-planning grid and write the region CSV.
    Sweep {
        scenario: PathBuf,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scheduler over a trace.
    Simulate {
        scenario: PathBuf,
        trace: PathBuf,
        /// Run log destination; standard output when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Parse,
    Schema,
    Label,
    Trace,
    Runtime,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Io => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Usage => "usage",
            Category::Parse => "parse",
            Category::Schema => "schema",
            Category::Label => "label",
            Category::Trace => "trace",
            Category::Runtime => "runtime",
            Category::Io => "io",
        })
    }
}

/// First line `error: <category>: <detail>`, then any further detail.
#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub detail: String,
    pub more: Vec<String>,
}

impl CliError {
    pub fn new(category: Category, detail: impl Into<String>) -> Self {
        Self {
            category,
            detail: detail.into(),
            more: Vec::new(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(Category::Io, format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}: {}", self.category, self.detail)?;
        for line in &self.more {
            write!(f, "\n{line}")?;
        }
        Ok(())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { path, source } => {
                CliError::new(Category::Io, format!("{path}: {source}"))
            }
            ScenarioError::Parse { .. } => CliError::new(Category::Parse, e.to_string()),
            ScenarioError::Invalid(issues) => {
                let category = |k| match k {
                    IssueKind::Schema => Category::Schema,
                    IssueKind::Label => Category::Label,
                };
                let first = &issues[0];
                let mut err = CliError::new(
                    category(first.kind),
                    format!("{}: {}", first.path, first.message),
                );
                err.more = issues[1..].iter().map(|i| format!("  {i}")).collect();
                err
            }
        }
    }
}

impl From<RuntimeError> for CliError {
    fn from(e: RuntimeError) -> Self {
        let category = match e {
            RuntimeError::MalformedTrace { .. } | RuntimeError::StaleTick { .. } => Category::Trace,
            _ => Category::Runtime,
        };
        CliError::new(category, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn num(x: f64) -> String {
    format!("{:.6}", x + 0.0)
}

fn problem(s: &Scenario) -> Result<&ControlProblem<f64>> {
    s.problem.as_ref().ok_or_else(|| {
        CliError::new(
            Category::Schema,
            "scenario has no control problem (spaces, prior, utility, methods)",
        )
    })
}

/// Runs one subcommand. Reports go to `out`; notes that must not mix with
/// CSV or log output on standard output go to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let stdout_io = |e: io::Error| CliError::new(Category::Io, format!("standard output: {e}"));
    match &cli.command {
        Command::Solve { scenario, regret } => {
            let s = load_scenario(scenario)?;
            solve(problem(&s)?, *regret, out).map_err(stdout_io)
        }
        Command::Voi { scenario, method } => {
            let s = load_scenario(scenario)?;
            voi(&s, method, out)
        }
        Command::Sweep {
            scenario,
            out: path,
        } => {
            let s = load_scenario(scenario)?;
            sweep_cmd(&s, path.as_deref(), out, err)
        }
        Command::Simulate {
            scenario,
            trace,
            log,
            seed,
        } => {
            let s = load_scenario(scenario)?;
            simulate(&s, trace, log.as_deref(), *seed, out)
        }
    }
}

pub fn solve(p: &ControlProblem<f64>, with_regret: bool, out: &mut dyn Write) -> io::Result<()> {
    let selection = select_method(p).expect("validated problems evaluate");
    writeln!(out, "context: {}", p.context())?;
    let width = p
        .methods()
        .iter()
        .map(|m| m.id.len())
        .max()
        .unwrap_or(0)
        .max(6);
    writeln!(
        out,
        "{:<width$}  {:>16}  {:>13}",
        "method", "expected_utility", "expected_cost"
    )?;
    for r in &selection.reports {
        writeln!(
            out,
            "{:<width$}  {:>16}  {:>13}",
            r.method_id,
            num(r.expected_utility),
            num(r.expected_cost)
        )?;
    }
    writeln!(out, "selected: {}", selection.selected)?;
    let tied: Vec<&str> = selection
        .tied_with_selected()
        .iter()
        .map(|r| r.method_id.as_str())
        .filter(|id| *id != selection.selected)
        .collect();
    if !tied.is_empty() {
        writeln!(
            out,
            "tie: {} within tolerance of {}; broken by lower expected cost, then declaration order",
            tied.join(", "),
            selection.selected
        )?;
    }
    let best = selection.selected_report();
    writeln!(out, "policy ({}):", best.method_id)?;
    for e in &best.policy {
        writeln!(
            out,
            "  {} -> {}  pr={} eu={}",
            e.signal,
            e.decision,
            num(e.preposterior),
            num(e.expected_utility)
        )?;
    }
    if with_regret {
        let table = regret_table(p.utility());
        writeln!(out, "regret:")?;
        writeln!(out, "  state  {}", table.decisions.join("  "))?;
        for (x, row) in table.entries.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
            writeln!(out, "  {}  {}", table.states[x], cells.join("  "))?;
        }
    }
    Ok(())
}

pub fn voi(s: &Scenario, method: &str, out: &mut dyn Write) -> Result<()> {
    let p = problem(s)?;
    let value = value_of_information(p, method)
        .map_err(|e| CliError::new(Category::Label, format!("{method}: {e}")))?;
    let (decision, baseline) = prior_decision(p);
    let mut write = || -> io::Result<()> {
        writeln!(out, "method: {method}")?;
        writeln!(out, "act now: {decision} eu={}", num(baseline))?;
        writeln!(out, "voi: {}", num(value))
    };
    write().map_err(|e| CliError::new(Category::Io, format!("standard output: {e}")))
}

fn corner_summary(map: &RegionMap<f64>, out: &mut dyn Write) -> io::Result<()> {
    for (name, cell) in [("min", map.min_corner()), ("max", map.max_corner())] {
        if let Some(c) = cell {
            writeln!(
                out,
                "{name} corner t_i={} C_e={}: {}",
                c.ticks,
                num(c.error_cost),
                map.winner_id(c)
            )?;
        }
    }
    for (i, m) in map.method_ids.iter().enumerate() {
        writeln!(out, "{} wins {} cells", m, map.wins(i))?;
    }
    Ok(())
}

pub fn sweep_cmd(
    s: &Scenario,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let params = s.pathplan.as_ref().ok_or_else(|| {
        CliError::new(
            Category::Schema,
            "scenario has no `pathplan` and `grid` sections",
        )
    })?;
    let map = sweep(params).map_err(|e| CliError::new(Category::Schema, e.to_string()))?;
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut sink = BufWriter::new(file);
            emit_region_csv(&map, &mut sink)
                .and_then(|_| sink.flush())
                .map_err(|e| CliError::io(path, e))?;
            writeln!(out, "wrote {} rows to {}", map.cells.len(), path.display())
                .and_then(|_| corner_summary(&map, out))
                .map_err(|e| CliError::new(Category::Io, format!("standard output: {e}")))
        }
        None => {
            emit_region_csv(&map, &mut *out)
                .map_err(|e| CliError::new(Category::Io, format!("standard output: {e}")))?;
            corner_summary(&map, err)
                .map_err(|e| CliError::new(Category::Io, format!("standard error: {e}")))
        }
    }
}

pub fn simulate(
    s: &Scenario,
    trace_path: &Path,
    log_path: Option<&Path>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut setup = s.scheduler_setup().ok_or_else(|| {
        CliError::new(
            Category::Schema,
            "scenario has no `handlers` or `config` section",
        )
    })?;
    if let Some(seed) = seed {
        setup.config.seed = seed;
    }
    let seed = setup.config.seed;
    let text = std::fs::read_to_string(trace_path).map_err(|e| CliError::io(trace_path, e))?;
    let trace = parse_trace(&text)
        .map_err(|e| CliError::new(Category::Trace, format!("{}: {e}", trace_path.display())))?;
    let outcome = run(setup, &trace)?;
    let log = outcome.log.render();
    let stdout_io = |e: io::Error| CliError::new(Category::Io, format!("standard output: {e}"));
    match log_path {
        Some(path) => std::fs::write(path, &log).map_err(|e| CliError::io(path, e))?,
        None => {
            out.write_all(log.as_bytes()).map_err(stdout_io)?;
            writeln!(out).map_err(stdout_io)?;
        }
    }
    let summary = &outcome.summary;
    let decisive = Tier::ALL
        .iter()
        .filter(|t| summary.resolved_at(**t) > 0)
        .map(|t| t.to_string())
        .collect::<Vec<_>>();
    writeln!(out, "seed: {seed}")
        .and_then(|_| writeln!(out, "{summary}"))
        .and_then(|_| {
            if decisive.is_empty() {
                Ok(())
            } else {
                writeln!(out, "tiers used: {}", decisive.join(", "))
            }
        })
        .map_err(stdout_io)
}
