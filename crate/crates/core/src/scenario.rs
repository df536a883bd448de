//! The JSON scenario format.
//!
//! A scenario may hold a control problem (`spaces`, `prior`, `utility`,
//! `methods`), a scheduler setup (`handlers`, `rules`, `config`,
//! `annotations`) and a path-planning sweep (`pathplan`, `grid`). Unknown
//! keys are rejected. Validation reports every problem it finds, each with
//! the JSON path it concerns.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::{
    Channel, ControlProblem, CostCombiner, Distribution, Label, MethodKind, MethodModel,
    UtilityModel,
};
use crate::methods::{
    make_recommendation_channel, realize_channel, Dispersion, QualityShape, RecommendationChannel,
    ResourceProfile,
};
use crate::pathplan::{PathMethod, PathPlanParams, SweepGrid};
use crate::scheduler::{ConflictRule, Handler, PlanAnnotation, RunConfig, SchedulerSetup};

const MASS_TOLERANCE: f64 = 1e-9;

// ---- file format --------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spaces: Option<SpacesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handlers: Option<Vec<Handler>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<ConflictRule>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<PlanAnnotation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathplan: Option<PathPlanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSpec {
    pub states: Vec<String>,
    pub decisions: Vec<String>,
    /// Signals of state-estimation channels.
    #[serde(default)]
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerSpec {
    #[default]
    Subtract,
    Scaled(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    /// `table[x][d]`.
    pub table: Vec<Vec<f64>>,
    #[serde(default)]
    pub cost_combiner: CombinerSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// Rows indexed by state.
    #[default]
    State,
    /// Rows indexed by optimal decision; signals are decisions.
    Recommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub kind: ChannelKind,
    pub signals: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionSpec {
    #[default]
    Uniform,
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendationSpec {
    pub p_optimal: f64,
    #[serde(default)]
    pub dispersion: DispersionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Constant(f64),
    Ramp { work: f64 },
    Threshold { min_ticks: u64 },
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub base: ChannelSpec,
    pub shape: ShapeSpec,
    /// Ticks available before the next interrupt.
    pub ticks: u64,
    #[serde(default = "one")]
    pub processors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub values: Vec<f64>,
    /// Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

/// A method gives exactly one of `channel`, `recommendation`, `profile`.
/// A missing cost is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendation: Option<RecommendationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathMethodSpec {
    pub id: String,
    pub runtime: u64,
    pub cost: f64,
    pub p_success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathPlanSpec {
    pub routes: usize,
    /// Least to most thorough.
    pub methods: Vec<PathMethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub ticks: Vec<u64>,
    pub error_costs: Vec<f64>,
}

// ---- errors -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    /// Shape, range or consistency problem.
    Schema,
    /// A reference to an undeclared label.
    Label,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::Schema => "schema",
            IssueKind::Label => "label",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub kind: IssueKind,
    /// JSON path, e.g. `methods[1].cost.probs`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.kind, self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line} column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", .0.iter().map(Issue::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
}

impl ScenarioError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

// ---- validated scenario -------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub context: String,
    pub problem: Option<ControlProblem<f64>>,
    pub handlers: Vec<Handler>,
    pub rules: Vec<ConflictRule>,
    pub config: Option<RunConfig>,
    pub annotations: Vec<PlanAnnotation>,
    pub pathplan: Option<PathPlanParams<f64>>,
}

impl Scenario {
    /// The scheduler setup, when the scenario declares handlers.
    pub fn scheduler_setup(&self) -> Option<SchedulerSetup> {
        if self.handlers.is_empty() && self.config.is_none() {
            return None;
        }
        Some(SchedulerSetup {
            handlers: self.handlers.clone(),
            rules: self.rules.clone(),
            context: self.problem.clone(),
            annotations: self.annotations.clone(),
            config: self.config.clone().unwrap_or_default(),
        })
    }

    /// Back to file form. Every method is written as an explicit channel,
    /// so profiles and recommendation specs come back realized.
    pub fn to_file(&self) -> ScenarioFile {
        let mut file = ScenarioFile {
            context: Some(self.context.clone()),
            ..ScenarioFile::default()
        };
        if let Some(p) = &self.problem {
            let mut signals: Vec<String> = Vec::new();
            for m in p.methods() {
                if m.kind == MethodKind::StateEstimation {
                    for s in m.channel.signals() {
                        if !signals.contains(s) {
                            signals.push(s.clone());
                        }
                    }
                }
            }
            file.spaces = Some(SpacesSpec {
                states: p.states().to_vec(),
                decisions: p.decisions().to_vec(),
                signals,
            });
            file.prior = Some(p.prior().masses().to_vec());
            file.utility = Some(UtilitySpec {
                table: p.utility().table().to_vec(),
                cost_combiner: match p.utility().combiner() {
                    CostCombiner::Subtract => CombinerSpec::Subtract,
                    CostCombiner::Scaled(k) => CombinerSpec::Scaled(*k),
                },
            });
            file.methods = Some(
                p.methods()
                    .iter()
                    .map(|m| MethodSpec {
                        id: m.id.clone(),
                        channel: Some(ChannelSpec {
                            kind: match m.kind {
                                MethodKind::StateEstimation => ChannelKind::State,
                                MethodKind::Recommendation => ChannelKind::Recommendation,
                            },
                            signals: m.channel.signals().to_vec(),
                            rows: m.channel.rows().to_vec(),
                        }),
                        recommendation: None,
                        profile: None,
                        cost: Some(CostSpec {
                            values: m.cost.outcomes().to_vec(),
                            probs: Some(m.cost.masses().to_vec()),
                        }),
                    })
                    .collect(),
            );
        }
        if !self.handlers.is_empty() {
            file.handlers = Some(self.handlers.clone());
        }
        if !self.rules.is_empty() {
            file.rules = Some(self.rules.clone());
        }
        file.config = self.config.clone();
        if !self.annotations.is_empty() {
            file.annotations = Some(self.annotations.clone());
        }
        if let Some(pp) = &self.pathplan {
            file.pathplan = Some(PathPlanSpec {
                routes: pp.routes(),
                methods: pp
                    .methods()
                    .iter()
                    .map(|m| PathMethodSpec {
                        id: m.id.clone(),
                        runtime: m.runtime,
                        cost: m.compute_cost,
                        p_success: m.p_success,
                    })
                    .collect(),
                prior: Some(pp.prior().masses().to_vec()),
            });
            file.grid = Some(GridSpec {
                ticks: pp.grid().ticks.clone(),
                error_costs: pp.grid().error_costs.clone(),
            });
        }
        file
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario files always serialize")
    }
}

// ---- loading ------------------------------------------------------------

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file = parse_file(text)?;
    validate(&file).map_err(ScenarioError::Invalid)
}

/// Parses without semantic validation. Type errors and unknown keys come
/// back as schema issues with their path; malformed JSON as a parse error.
pub fn parse_file(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let result: Result<ScenarioFile, _> = serde_path_to_error::deserialize(&mut de);
    let file = result.map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            ScenarioError::Invalid(vec![Issue {
                kind: IssueKind::Schema,
                path,
                message: inner.to_string(),
            }])
        } else {
            ScenarioError::Parse {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        }
    })?;
    de.end().map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(file)
}

#[derive(Default)]
struct Issues(Vec<Issue>);

impl Issues {
    fn schema(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            kind: IssueKind::Schema,
            path: path.into(),
            message: message.into(),
        });
    }

    fn label(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            kind: IssueKind::Label,
            path: path.into(),
            message: message.into(),
        });
    }

    fn count(&self) -> usize {
        self.0.len()
    }

    /// Checks a probability vector: finite, nonnegative, summing to one.
    fn masses(&mut self, path: &str, masses: &[f64]) -> bool {
        let before = self.count();
        for (i, m) in masses.iter().enumerate() {
            if *m < 0.0 {
                self.schema(format!("{path}[{i}]"), format!("negative mass {m}"));
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            self.schema(path, format!("masses sum to {total}, expected 1"));
        }
        self.count() == before
    }

    fn unique(&mut self, path: &str, labels: &[String]) {
        let mut seen = BTreeSet::new();
        for (i, l) in labels.iter().enumerate() {
            if !seen.insert(l) {
                self.schema(format!("{path}[{i}]"), format!("duplicate label `{l}`"));
            }
        }
    }
}

/// Checks every section and builds the scenario, or returns all issues.
pub fn validate(file: &ScenarioFile) -> Result<Scenario, Vec<Issue>> {
    let mut issues = Issues::default();
    let context = file.context.clone().unwrap_or_else(|| "scenario".into());
    let problem = validate_problem(file, &context, &mut issues);
    validate_scheduler(file, &mut issues);
    let pathplan = validate_pathplan(file, &mut issues);
    if issues.0.is_empty() {
        Ok(Scenario {
            context,
            problem,
            handlers: file.handlers.clone().unwrap_or_default(),
            rules: file.rules.clone().unwrap_or_default(),
            config: file.config.clone(),
            annotations: file.annotations.clone().unwrap_or_default(),
            pathplan,
        })
    } else {
        Err(issues.0)
    }
}

fn validate_problem(
    file: &ScenarioFile,
    context: &str,
    issues: &mut Issues,
) -> Option<ControlProblem<f64>> {
    let any = file.spaces.is_some()
        || file.prior.is_some()
        || file.utility.is_some()
        || file.methods.is_some();
    if !any {
        return None;
    }
    for (present, name) in [
        (file.spaces.is_some(), "spaces"),
        (file.prior.is_some(), "prior"),
        (file.utility.is_some(), "utility"),
        (file.methods.is_some(), "methods"),
    ] {
        if !present {
            issues.schema(name, "missing section");
        }
    }
    let before = issues.count();
    let spaces = file.spaces.as_ref()?;
    if spaces.states.is_empty() {
        issues.schema("spaces.states", "empty");
    }
    if spaces.decisions.is_empty() {
        issues.schema("spaces.decisions", "empty");
    }
    issues.unique("spaces.states", &spaces.states);
    issues.unique("spaces.decisions", &spaces.decisions);
    issues.unique("spaces.signals", &spaces.signals);

    if let Some(prior) = &file.prior {
        if prior.len() != spaces.states.len() {
            issues.schema(
                "prior",
                format!("{} masses for {} states", prior.len(), spaces.states.len()),
            );
        } else {
            issues.masses("prior", prior);
        }
    }

    if let Some(u) = &file.utility {
        if u.table.len() != spaces.states.len() {
            issues.schema(
                "utility.table",
                format!("{} rows for {} states", u.table.len(), spaces.states.len()),
            );
        }
        for (i, row) in u.table.iter().enumerate() {
            if row.len() != spaces.decisions.len() {
                issues.schema(
                    format!("utility.table[{i}]"),
                    format!(
                        "{} entries for {} decisions",
                        row.len(),
                        spaces.decisions.len()
                    ),
                );
            }
        }
        if let CombinerSpec::Scaled(k) = u.cost_combiner {
            if k <= 0.0 {
                issues.schema(
                    "utility.cost_combiner.scaled",
                    format!("rate {k} must be positive"),
                );
            }
        }
    }

    let mut models = Vec::new();
    if let Some(methods) = &file.methods {
        if methods.is_empty() {
            issues.schema("methods", "no methods");
        }
        let mut ids = BTreeSet::new();
        for (i, m) in methods.iter().enumerate() {
            let path = format!("methods[{i}]");
            if !ids.insert(m.id.as_str()) {
                issues.schema(
                    format!("{path}.id"),
                    format!("duplicate method id `{}`", m.id),
                );
            }
            if let Some(model) = validate_method(m, &path, spaces, issues) {
                models.push(model);
            }
        }
    }

    if issues.count() != before {
        return None;
    }
    let u = file.utility.as_ref()?;
    let prior = file.prior.clone()?;
    let combiner = match u.cost_combiner {
        CombinerSpec::Subtract => CostCombiner::Subtract,
        CombinerSpec::Scaled(k) => CostCombiner::Scaled(k),
    };
    let built = UtilityModel::new(
        spaces.states.clone(),
        spaces.decisions.clone(),
        u.table.clone(),
        combiner,
    )
    .and_then(|utility| {
        let prior = Distribution::new(spaces.states.clone(), prior)?;
        ControlProblem::new(context, prior, utility, models)
    });
    match built {
        Ok(p) => Some(p),
        Err(e) => {
            issues.schema("methods", e.to_string());
            None
        }
    }
}

fn validate_channel(
    spec: &ChannelSpec,
    path: &str,
    spaces: &SpacesSpec,
    issues: &mut Issues,
) -> Option<(MethodKind, Channel<f64>)> {
    let before = issues.count();
    let (kind, inputs, allowed, what) = match spec.kind {
        ChannelKind::State => (
            MethodKind::StateEstimation,
            &spaces.states,
            &spaces.signals,
            "signal",
        ),
        ChannelKind::Recommendation => (
            MethodKind::Recommendation,
            &spaces.decisions,
            &spaces.decisions,
            "decision",
        ),
    };
    for (j, s) in spec.signals.iter().enumerate() {
        if !allowed.contains(s) {
            issues.label(
                format!("{path}.signals[{j}]"),
                format!("undeclared {what} `{s}`"),
            );
        }
    }
    issues.unique(&format!("{path}.signals"), &spec.signals);
    if spec.rows.len() != inputs.len() {
        issues.schema(
            format!("{path}.rows"),
            format!("{} rows for {} inputs", spec.rows.len(), inputs.len()),
        );
    }
    for (r, row) in spec.rows.iter().enumerate() {
        let rp = format!("{path}.rows[{r}]");
        if row.len() != spec.signals.len() {
            issues.schema(
                &rp,
                format!("{} entries for {} signals", row.len(), spec.signals.len()),
            );
        } else {
            issues.masses(&rp, row);
        }
    }
    if issues.count() != before {
        return None;
    }
    match Channel::new(inputs.clone(), spec.signals.clone(), spec.rows.clone()) {
        Ok(c) => Some((kind, c)),
        Err(e) => {
            issues.schema(path, e.to_string());
            None
        }
    }
}

fn validate_method(
    m: &MethodSpec,
    path: &str,
    spaces: &SpacesSpec,
    issues: &mut Issues,
) -> Option<MethodModel<f64>> {
    let given = [
        m.channel.is_some(),
        m.recommendation.is_some(),
        m.profile.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if given != 1 {
        issues.schema(
            path,
            "exactly one of `channel`, `recommendation`, `profile` is required",
        );
    }
    let cost = match &m.cost {
        None => Some(Distribution::point(0.0)),
        Some(c) => {
            let cp = format!("{path}.cost");
            let before = issues.count();
            if c.values.is_empty() {
                issues.schema(format!("{cp}.values"), "empty");
            }
            for (i, v) in c.values.iter().enumerate() {
                if *v < 0.0 {
                    issues.schema(format!("{cp}.values[{i}]"), format!("negative cost {v}"));
                }
            }
            let probs = match &c.probs {
                Some(p) if p.len() != c.values.len() => {
                    issues.schema(
                        format!("{cp}.probs"),
                        format!("{} probabilities for {} values", p.len(), c.values.len()),
                    );
                    None
                }
                Some(p) => issues.masses(&format!("{cp}.probs"), p).then(|| p.clone()),
                None => Some(vec![1.0 / c.values.len().max(1) as f64; c.values.len()]),
            };
            if issues.count() != before {
                None
            } else {
                match Distribution::new(c.values.clone(), probs?) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        issues.schema(cp, e.to_string());
                        None
                    }
                }
            }
        }
    };
    if given != 1 {
        return None;
    }

    let channel = if let Some(spec) = &m.channel {
        validate_channel(spec, &format!("{path}.channel"), spaces, issues)
    } else if let Some(rec) = &m.recommendation {
        let rp = format!("{path}.recommendation");
        let dispersion = match &rec.dispersion {
            DispersionSpec::Uniform => Dispersion::Uniform,
            DispersionSpec::Rows(rows) => Dispersion::Rows(rows.clone()),
        };
        let spec = RecommendationChannel {
            decisions: spaces.decisions.clone(),
            p_optimal: rec.p_optimal,
            dispersion,
        };
        match make_recommendation_channel(&spec) {
            Ok(c) => Some((MethodKind::Recommendation, c)),
            Err(e) => {
                issues.schema(rp, e.to_string());
                None
            }
        }
    } else {
        let profile = m.profile.as_ref()?;
        let pp = format!("{path}.profile");
        let base = validate_channel(&profile.base, &format!("{pp}.base"), spaces, issues);
        let shape = match profile.shape {
            ShapeSpec::Constant(q) => QualityShape::Constant(q),
            ShapeSpec::Ramp { work } => QualityShape::Ramp { work },
            ShapeSpec::Threshold { min_ticks } => QualityShape::Threshold { min_ticks },
        };
        base.and_then(|(kind, base)| {
            let realized = ResourceProfile::new(base, shape)
                .and_then(|p| realize_channel(&p, profile.ticks, profile.processors));
            match realized {
                Ok(c) => Some((kind, c)),
                Err(e) => {
                    issues.schema(pp, e.to_string());
                    None
                }
            }
        })
    };
    let (kind, channel) = channel?;
    match MethodModel::new(m.id.clone(), kind, channel, cost?) {
        Ok(model) => Some(model),
        Err(e) => {
            issues.schema(path, e.to_string());
            None
        }
    }
}

fn validate_scheduler(file: &ScenarioFile, issues: &mut Issues) {
    let handlers = file.handlers.as_deref().unwrap_or_default();
    let methods: BTreeSet<&str> = file
        .methods
        .iter()
        .flatten()
        .map(|m| m.id.as_str())
        .collect();
    let mut ids = BTreeSet::new();
    for (i, h) in handlers.iter().enumerate() {
        let path = format!("handlers[{i}]");
        if !ids.insert(h.id.as_str()) {
            issues.schema(
                format!("{path}.id"),
                format!("duplicate handler id `{}`", h.id),
            );
        }
        if let Err(e) = h.validate() {
            issues.schema(&path, e.to_string());
        }
        if let Some(m) = &h.method {
            if !methods.contains(m.as_str()) {
                issues.label(format!("{path}.method"), format!("undeclared method `{m}`"));
            }
        }
    }
    for (i, rule) in file.rules.iter().flatten().enumerate() {
        if rule.order.len() < 2 {
            issues.schema(
                format!("rules[{i}].order"),
                "a rule orders at least two handlers",
            );
        }
        for (j, h) in rule.order.iter().enumerate() {
            if !ids.contains(h.as_str()) {
                issues.label(
                    format!("rules[{i}].order[{j}]"),
                    format!("undeclared handler `{h}`"),
                );
            }
        }
    }
    if let Some(c) = &file.config {
        if c.quantum == 0 {
            issues.schema("config.quantum", "must be at least 1");
        }
    }
}

fn validate_pathplan(file: &ScenarioFile, issues: &mut Issues) -> Option<PathPlanParams<f64>> {
    let spec = match (&file.pathplan, &file.grid) {
        (None, None) => return None,
        (Some(_), None) => {
            issues.schema("grid", "required with `pathplan`");
            return None;
        }
        (None, Some(_)) => {
            issues.schema("pathplan", "required with `grid`");
            return None;
        }
        (Some(p), Some(_)) => p,
    };
    let grid = file.grid.as_ref()?;
    let methods = spec
        .methods
        .iter()
        .map(|m| PathMethod {
            id: m.id.clone() as Label,
            runtime: m.runtime,
            compute_cost: m.cost,
            p_success: m.p_success,
        })
        .collect();
    let grid = SweepGrid {
        ticks: grid.ticks.clone(),
        error_costs: grid.error_costs.clone(),
    };
    match PathPlanParams::new(spec.routes, methods, grid, spec.prior.clone()) {
        Ok(p) => Some(p),
        Err(e) => {
            issues.schema("pathplan", e.to_string());
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: &str = r#"{
        "context": "p1",
        "spaces": {"states": ["x1", "x2"], "decisions": ["d1", "d2"], "signals": ["s1", "s2"]},
        "prior": [0.6, 0.4],
        "utility": {"table": [[100, 0], [0, 100]]},
        "methods": [
            {"id": "null", "channel": {"signals": ["s1"], "rows": [[1], [1]]}},
            {"id": "noisy", "channel": {"signals": ["s1", "s2"], "rows": [[0.8, 0.2], [0.2, 0.8]]},
             "cost": {"values": [10]}},
            {"id": "perfect", "channel": {"signals": ["s1", "s2"], "rows": [[1, 0], [0, 1]]},
             "cost": {"values": [20]}}
        ]
    }"#;

    #[test]
    fn loads_p1() {
        let s = parse_scenario(P1).unwrap();
        let p = s.problem.as_ref().unwrap();
        assert_eq!(p.states().len(), 2);
        assert_eq!(p.decisions().len(), 2);
        assert_eq!(p.methods().len(), 3);
        assert!(s.pathplan.is_none());
        assert!(s.scheduler_setup().is_none());
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(P1).unwrap();
        let again = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn prior_must_sum_to_one() {
        let text = P1.replace("[0.6, 0.4]", "[0.5, 0.4]");
        let err = parse_scenario(&text).unwrap_err();
        let issues = err.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "prior");
        assert_eq!(issues[0].kind, IssueKind::Schema);
    }

    #[test]
    fn undeclared_signal() {
        let text = P1.replace(
            r#""signals": ["s1", "s2"], "rows": [[1, 0]"#,
            r#""signals": ["s1", "s9"], "rows": [[1, 0]"#,
        );
        let err = parse_scenario(&text).unwrap_err();
        let issues = err.issues();
        assert_eq!(issues[0].kind, IssueKind::Label);
        assert_eq!(issues[0].path, "methods[2].channel.signals[1]");
    }

    #[test]
    fn collects_every_issue() {
        let text = P1
            .replace("[0.6, 0.4]", "[0.6, 0.6]")
            .replace(r#""values": [20]"#, r#""values": [-20]"#);
        let err = parse_scenario(&text).unwrap_err();
        let paths: Vec<_> = err.issues().iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, vec!["prior", "methods[2].cost.values[0]"]);
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let text = P1.replace(r#""prior""#, r#""priors": [1], "prior""#);
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.issues()[0].message.contains("unknown field `priors`"));

        let text = P1.replace(r#""cost": {"values": [10]}"#, r#""cost": {"value": [10]}"#);
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.issues()[0].path, "methods[1].cost.value");
    }

    #[test]
    fn malformed_json_has_position() {
        let err = parse_scenario("{\n  \"prior\": [0.5,\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_section() {
        let text = r#"{"spaces": {"states": ["a"], "decisions": ["d"]}, "prior": [1],
                       "methods": [{"id": "m", "recommendation": {"p_optimal": 1}}]}"#;
        let err = parse_scenario(text).unwrap_err();
        assert_eq!(err.issues()[0].path, "utility");
    }

    #[test]
    fn recommendation_and_profile_methods() {
        let text = r#"{
            "spaces": {"states": ["x1", "x2"], "decisions": ["d1", "d2"], "signals": ["s1", "s2"]},
            "prior": [0.5, 0.5],
            "utility": {"table": [[1, 0], [0, 1]], "cost_combiner": {"scaled": 2}},
            "methods": [
                {"id": "rec", "recommendation": {"p_optimal": 0.9}},
                {"id": "prof", "profile": {
                    "base": {"signals": ["s1", "s2"], "rows": [[1, 0], [0, 1]]},
                    "shape": {"ramp": {"work": 4}}, "ticks": 2, "processors": 1}}
            ]
        }"#;
        let s = parse_scenario(text).unwrap();
        let p = s.problem.as_ref().unwrap();
        assert_eq!(p.methods()[0].kind, MethodKind::Recommendation);
        assert_eq!(p.methods()[1].channel.rows()[0], vec![0.75, 0.25]);
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn pathplan_section() {
        let text = r#"{
            "pathplan": {"routes": 3, "methods": [
                {"id": "F", "runtime": 1, "cost": 1, "p_success": 0.6},
                {"id": "B", "runtime": 4, "cost": 4, "p_success": 0.85}]},
            "grid": {"ticks": [1, 5], "error_costs": [10, 50]}
        }"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.pathplan.as_ref().unwrap().methods().len(), 2);
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);

        let bad = text.replace("0.85", "0.2");
        assert_eq!(
            parse_scenario(&bad).unwrap_err().issues()[0].path,
            "pathplan"
        );
    }

    #[test]
    fn handler_references() {
        let text = r#"{
            "handlers": [{"id": "F", "trigger": {"on": "fact", "key": "goal"},
                          "base_priority": 1, "body": [{"duration": 1}], "method": "fast"}],
            "rules": [{"order": ["F", "B"]}],
            "config": {"budget": 4}
        }"#;
        let err = parse_scenario(text).unwrap_err();
        let paths: Vec<_> = err.issues().iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, vec!["handlers[0].method", "rules[0].order[1]"]);
    }
}
