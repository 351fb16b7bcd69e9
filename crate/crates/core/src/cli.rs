//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::diagram::evaluate;
use crate::fd::cross_check;
use crate::geometry::{curvature_with_order, Depth, GeometryError};
use crate::identities::{curvature_identities, recurrence_identities, IdentityResidualSet};
use crate::metric::{FinslerMetric, MetricError, TMPoint};
use crate::recurrence::{
    classify_with_order, theorem_laws, Classification, ConditionId, PointSummary, RecurrenceError,
    RecurrenceReport, Tolerances,
};
use crate::report;
use crate::zoo::{build, builtin, parse_metric_file, ZooError, BUILTIN_NAMES};

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const VIOLATION: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const METRIC: i32 = 4;
    pub const NO_POINTS: i32 = 5;
}

/// Relative deviation above which the finite-difference comparison fails.
pub const ORACLE_TOLERANCE: f64 = 1e-4;
/// Residual above which an applicable identity counts as violated.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "cartan", version, about = "Curvature and recurrence classification of Finsler metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Classify,
    Verify,
    Diagram,
    Oracle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit all fifteen symmetry and recurrence conditions and check the implications between them.
    Classify(RunArgs),
    /// Evaluate curvature identities and the consequences of recurrence.
    Verify(RunArgs),
    /// Evaluate the implication rules and report each rule's status.
    Diagram(RunArgs),
    /// Compare the jet pipeline with finite differences.
    Oracle(RunArgs),
}

impl Command {
    pub fn parts(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Classify(a) => (CommandKind::Classify, a),
            Command::Verify(a) => (CommandKind::Verify, a),
            Command::Diagram(a) => (CommandKind::Diagram, a),
            Command::Oracle(a) => (CommandKind::Oracle, a),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Classify => "classify",
            CommandKind::Verify => "verify",
            CommandKind::Diagram => "diagram",
            CommandKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Built-in metric name or path to a metric file.
    #[arg(long)]
    pub metric: String,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub kappa: f64,
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Derivative depth; defaults to second, or first for `oracle`.
    #[arg(long, value_enum)]
    pub depth: Option<Depth>,
    #[arg(long)]
    pub eps_fit: Option<f64>,
    #[arg(long)]
    pub eps_deg: Option<f64>,
    #[arg(long)]
    pub eps_form: Option<f64>,
    #[arg(long)]
    pub eps_gram: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Resolved configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub metric: String,
    pub n: usize,
    pub kappa: f64,
    pub points: usize,
    pub seed: u64,
    pub order: usize,
    pub depth: Depth,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot load metric: {0}")]
    Metric(String),
    #[error("no valid sample points: {0}")]
    NoPoints(String),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => exit::USAGE,
            CliError::Metric(_) => exit::METRIC,
            CliError::NoPoints(_) => exit::NO_POINTS,
        }
    }
}

impl RunConfig {
    pub fn resolve(kind: CommandKind, a: &RunArgs) -> Result<RunConfig, CliError> {
        let default_depth = if kind == CommandKind::Oracle { Depth::First } else { Depth::Second };
        let depth = a.depth.unwrap_or(default_depth);
        if a.points == 0 {
            return Err(CliError::Usage("--points must be at least 1".into()));
        }
        if a.order < depth.min_order() {
            return Err(CliError::Usage(format!("--order {} is too low for depth {depth}; need at least {}", a.order, depth.min_order())));
        }
        match kind {
            CommandKind::Classify | CommandKind::Diagram if depth != Depth::Second => {
                return Err(CliError::Usage(format!("{} needs --depth second", kind.name())));
            }
            CommandKind::Oracle if depth == Depth::Second => {
                return Err(CliError::Usage("oracle supports --depth base or first only".into()));
            }
            _ => {}
        }
        let d = Tolerances::default();
        let tol = Tolerances {
            eps_fit: a.eps_fit.unwrap_or(d.eps_fit),
            eps_deg: a.eps_deg.unwrap_or(d.eps_deg),
            eps_form: a.eps_form.unwrap_or(d.eps_form),
            eps_gram: a.eps_gram.unwrap_or(d.eps_gram),
        };
        for (name, v) in [("eps-fit", tol.eps_fit), ("eps-deg", tol.eps_deg), ("eps-form", tol.eps_form), ("eps-gram", tol.eps_gram)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")));
            }
        }
        if !a.kappa.is_finite() {
            return Err(CliError::Usage("--kappa must be finite".into()));
        }
        Ok(RunConfig {
            metric: a.metric.clone(),
            n: a.n,
            kappa: a.kappa,
            points: a.points,
            seed: a.seed,
            order: a.order,
            depth,
            tolerances: tol,
            out: a.out.clone(),
            format: a.format,
        })
    }
}

/// Loads a built-in metric by name, or parses and builds a metric file.
pub fn load_metric(cfg: &RunConfig) -> Result<FinslerMetric, CliError> {
    if BUILTIN_NAMES.contains(&cfg.metric.as_str()) {
        let spec = builtin(&cfg.metric, cfg.n, cfg.kappa).map_err(|e| CliError::Usage(e.to_string()))?;
        return build(&spec).map_err(|e| CliError::Usage(e.to_string()));
    }
    let path = Path::new(&cfg.metric);
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Metric(format!("'{}' is neither a built-in metric nor a readable file ({e})", cfg.metric)))?;
    metric_from_source(&src)
}

/// Parses and builds the contents of a metric file.
pub fn metric_from_source(src: &str) -> Result<FinslerMetric, CliError> {
    let spec = parse_metric_file(src).map_err(|e| CliError::Metric(e.to_string()))?;
    build(&spec).map_err(|e| match e {
        ZooError::Metric(MetricError::NoValidPoints) => CliError::NoPoints(e.to_string()),
        _ => CliError::Metric(e.to_string()),
    })
}

/// Report and exit code of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub code: i32,
}

fn samples(m: &FinslerMetric, cfg: &RunConfig) -> Result<Vec<TMPoint>, CliError> {
    let pts = m.sample_points(cfg.points, cfg.seed);
    if pts.is_empty() {
        return Err(CliError::NoPoints(format!("none of the sampled points of '{}' lie in the metric's domain", m.label())));
    }
    Ok(pts)
}

fn classification(m: &FinslerMetric, cfg: &RunConfig, pts: &[TMPoint]) -> Result<Classification, CliError> {
    classify_with_order(m, pts, &cfg.tolerances, cfg.order).map_err(|e| match e {
        RecurrenceError::Dimension(_) => CliError::Usage(e.to_string()),
        _ => CliError::NoPoints(e.to_string()),
    })
}

fn notes(rejected: &[(usize, String)], requested: usize, obtained: usize, fitted: bool) -> Value {
    let mut out = Vec::new();
    if fitted {
        out.push(Value::from("recurrence forms are fitted along horizontal directions only"));
    }
    if obtained < requested {
        out.push(format!("{obtained} of {requested} requested points lie in the domain").into());
    }
    for (i, why) in rejected {
        out.push(format!("point {i} rejected: {why}").into());
    }
    Value::Array(out)
}

fn verdict_code(report: &RecurrenceReport, any_violation: bool) -> i32 {
    if any_violation {
        exit::VIOLATION
    } else if report.all_degenerate() {
        exit::DEGENERATE
    } else {
        exit::OK
    }
}

fn run_classify(m: &FinslerMetric, cfg: &RunConfig, diagram_only: bool) -> Result<Outcome, CliError> {
    let pts = samples(m, cfg)?;
    let c = classification(m, cfg, &pts)?;
    let eval = evaluate(&c.report, &cfg.tolerances).map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = if diagram_only { CommandKind::Diagram } else { CommandKind::Classify };
    let mut report = json!({
        "meta": report::meta(kind.name(), cfg, m.label(), m.dim()),
        "points": report::points_section(&c.report.points),
        "tensors": report::tensors_section(&c.report.points),
        "verdicts": report::verdicts_section(&c.report, &ConditionId::ALL),
        "diagram": report::diagram_section(&eval),
        "coverage": report::coverage_section(&eval),
        "any_violation": eval.any_violation,
        "notes": notes(&c.rejected, cfg.points, pts.len(), true),
    });
    if !diagram_only {
        let laws = c.analyses.iter().map(|a| theorem_laws(a, &c.report)).collect::<Result<Vec<_>, _>>().map_err(geometry_failure)?;
        let ids = identity_sets(&c, cfg)?;
        report["laws"] = report::laws_section(&laws);
        report["identities"] = report::identities_section(&ids);
    }
    Ok(Outcome { code: verdict_code(&c.report, eval.any_violation), report })
}

fn geometry_failure(e: GeometryError) -> CliError {
    CliError::NoPoints(e.to_string())
}

fn identity_sets(c: &Classification, cfg: &RunConfig) -> Result<Vec<IdentityResidualSet>, CliError> {
    c.analyses
        .iter()
        .map(|a| {
            let mut set = curvature_identities(&a.bundle, cfg.tolerances.eps_form)?;
            set.extend(recurrence_identities(a, &c.report)?);
            Ok(set)
        })
        .collect::<Result<Vec<_>, GeometryError>>()
        .map_err(geometry_failure)
}

const VERIFY_CONDITIONS: [ConditionId; 6] =
    [ConditionId::F, ConditionId::F2, ConditionId::GF, ConditionId::G2F, ConditionId::CF, ConditionId::GCF];

fn identity_violation(sets: &[IdentityResidualSet]) -> bool {
    sets.iter().flat_map(|s| s.values()).any(|v| v.applicable && !(v.residual <= IDENTITY_TOLERANCE))
}

fn run_verify(m: &FinslerMetric, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pts = samples(m, cfg)?;
    let meta = report::meta(CommandKind::Verify.name(), cfg, m.label(), m.dim());
    if cfg.depth == Depth::Second {
        let c = classification(m, cfg, &pts)?;
        let sets = identity_sets(&c, cfg)?;
        let violation = identity_violation(&sets);
        let report = json!({
            "meta": meta,
            "points": report::points_section(&c.report.points),
            "tensors": report::tensors_section(&c.report.points),
            "verdicts": report::verdicts_section(&c.report, &VERIFY_CONDITIONS),
            "identities": report::identities_section(&sets),
            "any_violation": violation,
            "notes": notes(&c.rejected, cfg.points, pts.len(), true),
        });
        return Ok(Outcome { code: verdict_code(&c.report, violation), report });
    }
    let results: Vec<_> = pts
        .par_iter()
        .map(|p| {
            let b = curvature_with_order(m, p, cfg.depth, cfg.order)?;
            let set = curvature_identities(&b, cfg.tolerances.eps_form)?;
            Ok::<_, GeometryError>((PointSummary::from_bundle(&b), set))
        })
        .collect();
    let mut summaries = Vec::new();
    let mut sets = Vec::new();
    let mut rejected = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((s, set)) => {
                summaries.push(s);
                sets.push(set);
            }
            Err(e) => rejected.push((i, e.to_string())),
        }
    }
    if sets.is_empty() {
        return Err(CliError::NoPoints(rejected[0].1.clone()));
    }
    let violation = identity_violation(&sets);
    let report = json!({
        "meta": meta,
        "points": report::points_section(&summaries),
        "tensors": report::tensors_section(&summaries),
        "identities": report::identities_section(&sets),
        "any_violation": violation,
        "notes": notes(&rejected, cfg.points, pts.len(), false),
    });
    Ok(Outcome { code: if violation { exit::VIOLATION } else { exit::OK }, report })
}

fn run_oracle(m: &FinslerMetric, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let pts = samples(m, cfg)?;
    let results: Vec<_> = pts.par_iter().map(|p| cross_check(m, p, cfg.depth, cfg.order)).collect();
    let mut used = Vec::new();
    let mut devs = Vec::new();
    let mut rejected = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => {
                used.push(json!({ "x": report::to_value(&pts[i].x), "y": report::to_value(&pts[i].y) }));
                devs.push(d);
            }
            Err(e) => rejected.push((i, e.to_string())),
        }
    }
    if devs.is_empty() {
        return Err(CliError::NoPoints(rejected[0].1.clone()));
    }
    let (section, worst) = report::oracle_section(&devs);
    let exceeded = !(worst <= ORACLE_TOLERANCE);
    let report = json!({
        "meta": report::meta(CommandKind::Oracle.name(), cfg, m.label(), m.dim()),
        "points": used,
        "oracle": section,
        "any_violation": exceeded,
        "notes": notes(&rejected, cfg.points, pts.len(), false),
    });
    Ok(Outcome { code: if exceeded { exit::VIOLATION } else { exit::OK }, report })
}

/// Runs a command and returns its report; does not write anything.
pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    execute_on(&load_metric(cfg)?, kind, cfg)
}

/// Runs a command on an already built metric. `cfg.metric` is only echoed.
pub fn execute_on(m: &FinslerMetric, kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match kind {
        CommandKind::Classify => run_classify(m, cfg, false),
        CommandKind::Diagram => run_classify(m, cfg, true),
        CommandKind::Verify => run_verify(m, cfg),
        CommandKind::Oracle => run_oracle(m, cfg),
    }
}

/// Renders a report in the configured format.
pub fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => report::canonical_json(report),
        Format::Text => report::render_text(report),
    }
}

/// Full command-line run: parse, execute, write the report. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let (kind, args) = cli.command.parts();
    let result = RunConfig::resolve(kind, args).and_then(|cfg| {
        let outcome = execute(kind, &cfg)?;
        let text = render(&outcome.report, cfg.format);
        match &cfg.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(outcome.code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cartan: {e}");
            e.exit_code()
        }
    }
}
