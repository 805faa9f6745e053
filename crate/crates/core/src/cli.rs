//! Command-line front end: JSON run configuration, orchestration of the
//! experiment families, and deterministic CSV output.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
//! numerical failure (blowup, degeneracy, Newton divergence). Numerical
//! failures still write whatever output was produced, with the failure
//! recorded in the CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::experiments::{
    self, compare_decompositions, default_ladder, fingerprint, measure_errors, realistic_nodes,
    realistic_steps, ErrorRecord, InitialPulse, MeasureOptions, RunReport, Scenario, ScenarioKind,
};
use crate::grid::{BoundaryMode, Grid1D};
use crate::model::{Decomposition, ModelParams, State};
use crate::splitting::{Integrator, IntegratorConfig, SplitScheme};
use crate::subsolvers::{InnerScheme, SchemeKind, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL};

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_SIGMA: f64 = 0.25;

/// Inline scenario description for `"scenario": {...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub half_width: f64,
    #[serde(default = "default_bc")]
    pub bc: BoundaryMode,
    pub initial: InitialPulse,
}

fn default_bc() -> BoundaryMode {
    BoundaryMode::DirichletZero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Named(String),
    Custom(CustomScenario),
}

/// Explicit splitting coefficients `[[a1, b1], [a2, b2], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeCoefficients {
    #[serde(default)]
    pub name: Option<String>,
    pub coefficients: Vec<(f64, f64)>,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeSpec {
    Preset(String),
    Coefficients(SchemeCoefficients),
}

/// A step size given either as a number or as a fraction `"1/10"` of `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderEntry {
    Value(f64),
    Fraction(String),
}

/// Run configuration as read from JSON; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub decomposition: Option<String>,
    #[serde(default)]
    pub scheme: Option<SchemeSpec>,
    #[serde(default, rename = "inner_A")]
    pub inner_a: Option<String>,
    #[serde(default, rename = "inner_B")]
    pub inner_b: Option<String>,
    #[serde(default, rename = "substeps_A")]
    pub substeps_a: Option<usize>,
    #[serde(default, rename = "substeps_B")]
    pub substeps_b: Option<usize>,
    #[serde(default)]
    pub newton_tol: Option<f64>,
    #[serde(default)]
    pub newton_max_iter: Option<usize>,
    #[serde(default)]
    pub nu_min: Option<f64>,
    #[serde(default, rename = "M")]
    pub num_nodes: Option<usize>,
    #[serde(default, rename = "N")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub ladder: Option<Vec<LadderEntry>>,
    #[serde(default, rename = "T")]
    pub t_final: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub trajectory_stride: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub refinement: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

/// Fully resolved configuration; its serialization is the fingerprint
/// input. The output directory is deliberately not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub integrator: IntegratorConfig,
    pub steps: usize,
    pub ladder: Vec<f64>,
    pub refinement: usize,
    pub sigma: f64,
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ResolvedConfig {
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// Failure of a CLI invocation, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Parses a JSON configuration text. Line/column context comes from the
/// JSON parser; unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn parse_fraction(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Usage(format!("invalid step size {s:?}"));
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            Ok(num / den)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Parses `"1/10,1/20,..."`; fractions are relative to `T`.
pub fn parse_ladder(text: &str) -> Result<Vec<LadderEntry>, CliError> {
    text.split(',')
        .map(|s| {
            parse_fraction(s)?;
            Ok(LadderEntry::Fraction(s.trim().to_string()))
        })
        .collect()
}

fn scheme_kind(s: &str) -> Result<SchemeKind, CliError> {
    s.parse().map_err(CliError::from)
}

impl RunConfig {
    /// Applies defaults and validates mutual consistency.
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let sigma = self.sigma.unwrap_or(DEFAULT_SIGMA);
        let mut scenario = match &self.scenario {
            None => Scenario::model_problem(),
            Some(ScenarioSpec::Named(name)) => match name.as_str() {
                "model_problem" => Scenario::model_problem(),
                "realistic" => Scenario::realistic(sigma)?,
                other => return Err(CliError::Usage(format!("unknown scenario {other:?}"))),
            },
            Some(ScenarioSpec::Custom(c)) => {
                let base = Scenario::model_problem();
                Scenario {
                    kind: ScenarioKind::Custom,
                    params: ModelParams::new(c.alpha, c.beta, c.gamma)?,
                    half_width: c.half_width,
                    num_nodes: base.num_nodes,
                    bc: c.bc,
                    initial: c.initial,
                    t_final: base.t_final,
                }
            }
        };
        if let Some(m) = self.num_nodes {
            scenario.num_nodes = m;
        }
        if let Some(t) = self.t_final {
            scenario.t_final = t;
        }
        scenario.validate()?;

        let decomposition: Decomposition = match &self.decomposition {
            None => Decomposition::I,
            Some(s) => s.parse()?,
        };
        let scheme = match &self.scheme {
            None => SplitScheme::lie_ab(),
            Some(SchemeSpec::Preset(name)) => SplitScheme::by_name(name)?,
            Some(SchemeSpec::Coefficients(c)) => SplitScheme::new(
                c.name.clone().unwrap_or_else(|| "custom".into()),
                c.coefficients.clone(),
                c.order,
            )?,
        };
        let periodic = scenario.bc == BoundaryMode::Periodic;
        let mut integrator = IntegratorConfig::new(decomposition, scheme);
        if periodic {
            // Implicit inner solvers need the tridiagonal finite-difference
            // Jacobian; spectral grids default to the explicit counterparts.
            let kind = if integrator.scheme.order >= 2 {
                SchemeKind::Rk2Explicit
            } else {
                SchemeKind::ExplicitEuler
            };
            integrator.inner_a = InnerScheme::new(kind);
            if decomposition != Decomposition::I {
                integrator.inner_b = InnerScheme::new(kind);
            }
        }
        if let Some(s) = &self.inner_a {
            integrator.inner_a = InnerScheme::new(scheme_kind(s)?);
            if self.inner_b.is_none() && decomposition != Decomposition::I {
                integrator.inner_b = InnerScheme::new(integrator.inner_a.kind);
            }
        }
        if let Some(s) = &self.inner_b {
            integrator.inner_b = InnerScheme::new(scheme_kind(s)?);
        }
        for inner in [&mut integrator.inner_a, &mut integrator.inner_b] {
            inner.newton_tol = self.newton_tol.unwrap_or(DEFAULT_NEWTON_TOL);
            inner.newton_max_iter = self.newton_max_iter.unwrap_or(DEFAULT_NEWTON_MAX_ITER);
        }
        integrator.inner_a.substeps = self.substeps_a.unwrap_or(1);
        integrator.inner_b.substeps = self.substeps_b.unwrap_or(1);
        if let Some(nu) = self.nu_min {
            integrator.nu_min = nu;
        }
        if let Some(stride) = self.trajectory_stride {
            integrator.record_trajectory = true;
            integrator.trajectory_stride = stride;
        }
        integrator.validate()?;
        if periodic {
            for inner in [integrator.inner_a, integrator.inner_b] {
                if inner.kind.is_implicit() {
                    return Err(CliError::Usage(format!(
                        "{} needs a Dirichlet finite-difference grid; periodic grids are spectral",
                        inner.kind.name()
                    )));
                }
            }
        }

        let steps = match (self.steps, scenario.kind) {
            (Some(n), _) => n,
            (None, ScenarioKind::Realistic) => realistic_steps(sigma)?,
            (None, _) => DEFAULT_STEPS,
        };
        let ladder = match &self.ladder {
            None => default_ladder(scenario.t_final),
            Some(entries) => entries
                .iter()
                .map(|e| match e {
                    LadderEntry::Value(v) => Ok(*v),
                    LadderEntry::Fraction(s) => Ok(parse_fraction(s)? * scenario.t_final),
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        };
        experiments::ladder_steps(scenario.t_final, &ladder)?;
        let refinement = self.refinement.unwrap_or(experiments::DEFAULT_REFINEMENT);
        if refinement < experiments::MIN_REFINEMENT {
            return Err(CliError::Usage(format!(
                "refinement must be >= {}",
                experiments::MIN_REFINEMENT
            )));
        }
        Ok(ResolvedConfig {
            scenario,
            integrator,
            steps,
            ladder,
            refinement,
            sigma,
            seed: self.seed.unwrap_or(0),
            output_dir: self.output_dir.as_ref().map(PathBuf::from),
        })
    }
}

/// Shortest round-trip decimal rendering.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn header(fp: &str) -> String {
    format!("# westervelt config {fp}\n")
}

pub fn snapshot_csv(fp: &str, g: &Grid1D, u: &State) -> String {
    let mut s = header(fp);
    s.push_str("x,psi,vel\n");
    for i in 0..g.len() {
        let _ = writeln!(s, "{},{},{}", num(g.node(i)), num(u.psi[i]), num(u.vel[i]));
    }
    s
}

fn trajectory_csv(fp: &str, g: &Grid1D, states: &[State]) -> String {
    let mut s = header(fp);
    s.push_str("t,x,psi,vel\n");
    for u in states {
        for i in 0..g.len() {
            let _ = writeln!(s, "{},{},{},{}", num(u.t), num(g.node(i)), num(u.psi[i]), num(u.vel[i]));
        }
    }
    s
}

fn record_row(r: &ErrorRecord) -> String {
    format!(
        "{},{},{},{},{}",
        num(r.h),
        num(r.err_l2l2),
        num(r.err_h3h1),
        r.kind.name(),
        r.failure.as_deref().unwrap_or("")
    )
}

/// Error-ladder CSV with `slope` footer rows, whose error columns hold the
/// fitted slopes.
pub fn convergence_csv(fp: &str, report: &RunReport) -> String {
    let mut s = header(fp);
    s.push_str("h,err_l2l2,err_h3h1,kind,failure\n");
    for r in &report.records {
        s.push_str(&record_row(r));
        s.push('\n');
    }
    let sl = &report.slopes;
    let _ = writeln!(s, "slope,{},{},global,", opt_num(sl.global_l2l2), opt_num(sl.global_h3h1));
    let _ = writeln!(s, "slope,{},{},local,", opt_num(sl.local_l2l2), opt_num(sl.local_h3h1));
    s
}

pub fn compare_csv(fp: &str, cells: &[experiments::DecompositionCell]) -> String {
    let mut s = header(fp);
    s.push_str("decomposition,h,err_l2l2,err_h3h1,kind,failure,a_solves,b_solves,newton_a,newton_b\n");
    for cell in cells {
        let d = cell.decomposition;
        match &cell.report {
            Ok(report) => {
                for r in &report.records {
                    let e = r.effort;
                    let _ = writeln!(
                        s,
                        "{d},{},{},{},{},{}",
                        record_row(r),
                        e.a_solves,
                        e.b_solves,
                        e.newton_a,
                        e.newton_b
                    );
                }
                let sl = &report.slopes;
                let _ = writeln!(s, "{d},slope,{},{},global,,,,,", opt_num(sl.global_l2l2), opt_num(sl.global_h3h1));
                let _ = writeln!(s, "{d},slope,{},{},local,,,,,", opt_num(sl.local_l2l2), opt_num(sl.local_h3h1));
            }
            Err(msg) => {
                let _ = writeln!(s, "{d},,,,,{},,,,", msg.replace(',', ";"));
            }
        }
    }
    s
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn summary_csv(fp: &str, rows: &[(&str, String)]) -> String {
    let mut s = header(fp);
    s.push_str("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// Integrates the configured scenario for `N` steps; writes
/// `final_state.csv`, `summary.csv` and, with a trajectory stride,
/// `trajectory.csv`.
pub fn cmd_run(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let fp = cfg.fingerprint();
    let sc = &cfg.scenario;
    let g = sc.grid()?;
    let u0 = sc.initial_state(&g)?;
    let integ = Integrator::new(&sc.params, &g, &cfg.integrator)?;
    match integ.integrate(&u0, sc.t_final, cfg.steps) {
        Ok(run) => {
            write_file(out, "final_state.csv", &snapshot_csv(&fp, &g, &run.state))?;
            if cfg.integrator.record_trajectory {
                write_file(out, "trajectory.csv", &trajectory_csv(&fp, &g, &run.trajectory))?;
            }
            let e = run.effort;
            let rows = [
                ("steps", run.steps.to_string()),
                ("t", num(run.state.t)),
                ("min_factor", num(run.min_factor)),
                ("max_factor", num(run.max_factor)),
                ("a_solves", e.a_solves.to_string()),
                ("b_solves", e.b_solves.to_string()),
                ("newton_a", e.newton_a.to_string()),
                ("newton_b", e.newton_b.to_string()),
                ("failure", String::new()),
            ];
            write_file(out, "summary.csv", &summary_csv(&fp, &rows))?;
            Ok(())
        }
        Err(f) => {
            write_file(out, "final_state.csv", &snapshot_csv(&fp, &g, &f.last_state))?;
            let rows = [
                ("steps", f.step.saturating_sub(1).to_string()),
                ("t", num(f.last_state.t)),
                ("failed_step", f.step.to_string()),
                ("failure", f.cause.tag().to_string()),
                ("detail", f.cause.to_string().replace(',', ";")),
            ];
            write_file(out, "summary.csv", &summary_csv(&fp, &rows))?;
            Err(CliError::Numerical(f.to_string()))
        }
    }
}

/// Error ladder for the configured integrator; writes `convergence.csv`.
pub fn cmd_convergence(cfg: &ResolvedConfig, out: &Path) -> Result<RunReport, CliError> {
    let fp = cfg.fingerprint();
    let opts = MeasureOptions {
        refinement: cfg.refinement,
        ..MeasureOptions::default()
    };
    let report = measure_errors(&cfg.scenario, &cfg.integrator, &cfg.ladder, &opts)?;
    write_file(out, "convergence.csv", &convergence_csv(&fp, &report))?;
    if let Some(r) = report.records.iter().find(|r| !r.is_ok()) {
        return Err(CliError::Numerical(format!(
            "{} at h = {} ({})",
            r.failure.as_deref().unwrap_or(""),
            r.h,
            r.kind.name()
        )));
    }
    Ok(report)
}

/// Decompositions I-IV with the configured scheme; writes `compare.csv`.
pub fn cmd_compare(cfg: &ResolvedConfig, out: &Path) -> Result<(), CliError> {
    let fp = cfg.fingerprint();
    let opts = MeasureOptions {
        refinement: cfg.refinement,
        ..MeasureOptions::default()
    };
    let inner = cfg.integrator.inner_a;
    let cells = compare_decompositions(&cfg.scenario, &cfg.integrator.scheme, inner, &cfg.ladder, &opts)?;
    write_file(out, "compare.csv", &compare_csv(&fp, &cells))?;
    let failed = cells.iter().any(|c| match &c.report {
        Ok(r) => r.records.iter().any(|x| !x.is_ok()),
        Err(_) => true,
    });
    if failed {
        return Err(CliError::Numerical("at least one decomposition failed".into()));
    }
    Ok(())
}

/// Realistic-parameter run next to its linear counterpart; writes both
/// profiles and `realistic_summary.csv`.
pub fn cmd_realistic(sigma: f64, out: &Path) -> Result<experiments::RealisticOutcome, CliError> {
    let sc = Scenario::realistic(sigma)?;
    let fp = fingerprint(&(&sc, realistic_steps(sigma)?, "realistic"));
    let outcome = experiments::realistic_run(sigma)?;
    let g = sc.grid()?;
    write_file(out, "realistic_nonlinear.csv", &snapshot_csv(&fp, &g, &outcome.nonlinear))?;
    write_file(out, "realistic_linear.csv", &snapshot_csv(&fp, &g, &outcome.linear))?;
    let rows = [
        ("sigma", num(sigma)),
        ("M", realistic_nodes(sigma)?.to_string()),
        ("N", outcome.steps.to_string()),
        ("steepening", num(outcome.steepening)),
        ("peak_initial", num(outcome.peak_initial)),
        ("peak_nonlinear", num(outcome.peak_nonlinear)),
        ("peak_linear", num(outcome.peak_linear)),
    ];
    write_file(out, "realistic_summary.csv", &summary_csv(&fp, &rows))?;
    Ok(outcome)
}

#[derive(Debug, Parser)]
#[command(name = "westervelt", about = "Operator-splitting integrators for the 1-D Westervelt equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files (overrides the config).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one configuration and write the final state.
    Run(CommonArgs),
    /// Local and global errors on a step-size ladder.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Step sizes as fractions of T, e.g. "1/10,1/20,1/40".
        #[arg(long)]
        ladder: Option<String>,
    },
    /// Compare Decompositions I-IV.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        ladder: Option<String>,
    },
    /// Realistic-parameter pulse against the linear wave.
    Realistic {
        #[command(flatten)]
        common: CommonArgs,
        /// Fraction of the full M = 6000, N = 50000 resolution.
        #[arg(long)]
        sigma: Option<f64>,
    },
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => parse_config(path),
        None => Ok(RunConfig::default()),
    }
}

fn output_dir(common: &CommonArgs, cfg: &RunConfig) -> PathBuf {
    common
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Executes a parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(common) => {
            let raw = load(&common)?;
            let out = output_dir(&common, &raw);
            cmd_run(&raw.resolve()?, &out)
        }
        Command::Convergence { common, ladder } => {
            let mut raw = load(&common)?;
            if let Some(l) = ladder {
                raw.ladder = Some(parse_ladder(&l)?);
            }
            let out = output_dir(&common, &raw);
            cmd_convergence(&raw.resolve()?, &out).map(|_| ())
        }
        Command::Compare { common, ladder } => {
            let mut raw = load(&common)?;
            if let Some(l) = ladder {
                raw.ladder = Some(parse_ladder(&l)?);
            }
            let out = output_dir(&common, &raw);
            cmd_compare(&raw.resolve()?, &out)
        }
        Command::Realistic { common, sigma } => {
            let raw = load(&common)?;
            let out = output_dir(&common, &raw);
            let sigma = sigma.or(raw.sigma).unwrap_or(DEFAULT_SIGMA);
            cmd_realistic(sigma, &out).map(|_| ())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
