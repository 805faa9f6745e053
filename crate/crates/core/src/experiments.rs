//! Scenarios, reference solutions and convergence studies.
//!
//! Errors are measured against a reference computed by the integrator
//! itself (Strang, Decomposition I, Crank-Nicolson inner) on a much finer
//! time grid. Every reference is computed twice, at `N` and `N/2` steps, and
//! the difference must stay below 1% of the errors it is used to measure.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{state_norm, BoundaryMode, Field, Grid1D, SpacePair};
use crate::model::{Decomposition, ModelParams, State};
use crate::splitting::{Effort, IntegrationFailure, Integrator, IntegratorConfig, SplitScheme};
use crate::subsolvers::{InnerScheme, SchemeKind};
use crate::tridiag;

/// Default reference refinement factor.
pub const DEFAULT_REFINEMENT: usize = 32;
pub const MIN_REFINEMENT: usize = 8;

/// Full resolution of the realistic run.
pub const REALISTIC_FULL_M: usize = 6000;
pub const REALISTIC_FULL_N: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ModelProblem,
    Realistic,
    Custom,
}

/// Gaussian pulse `psi = A exp(-rate (x - center)^2)` with initial velocity
/// `vel = advect_speed * d/dx psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPulse {
    pub amplitude: f64,
    pub center: f64,
    pub rate: f64,
    pub advect_speed: f64,
}

impl InitialPulse {
    pub fn psi(&self, x: f64) -> f64 {
        let y = x - self.center;
        self.amplitude * (-self.rate * y * y).exp()
    }

    pub fn vel(&self, x: f64) -> f64 {
        let y = x - self.center;
        self.advect_speed * self.amplitude * (-2.0 * self.rate * y) * (-self.rate * y * y).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ModelParams,
    pub half_width: f64,
    pub num_nodes: usize,
    pub bc: BoundaryMode,
    pub initial: InitialPulse,
    pub t_final: f64,
}

impl Scenario {
    /// `alpha = beta = 1`, `delta = 1`, `psi0 = exp(-x^2)`, `vel0 = -x exp(-x^2)`,
    /// `a = 8`, `T = 1`, `M = 100`, homogeneous Dirichlet conditions.
    pub fn model_problem() -> Self {
        Self {
            kind: ScenarioKind::ModelProblem,
            params: ModelParams::model_problem(),
            half_width: 8.0,
            num_nodes: 100,
            bc: BoundaryMode::DirichletZero,
            initial: InitialPulse {
                amplitude: 1.0,
                center: 0.0,
                rate: 1.0,
                advect_speed: 0.5,
            },
            t_final: 1.0,
        }
    }

    /// MKS parameters on a periodic grid of `round(6000 sigma)` nodes (rounded
    /// to even), final time `5e-3`.
    pub fn realistic(sigma: f64) -> Result<Self> {
        let num_nodes = realistic_nodes(sigma)?;
        let params = ModelParams::realistic();
        Ok(Self {
            kind: ScenarioKind::Realistic,
            params,
            half_width: 15.0,
            num_nodes,
            bc: BoundaryMode::Periodic,
            initial: InitialPulse {
                amplitude: 0.5,
                center: 1.0,
                rate: 10.0,
                advect_speed: params.sound_speed,
            },
            t_final: 5e-3,
        })
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.half_width, self.num_nodes, self.bc)
    }

    pub fn initial_state(&self, g: &Grid1D) -> Result<State> {
        let u = State::new(
            g.sample(|x| self.initial.psi(x)),
            g.sample(|x| self.initial.vel(x)),
            0.0,
        );
        u.check(g)?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        let g = self.grid()?;
        let u = self.initial_state(&g)?;
        let report = crate::model::check_nondegeneracy(&u, &self.params, 0.0);
        if !(report.min_factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial data is degenerate: min(1 - delta*vel) = {}",
                report.min_factor
            )));
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidConfig(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    Ok(())
}

pub fn realistic_nodes(sigma: f64) -> Result<usize> {
    check_sigma(sigma)?;
    let m = (REALISTIC_FULL_M as f64 * sigma / 2.0).round() as usize * 2;
    Ok(m.max(4))
}

pub fn realistic_steps(sigma: f64) -> Result<usize> {
    check_sigma(sigma)?;
    Ok(((REALISTIC_FULL_N as f64 * sigma).round() as usize).max(1))
}

/// The reference integrator: Strang (ABA), Decomposition I, Crank-Nicolson
/// inner solves, closed-form B.
pub fn reference_config() -> IntegratorConfig {
    IntegratorConfig::new(Decomposition::I, SplitScheme::strang_aba()).with_inner(
        InnerScheme::new(SchemeKind::CrankNicolson),
        InnerScheme::new(SchemeKind::ClosedForm),
    )
}

/// A reference state plus the size of its own refinement uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub state: State,
    pub steps: usize,
    /// `|U(N) - U(N/2)|` in both norm pairs.
    pub halving_diff_l2l2: f64,
    pub halving_diff_h3h1: f64,
}

impl ReferenceSolution {
    /// Checks the 1% self-consistency gate against the smallest nonzero
    /// error the reference is used for.
    pub fn validate(&self, smallest_error: f64) -> Result<()> {
        if smallest_error > 0.0 && !(self.halving_diff_l2l2 < 0.01 * smallest_error) {
            return Err(Error::SelfConsistencyFailure {
                difference: self.halving_diff_l2l2,
                smallest_error,
            });
        }
        Ok(())
    }
}

fn failure_to_error(f: IntegrationFailure) -> Error {
    f.cause
}

/// Reference flow from `u0` over `[0, t]` with `steps` Strang steps.
pub fn reference_from(
    p: &ModelParams,
    g: &Grid1D,
    u0: &State,
    t: f64,
    steps: usize,
) -> Result<ReferenceSolution> {
    if steps < 2 || steps % 2 != 0 {
        return Err(Error::InvalidParams(format!(
            "reference needs an even step count >= 2, got {steps}"
        )));
    }
    let cfg = reference_config();
    let integ = Integrator::new(p, g, &cfg)?;
    let fine = integ.integrate(u0, t, steps).map_err(failure_to_error)?;
    let coarse = integ.integrate(u0, t, steps / 2).map_err(failure_to_error)?;
    let diff = fine.state.diff(&coarse.state);
    Ok(ReferenceSolution {
        halving_diff_l2l2: state_norm(g, &diff, SpacePair::L2xL2)?,
        halving_diff_h3h1: state_norm(g, &diff, SpacePair::H3xH1)?,
        state: fine.state,
        steps,
    })
}

/// Reference at the scenario's final time with `refinement * n_max` steps,
/// `n_max` being the largest step count of the experiment it serves.
pub fn reference_solution(
    sc: &Scenario,
    g: &Grid1D,
    refinement: usize,
    n_max: usize,
) -> Result<ReferenceSolution> {
    if refinement < MIN_REFINEMENT {
        return Err(Error::InvalidParams(format!(
            "refinement must be >= {MIN_REFINEMENT}, got {refinement}"
        )));
    }
    let u0 = sc.initial_state(g)?;
    reference_from(&sc.params, g, &u0, sc.t_final, refinement * n_max.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Local,
    Global,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Local => "local",
            ErrorKind::Global => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub h: f64,
    pub steps: usize,
    pub kind: ErrorKind,
    pub err_l2l2: f64,
    pub err_h3h1: f64,
    /// Failure tag when the run did not complete; errors are NaN then.
    pub failure: Option<String>,
    pub effort: Effort,
    pub fingerprint: String,
}

impl ErrorRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub global_l2l2: Option<f64>,
    pub global_h3h1: Option<f64>,
    pub local_l2l2: Option<f64>,
    pub local_h3h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeta {
    pub refinement: usize,
    pub steps: usize,
    pub halving_diff_l2l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub decomposition: Decomposition,
    pub scheme: String,
    pub records: Vec<ErrorRecord>,
    pub slopes: Slopes,
    pub reference: ReferenceMeta,
    pub elapsed_secs: f64,
}

impl RunReport {
    pub fn records_of(&self, kind: ErrorKind) -> impl Iterator<Item = &ErrorRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn error_at(&self, kind: ErrorKind, steps: usize) -> Option<&ErrorRecord> {
        self.records_of(kind).find(|r| r.steps == steps)
    }

    pub fn total_effort(&self) -> Effort {
        self.records.iter().fold(Effort::default(), |acc, r| Effort {
            a_solves: acc.a_solves + r.effort.a_solves,
            b_solves: acc.b_solves + r.effort.b_solves,
            newton_a: acc.newton_a + r.effort.newton_a,
            newton_b: acc.newton_b + r.effort.newton_b,
        })
    }
}

/// Least-squares slope of `log2 err` against `log2 h`; needs at least three
/// points with positive finite errors.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.log2(), e.log2()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope over the four smallest step sizes.
fn finest_slope(records: &[&ErrorRecord], pick: impl Fn(&ErrorRecord) -> f64) -> Option<f64> {
    let mut ok: Vec<&&ErrorRecord> = records.iter().filter(|r| r.is_ok()).collect();
    ok.sort_by(|a, b| a.h.total_cmp(&b.h));
    let pts: Vec<(f64, f64)> = ok.iter().take(4).map(|r| (r.h, pick(r))).collect();
    fit_slope(&pts)
}

/// Hex digest prefix of a value's canonical JSON serialization.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("serializable config");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Converts a step-size ladder into step counts, checking that it is
/// strictly decreasing and that every `T/h` is an integer.
pub fn ladder_steps(t_final: f64, h_list: &[f64]) -> Result<Vec<usize>> {
    if h_list.is_empty() {
        return Err(Error::InvalidConfig("empty step-size ladder".into()));
    }
    let mut out = Vec::with_capacity(h_list.len());
    for (i, &h) in h_list.iter().enumerate() {
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {h}")));
        }
        if i > 0 && !(h < h_list[i - 1]) {
            return Err(Error::InvalidConfig("step-size ladder must be strictly decreasing".into()));
        }
        let n = t_final / h;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidConfig(format!("T/h = {n} is not an integer")));
        }
        out.push(rounded as usize);
    }
    Ok(out)
}

/// `T * {1/10, 1/20, ..., 1/320}`.
pub fn default_ladder(t_final: f64) -> Vec<f64> {
    [10, 20, 40, 80, 160, 320]
        .iter()
        .map(|&n| t_final / n as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    pub refinement: usize,
    pub local: bool,
    pub global: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            refinement: DEFAULT_REFINEMENT,
            local: true,
            global: true,
        }
    }
}

/// References shared by every configuration measured on one ladder.
#[derive(Debug, Clone)]
pub struct LadderReferences {
    pub refinement: usize,
    pub steps: Vec<usize>,
    pub global: Option<ReferenceSolution>,
    /// Reference over `[0, h]` for each ladder entry.
    pub local: Vec<Option<ReferenceSolution>>,
}

impl LadderReferences {
    pub fn compute(sc: &Scenario, g: &Grid1D, steps: &[usize], opts: &MeasureOptions) -> Result<Self> {
        let n_max = *steps.iter().max().ok_or_else(|| Error::InvalidConfig("empty ladder".into()))?;
        let global = if opts.global {
            Some(reference_solution(sc, g, opts.refinement, n_max)?)
        } else {
            None
        };
        let u0 = sc.initial_state(g)?;
        let local = if opts.local {
            steps
                .par_iter()
                .map(|&n| {
                    let h = sc.t_final / n as f64;
                    // Same fine step size as the global reference.
                    let sub = (opts.refinement * n_max).div_ceil(n).max(MIN_REFINEMENT);
                    let sub = sub + sub % 2;
                    reference_from(&sc.params, g, &u0, h, sub).map(Some)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![None; steps.len()]
        };
        Ok(Self {
            refinement: opts.refinement,
            steps: steps.to_vec(),
            global,
            local,
        })
    }
}

fn error_pair(g: &Grid1D, a: &State, b: &State) -> Result<(f64, f64)> {
    let d = a.diff(b);
    Ok((
        state_norm(g, &d, SpacePair::L2xL2)?,
        state_norm(g, &d, SpacePair::H3xH1)?,
    ))
}

fn failed_record(h: f64, steps: usize, kind: ErrorKind, tag: String, effort: Effort, fp: &str) -> ErrorRecord {
    ErrorRecord {
        h,
        steps,
        kind,
        err_l2l2: f64::NAN,
        err_h3h1: f64::NAN,
        failure: Some(tag),
        effort,
        fingerprint: fp.to_string(),
    }
}

/// Local and global errors of `cfg` on a step-size ladder.
pub fn measure_errors(
    sc: &Scenario,
    cfg: &IntegratorConfig,
    h_list: &[f64],
    opts: &MeasureOptions,
) -> Result<RunReport> {
    let g = sc.grid()?;
    let steps = ladder_steps(sc.t_final, h_list)?;
    let refs = LadderReferences::compute(sc, &g, &steps, opts)?;
    measure_with_references(sc, &g, cfg, &refs)
}

pub fn measure_with_references(
    sc: &Scenario,
    g: &Grid1D,
    cfg: &IntegratorConfig,
    refs: &LadderReferences,
) -> Result<RunReport> {
    let started = Instant::now();
    let integ = Integrator::new(&sc.params, g, cfg)?;
    let u0 = sc.initial_state(g)?;
    let fp = fingerprint(&(sc, cfg));
    let t_final = sc.t_final;

    let records: Vec<Vec<ErrorRecord>> = refs
        .steps
        .par_iter()
        .enumerate()
        .map(|(i, &n)| -> Result<Vec<ErrorRecord>> {
            let h = t_final / n as f64;
            let mut out = Vec::with_capacity(2);
            if let Some(local_ref) = &refs.local[i] {
                out.push(match integ.integrate(&u0, h, 1) {
                    Ok(run) => {
                        let (l2, h3) = error_pair(g, &run.state, &local_ref.state)?;
                        ErrorRecord {
                            h,
                            steps: n,
                            kind: ErrorKind::Local,
                            err_l2l2: l2,
                            err_h3h1: h3,
                            failure: None,
                            effort: run.effort,
                            fingerprint: fp.clone(),
                        }
                    }
                    Err(f) => failed_record(h, n, ErrorKind::Local, f.cause.tag().into(), f.effort, &fp),
                });
            }
            if let Some(global_ref) = &refs.global {
                out.push(match integ.integrate(&u0, t_final, n) {
                    Ok(run) => {
                        let (l2, h3) = error_pair(g, &run.state, &global_ref.state)?;
                        ErrorRecord {
                            h,
                            steps: n,
                            kind: ErrorKind::Global,
                            err_l2l2: l2,
                            err_h3h1: h3,
                            failure: None,
                            effort: run.effort,
                            fingerprint: fp.clone(),
                        }
                    }
                    Err(f) => failed_record(h, n, ErrorKind::Global, f.cause.tag().into(), f.effort, &fp),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<ErrorRecord> = records.into_iter().flatten().collect();

    // Self-consistency of every reference against the errors it measured.
    if let Some(global_ref) = &refs.global {
        let smallest = records
            .iter()
            .filter(|r| r.kind == ErrorKind::Global && r.is_ok() && r.err_l2l2 > 0.0)
            .map(|r| r.err_l2l2)
            .fold(f64::INFINITY, f64::min);
        if smallest.is_finite() {
            global_ref.validate(smallest)?;
        }
    }
    for (i, local_ref) in refs.local.iter().enumerate() {
        if let Some(local_ref) = local_ref {
            let err = records
                .iter()
                .find(|r| r.kind == ErrorKind::Local && r.steps == refs.steps[i] && r.is_ok())
                .map(|r| r.err_l2l2);
            if let Some(e) = err {
                local_ref.validate(e)?;
            }
        }
    }

    let of_kind = |k: ErrorKind| records.iter().filter(|r| r.kind == k).collect::<Vec<_>>();
    let global = of_kind(ErrorKind::Global);
    let local = of_kind(ErrorKind::Local);
    let slopes = Slopes {
        global_l2l2: finest_slope(&global, |r| r.err_l2l2),
        global_h3h1: finest_slope(&global, |r| r.err_h3h1),
        local_l2l2: finest_slope(&local, |r| r.err_l2l2),
        local_h3h1: finest_slope(&local, |r| r.err_h3h1),
    };
    let reference = match &refs.global {
        Some(r) => ReferenceMeta {
            refinement: refs.refinement,
            steps: r.steps,
            halving_diff_l2l2: r.halving_diff_l2l2,
        },
        None => ReferenceMeta {
            refinement: refs.refinement,
            steps: 0,
            halving_diff_l2l2: 0.0,
        },
    };
    Ok(RunReport {
        decomposition: cfg.decomposition,
        scheme: cfg.scheme.name.clone(),
        records,
        slopes,
        reference,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCell {
    pub decomposition: Decomposition,
    pub config: IntegratorConfig,
    pub report: std::result::Result<RunReport, String>,
}

/// Runs the same splitting scheme for Decompositions I-IV with matched inner
/// solvers (closed-form B for Decomposition I).
pub fn compare_decompositions(
    sc: &Scenario,
    scheme: &SplitScheme,
    inner: InnerScheme,
    h_list: &[f64],
    opts: &MeasureOptions,
) -> Result<Vec<DecompositionCell>> {
    let g = sc.grid()?;
    let steps = ladder_steps(sc.t_final, h_list)?;
    let refs = LadderReferences::compute(sc, &g, &steps, opts)?;
    let cells = Decomposition::ALL
        .par_iter()
        .map(|&d| {
            let inner_b = if d == Decomposition::I {
                InnerScheme::new(SchemeKind::ClosedForm)
            } else {
                inner
            };
            let mut config = IntegratorConfig::new(d, scheme.clone()).with_inner(inner, inner_b);
            config.nu_min = crate::model::DEFAULT_NU_MIN;
            let report = measure_with_references(sc, &g, &config, &refs).map_err(|e| e.to_string());
            DecompositionCell {
                decomposition: d,
                config,
                report,
            }
        })
        .collect();
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealisticOutcome {
    pub sigma: f64,
    pub num_nodes: usize,
    pub steps: usize,
    pub x: Vec<f64>,
    pub initial: State,
    pub nonlinear: State,
    pub linear: State,
    /// `max|psi_x|` of the nonlinear profile over that of the linear one.
    pub steepening: f64,
    pub peak_initial: f64,
    pub peak_nonlinear: f64,
    pub peak_linear: f64,
}

fn peak_position(g: &Grid1D, f: &Field) -> f64 {
    let i = f
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    g.node(i)
}

/// Lie splitting, Decomposition I, explicit Euler inner, on the scenario's
/// grid, next to the same discretization with `delta = 0`.
pub fn realistic_run_scenario(sc: &Scenario, steps: usize) -> Result<RealisticOutcome> {
    sc.validate()?;
    let g = sc.grid()?;
    let u0 = sc.initial_state(&g)?;
    let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab()).with_inner(
        InnerScheme::new(SchemeKind::ExplicitEuler),
        InnerScheme::new(SchemeKind::ClosedForm),
    );
    let lin_params = sc.params.linearized();
    let (nl, lin) = rayon::join(
        || Integrator::new(&sc.params, &g, &cfg)?.integrate(&u0, sc.t_final, steps).map_err(failure_to_error),
        || Integrator::new(&lin_params, &g, &cfg)?.integrate(&u0, sc.t_final, steps).map_err(failure_to_error),
    );
    let (nl, lin) = (nl?.state, lin?.state);
    let grad_nl = g.first_difference(&nl.psi)?.max_abs();
    let grad_lin = g.first_difference(&lin.psi)?.max_abs();
    Ok(RealisticOutcome {
        sigma: sc.num_nodes as f64 / REALISTIC_FULL_M as f64,
        num_nodes: sc.num_nodes,
        steps,
        x: g.nodes(),
        peak_initial: peak_position(&g, &u0.psi),
        peak_nonlinear: peak_position(&g, &nl.psi),
        peak_linear: peak_position(&g, &lin.psi),
        steepening: grad_nl / grad_lin,
        initial: u0,
        nonlinear: nl,
        linear: lin,
    })
}

/// The realistic run at resolution scale `sigma` of the full
/// `M = 6000`, `N = 50000` discretization.
pub fn realistic_run(sigma: f64) -> Result<RealisticOutcome> {
    let sc = Scenario::realistic(sigma)?;
    let mut out = realistic_run_scenario(&sc, realistic_steps(sigma)?)?;
    out.sigma = sigma;
    Ok(out)
}

/// Crank-Nicolson for the full linear system `psi' = vel`,
/// `vel' = alpha L vel + beta L psi` (`delta = 0`) on a Dirichlet grid,
/// without splitting. Each step eliminates `psi` and solves one
/// tridiagonal system for `vel`.
pub fn linear_monolithic_cn(p: &ModelParams, g: &Grid1D, u0: &State, t_final: f64, steps: usize) -> Result<State> {
    if !p.is_linear() {
        return Err(Error::InvalidParams("monolithic oracle needs delta = 0".into()));
    }
    if g.bc() != BoundaryMode::DirichletZero {
        return Err(Error::Unsupported("monolithic oracle needs a Dirichlet grid".into()));
    }
    u0.check(g)?;
    let n = g.len();
    let h = t_final / steps.max(1) as f64;
    // (I - c L) vel1 = vel0 + c L vel0 + h beta L psi0, c = h alpha/2 + h^2 beta/4
    let c = 0.5 * h * p.alpha + 0.25 * h * h * p.beta;
    let off = -c / (g.dx() * g.dx());
    let lower = vec![off; n];
    let upper = vec![off; n];
    let diag = vec![1.0 - 2.0 * off; n];
    let mut psi = u0.psi.clone();
    let mut vel = u0.vel.clone();
    for _ in 0..steps {
        let lap_vel = g.laplacian(&vel)?;
        let lap_psi = g.laplacian(&psi)?;
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| vel[i] + c * lap_vel[i] + h * p.beta * lap_psi[i])
            .collect();
        tridiag::solve(&lower, &diag, &upper, &mut rhs)
            .ok_or_else(|| Error::InvalidParams("singular monolithic system".into()))?;
        for i in 0..n {
            psi[i] += 0.5 * h * (vel[i] + rhs[i]);
        }
        vel = Field(rhs);
    }
    Ok(State::new(psi, vel, u0.t + t_final))
}
