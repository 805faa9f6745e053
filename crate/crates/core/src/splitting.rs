//! Splitting schemes: compositions of the A- and B-flows.
//!
//! A scheme with coefficients `(a_j, b_j)` advances one step of size `h` by
//! applying, for each stage `j`, the A-flow over `a_j h` followed by the
//! B-flow over `b_j h`. Zero coefficients skip the corresponding flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::model::{check_nondegeneracy, Decomposition, ModelParams, State, DEFAULT_NU_MIN};
use crate::subsolvers::{self, InnerScheme, SchemeKind, Stability, SubstepResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScheme {
    pub name: String,
    pub coeffs: Vec<(f64, f64)>,
    pub order: u32,
}

impl SplitScheme {
    pub fn new(name: impl Into<String>, coeffs: Vec<(f64, f64)>, order: u32) -> Result<Self> {
        let s = Self {
            name: name.into(),
            coeffs,
            order,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.is_empty() {
            return Err(Error::InvalidConfig("splitting scheme needs at least one stage".into()));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "nominal order must be 1 or 2, got {}",
                self.order
            )));
        }
        if self
            .coeffs
            .iter()
            .any(|&(a, b)| !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "splitting coefficients must be finite and nonnegative".into(),
            ));
        }
        let sum_a: f64 = self.coeffs.iter().map(|c| c.0).sum();
        let sum_b: f64 = self.coeffs.iter().map(|c| c.1).sum();
        if (sum_a - 1.0).abs() > 1e-12 || (sum_b - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "splitting coefficients must sum to 1 (got {sum_a}, {sum_b})"
            )));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.coeffs.len()
    }

    pub fn lie_ab() -> Self {
        Self::preset("lie_ab", vec![(1.0, 1.0)], 1)
    }

    pub fn lie_ba() -> Self {
        Self::preset("lie_ba", vec![(0.0, 1.0), (1.0, 0.0)], 1)
    }

    pub fn strang_aba() -> Self {
        Self::preset("strang_aba", vec![(0.5, 1.0), (0.5, 0.0)], 2)
    }

    pub fn strang_bab() -> Self {
        Self::preset("strang_bab", vec![(0.0, 0.5), (1.0, 0.5)], 2)
    }

    fn preset(name: &str, coeffs: Vec<(f64, f64)>, order: u32) -> Self {
        Self {
            name: name.into(),
            coeffs,
            order,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "lie_ab" => Ok(Self::lie_ab()),
            "lie_ba" => Ok(Self::lie_ba()),
            "strang_aba" => Ok(Self::strang_aba()),
            "strang_bab" => Ok(Self::strang_bab()),
            other => Err(Error::InvalidConfig(format!("unknown splitting scheme {other:?}"))),
        }
    }
}

/// The two subflows a splitting scheme composes.
pub trait SubFlows {
    fn flow_a(&mut self, u: &State, t: f64) -> Result<SubstepResult>;
    fn flow_b(&mut self, u: &State, t: f64) -> Result<SubstepResult>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: usize,
    pub cause: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.cause)
    }
}

impl std::error::Error for StageError {}

/// One step of a general splitting scheme over arbitrary subflows.
pub fn compose_step<F: SubFlows>(
    flows: &mut F,
    scheme: &SplitScheme,
    u: &State,
    h: f64,
) -> std::result::Result<SubstepResult, StageError> {
    let mut state = u.clone();
    let mut iters = 0;
    for (j, &(a, b)) in scheme.coeffs.iter().enumerate() {
        let stage = j + 1;
        for (coeff, is_a) in [(a, true), (b, false)] {
            if coeff == 0.0 {
                continue;
            }
            let t = coeff * h;
            let r = if is_a {
                flows.flow_a(&state, t)
            } else {
                flows.flow_b(&state, t)
            }
            .map_err(|cause| StageError { stage, cause })?;
            iters += r.newton_iters_total;
            if !r.is_ok() {
                return Ok(SubstepResult {
                    newton_iters_total: iters,
                    ..r
                });
            }
            state = r.state;
        }
    }
    state.t = u.t + h;
    Ok(SubstepResult {
        state,
        newton_iters_total: iters,
        stability: Stability::Ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub decomposition: Decomposition,
    pub scheme: SplitScheme,
    pub inner_a: InnerScheme,
    pub inner_b: InnerScheme,
    pub nu_min: f64,
    pub record_trajectory: bool,
    pub trajectory_stride: usize,
}

impl IntegratorConfig {
    /// Defaults: implicit Euler for first-order schemes, Crank-Nicolson for
    /// second-order ones, closed-form B for Decomposition I.
    pub fn new(decomposition: Decomposition, scheme: SplitScheme) -> Self {
        let kind = if scheme.order >= 2 {
            SchemeKind::CrankNicolson
        } else {
            SchemeKind::ImplicitEuler
        };
        let inner_b = if decomposition == Decomposition::I {
            InnerScheme::new(SchemeKind::ClosedForm)
        } else {
            InnerScheme::new(kind)
        };
        Self {
            decomposition,
            scheme,
            inner_a: InnerScheme::new(kind),
            inner_b,
            nu_min: DEFAULT_NU_MIN,
            record_trajectory: false,
            trajectory_stride: 1,
        }
    }

    pub fn with_inner(mut self, inner_a: InnerScheme, inner_b: InnerScheme) -> Self {
        self.inner_a = inner_a;
        self.inner_b = inner_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.inner_a.validate()?;
        self.inner_b.validate()?;
        if self.inner_a.kind == SchemeKind::ClosedForm {
            return Err(Error::InvalidConfig(
                "closed_form is not available for the A-subproblem".into(),
            ));
        }
        if self.inner_b.kind == SchemeKind::ClosedForm && self.decomposition != Decomposition::I {
            return Err(Error::InvalidConfig(format!(
                "closed_form B is restricted to Decomposition I (got {})",
                self.decomposition
            )));
        }
        if !(self.nu_min >= 0.0) {
            return Err(Error::InvalidConfig("nu_min must be >= 0".into()));
        }
        if self.record_trajectory && self.trajectory_stride == 0 {
            return Err(Error::InvalidConfig("trajectory stride must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    pub a_solves: usize,
    pub b_solves: usize,
    pub newton_a: usize,
    pub newton_b: usize,
}

/// Westervelt subflows for one decomposition, with call counters.
pub struct WesterveltFlows<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a Grid1D,
    pub decomposition: Decomposition,
    pub inner_a: InnerScheme,
    pub inner_b: InnerScheme,
    pub effort: Effort,
}

impl<'a> WesterveltFlows<'a> {
    pub fn new(params: &'a ModelParams, grid: &'a Grid1D, cfg: &IntegratorConfig) -> Self {
        Self {
            params,
            grid,
            decomposition: cfg.decomposition,
            inner_a: cfg.inner_a,
            inner_b: cfg.inner_b,
            effort: Effort::default(),
        }
    }
}

impl SubFlows for WesterveltFlows<'_> {
    fn flow_a(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
        self.effort.a_solves += 1;
        let r = subsolvers::solve_a(u, t, self.params, self.grid, self.decomposition, &self.inner_a)?;
        self.effort.newton_a += r.newton_iters_total;
        Ok(r)
    }

    fn flow_b(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
        self.effort.b_solves += 1;
        let r = subsolvers::solve_b(u, t, self.params, self.grid, self.decomposition, &self.inner_b)?;
        self.effort.newton_b += r.newton_iters_total;
        Ok(r)
    }
}

/// Failure of a time integration, with the last state that passed all
/// checks.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationFailure {
    /// 1-based index of the failing step (0 = initial state rejected).
    pub step: usize,
    pub stage: Option<usize>,
    pub cause: Error,
    pub last_state: State,
    pub effort: Effort,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {}", self.step)?;
        if let Some(s) = self.stage {
            write!(f, " stage {s}")?;
        }
        write!(f, ": {}", self.cause)
    }
}

impl std::error::Error for IntegrationFailure {}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub state: State,
    pub steps: usize,
    pub newton_iters_total: usize,
    /// Smallest `1 - delta*vel` seen over all recorded steps.
    pub min_factor: f64,
    pub max_factor: f64,
    pub effort: Effort,
    pub trajectory: Vec<State>,
}

pub struct Integrator<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a Grid1D,
    pub cfg: &'a IntegratorConfig,
}

impl<'a> Integrator<'a> {
    pub fn new(params: &'a ModelParams, grid: &'a Grid1D, cfg: &'a IntegratorConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        Ok(Self { params, grid, cfg })
    }

    pub fn split_step(&self, u: &State, h: f64) -> std::result::Result<SubstepResult, StageError> {
        let mut flows = WesterveltFlows::new(self.params, self.grid, self.cfg);
        compose_step(&mut flows, &self.cfg.scheme, u, h)
    }

    /// `n` uniform steps from `u0` over `[u0.t, u0.t + t_final]`, checking
    /// non-degeneracy and blowup after every step.
    pub fn integrate(
        &self,
        u0: &State,
        t_final: f64,
        n: usize,
    ) -> std::result::Result<Integration, IntegrationFailure> {
        let mut flows = WesterveltFlows::new(self.params, self.grid, self.cfg);
        let fail = |step, stage, cause, last: &State, effort| IntegrationFailure {
            step,
            stage,
            cause,
            last_state: last.clone(),
            effort,
        };
        if let Err(e) = u0.check(self.grid) {
            return Err(fail(0, None, e, u0, flows.effort));
        }
        let report = check_nondegeneracy(u0, self.params, self.cfg.nu_min);
        if !report.passed {
            let cause = Error::DegenerateState {
                node: report.argmin,
                factor: report.min_factor,
            };
            return Err(fail(0, None, cause, u0, flows.effort));
        }
        if n > 0 && !(t_final > 0.0 && t_final.is_finite()) {
            let cause = Error::InvalidParams(format!("final time must be positive, got {t_final}"));
            return Err(fail(0, None, cause, u0, flows.effort));
        }

        let mut min_factor = report.min_factor;
        let mut max_factor = report.max_factor;
        let mut trajectory = Vec::new();
        let stride = self.cfg.trajectory_stride.max(1);
        if self.cfg.record_trajectory {
            trajectory.push(u0.clone());
        }
        let mut state = u0.clone();
        let mut iters = 0;
        let h = if n > 0 { t_final / n as f64 } else { 0.0 };
        for step in 1..=n {
            let r = match compose_step(&mut flows, &self.cfg.scheme, &state, h) {
                Ok(r) => r,
                Err(StageError { stage, cause }) => {
                    return Err(fail(step, Some(stage), cause, &state, flows.effort));
                }
            };
            iters += r.newton_iters_total;
            if let Stability::BlowupDetected(reason) = r.stability {
                return Err(fail(step, None, Error::BlowupDetected(reason), &state, flows.effort));
            }
            let mut next = r.state;
            next.t = u0.t + step as f64 * h;
            let report = check_nondegeneracy(&next, self.params, self.cfg.nu_min);
            if !report.passed {
                let cause = if report.min_factor.is_nan() {
                    Error::BlowupDetected("non-finite velocity".into())
                } else {
                    Error::DegenerateState {
                        node: report.argmin,
                        factor: report.min_factor,
                    }
                };
                return Err(fail(step, None, cause, &state, flows.effort));
            }
            min_factor = min_factor.min(report.min_factor);
            max_factor = max_factor.max(report.max_factor);
            state = next;
            if self.cfg.record_trajectory && step % stride == 0 {
                trajectory.push(state.clone());
            }
        }
        Ok(Integration {
            state,
            steps: n,
            newton_iters_total: iters,
            min_factor,
            max_factor,
            effort: flows.effort,
            trajectory,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;

    #[test]
    fn presets_are_consistent() {
        for s in [
            SplitScheme::lie_ab(),
            SplitScheme::lie_ba(),
            SplitScheme::strang_aba(),
            SplitScheme::strang_bab(),
        ] {
            s.validate().unwrap();
            assert_eq!(SplitScheme::by_name(&s.name).unwrap(), s);
        }
        assert!(SplitScheme::new("bad", vec![(0.5, 1.0)], 1).is_err());
        assert!(SplitScheme::new("neg", vec![(1.5, 1.0), (-0.5, 0.0)], 2).is_err());
    }

    /// Records the order of calls.
    struct Recorder(Vec<(char, f64)>);

    impl SubFlows for Recorder {
        fn flow_a(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
            self.0.push(('A', t));
            Ok(SubstepResult {
                state: u.clone(),
                newton_iters_total: 0,
                stability: Stability::Ok,
            })
        }

        fn flow_b(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
            self.0.push(('B', t));
            Ok(SubstepResult {
                state: u.clone(),
                newton_iters_total: 0,
                stability: Stability::Ok,
            })
        }
    }

    #[test]
    fn stage_order_and_skipping() {
        let u = State::new(Field(vec![0.0; 3]), Field(vec![0.0; 3]), 0.0);
        let cases = [
            (SplitScheme::lie_ab(), vec![('A', 1.0), ('B', 1.0)]),
            (SplitScheme::lie_ba(), vec![('B', 1.0), ('A', 1.0)]),
            (SplitScheme::strang_aba(), vec![('A', 0.5), ('B', 1.0), ('A', 0.5)]),
            (SplitScheme::strang_bab(), vec![('B', 0.5), ('A', 1.0), ('B', 0.5)]),
        ];
        for (scheme, expected) in cases {
            let mut rec = Recorder(Vec::new());
            let r = compose_step(&mut rec, &scheme, &u, 1.0).unwrap();
            assert_eq!(rec.0, expected, "{}", scheme.name);
            assert_eq!(r.state.t, 1.0);
        }
    }

    #[test]
    fn config_rejects_closed_form_outside_decomposition_one() {
        let mut cfg = IntegratorConfig::new(Decomposition::II, SplitScheme::lie_ab());
        cfg.validate().unwrap();
        cfg.inner_b = InnerScheme::new(SchemeKind::ClosedForm);
        assert!(cfg.validate().is_err());
        let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::strang_aba());
        assert_eq!(cfg.inner_a.kind, SchemeKind::CrankNicolson);
        assert_eq!(cfg.inner_b.kind, SchemeKind::ClosedForm);
    }

    #[test]
    fn zero_steps_return_initial_state() {
        let g = Grid1D::dirichlet(8.0, 100).unwrap();
        let p = ModelParams::model_problem();
        let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab());
        let u0 = State::new(
            g.sample(|x| (-x * x).exp()),
            g.sample(|x| -x * (-x * x).exp()),
            0.0,
        );
        let r = Integrator::new(&p, &g, &cfg).unwrap().integrate(&u0, 1.0, 0).unwrap();
        assert_eq!(r.state, u0);
        assert_eq!(r.effort, Effort::default());
    }

    #[test]
    fn lie_ab_step_is_b_after_a() {
        let g = Grid1D::dirichlet(8.0, 60).unwrap();
        let p = ModelParams::model_problem();
        let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab());
        let u = State::new(
            g.sample(|x| (-x * x).exp()),
            g.sample(|x| -x * (-x * x).exp()),
            0.0,
        );
        let h = 0.05;
        let step = Integrator::new(&p, &g, &cfg).unwrap().split_step(&u, h).unwrap();
        let a = subsolvers::solve_a(&u, h, &p, &g, Decomposition::I, &cfg.inner_a).unwrap();
        let b = subsolvers::solve_b_closed_form(&a.state, h, &p, &g).unwrap();
        assert_eq!(step.state.psi, b.state.psi);
        assert_eq!(step.state.vel, b.state.vel);

        let general = IntegratorConfig {
            scheme: SplitScheme::new("general", vec![(1.0, 1.0)], 1).unwrap(),
            ..cfg.clone()
        };
        let g_step = Integrator::new(&p, &g, &general).unwrap().split_step(&u, h).unwrap();
        assert_eq!(g_step.state, step.state);
    }

    #[test]
    fn lie_ba_first_stage_does_no_a_work() {
        let g = Grid1D::dirichlet(8.0, 40).unwrap();
        let p = ModelParams::model_problem();
        let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ba());
        let u = State::new(g.sample(|x| (-x * x).exp()), g.zeros(), 0.0);
        let mut flows = WesterveltFlows::new(&p, &g, &cfg);
        let one_stage = SplitScheme {
            coeffs: vec![cfg.scheme.coeffs[0]],
            ..cfg.scheme.clone()
        };
        compose_step(&mut flows, &one_stage, &u, 0.1).unwrap();
        assert_eq!(flows.effort.a_solves, 0);
        assert_eq!(flows.effort.b_solves, 1);
    }

    #[test]
    fn degenerate_initial_state_is_rejected() {
        let g = Grid1D::dirichlet(8.0, 20).unwrap();
        let p = ModelParams::model_problem();
        let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab());
        let u = State::new(g.zeros(), g.sample(|_| 2.0), 0.0);
        let err = Integrator::new(&p, &g, &cfg).unwrap().integrate(&u, 1.0, 10).unwrap_err();
        assert_eq!(err.step, 0);
        assert!(matches!(err.cause, Error::DegenerateState { .. }));
    }
}
