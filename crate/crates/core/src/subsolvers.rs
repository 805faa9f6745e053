//! Time integration of the A- and B-subproblems over one splitting substep.
//!
//! Every A-subproblem is a (possibly reactive) nonlinear diffusion equation
//! for `vel`; `psi` is either frozen or recovered by trapezoidal quadrature
//! of `vel`. The B-subproblem of Decomposition I has an exact solution; the
//! others are first-order wave systems integrated by the inner scheme.
//!
//! Implicit schemes solve the nodal system with Newton's method. The
//! Jacobians are tridiagonal on Dirichlet grids; implicit schemes are not
//! available on periodic (spectral) grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Field, Grid1D};
use crate::model::{coefficients_checked, Coefficients, Decomposition, ModelParams, State};
use crate::tridiag;

/// Any nodal magnitude above this flags a blowup.
pub const BLOWUP_BOUND: f64 = 1e12;
pub const DEFAULT_RADICAND_FLOOR: f64 = 1e-12;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;

/// Largest `h * lambda` for which the explicit schemes stay stable on the
/// diffusion part (real-axis stability interval of Euler and Heun).
const EXPLICIT_STABILITY_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    ExplicitEuler,
    ImplicitEuler,
    Rk2Explicit,
    CrankNicolson,
    ClosedForm,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::ExplicitEuler => "explicit_euler",
            SchemeKind::ImplicitEuler => "implicit_euler",
            SchemeKind::Rk2Explicit => "rk2_explicit",
            SchemeKind::CrankNicolson => "crank_nicolson",
            SchemeKind::ClosedForm => "closed_form",
        }
    }

    pub fn is_implicit(self) -> bool {
        matches!(self, SchemeKind::ImplicitEuler | SchemeKind::CrankNicolson)
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, SchemeKind::ExplicitEuler | SchemeKind::Rk2Explicit)
    }

    /// Classical order; `None` for the exact closed form.
    pub fn order(self) -> Option<u32> {
        match self {
            SchemeKind::ExplicitEuler | SchemeKind::ImplicitEuler => Some(1),
            SchemeKind::Rk2Explicit | SchemeKind::CrankNicolson => Some(2),
            SchemeKind::ClosedForm => None,
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "explicit_euler" => SchemeKind::ExplicitEuler,
            "implicit_euler" => SchemeKind::ImplicitEuler,
            "rk2_explicit" => SchemeKind::Rk2Explicit,
            "crank_nicolson" => SchemeKind::CrankNicolson,
            "closed_form" => SchemeKind::ClosedForm,
            other => return Err(Error::InvalidConfig(format!("unknown inner scheme {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerScheme {
    pub kind: SchemeKind,
    pub substeps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl InnerScheme {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            substeps: 1,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
        }
    }

    pub fn with_substeps(mut self, n: usize) -> Self {
        self.substeps = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be >= 1".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidConfig("newton_tol must be > 0".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidConfig("newton_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Ok,
    BlowupDetected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstepResult {
    pub state: State,
    pub newton_iters_total: usize,
    pub stability: Stability,
}

impl SubstepResult {
    fn ok(state: State, newton_iters_total: usize) -> Self {
        Self {
            state,
            newton_iters_total,
            stability: Stability::Ok,
        }
    }

    fn blowup(state: State, newton_iters_total: usize, reason: String) -> Self {
        Self {
            state,
            newton_iters_total,
            stability: Stability::BlowupDetected(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.stability == Stability::Ok
    }
}

fn blowup_reason(u: &State) -> Option<String> {
    for (name, f) in [("psi", &u.psi), ("vel", &u.vel)] {
        if let Some((i, v)) = f
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > BLOWUP_BOUND)
        {
            return Some(format!("{name}[{i}] = {v:e}"));
        }
    }
    None
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParams(format!("step must be positive, got {h}")));
    }
    Ok(())
}

fn require_dirichlet(g: &Grid1D, kind: SchemeKind) -> Result<()> {
    if g.bc() != BoundaryMode::DirichletZero {
        return Err(Error::Unsupported(format!(
            "{} needs a Dirichlet grid (tridiagonal Newton Jacobian)",
            kind.name()
        )));
    }
    Ok(())
}

fn nodal_coefficients(vel: &[f64], p: &ModelParams) -> Result<Vec<Coefficients>> {
    vel.iter()
        .enumerate()
        .map(|(i, &v)| coefficients_checked(v, i, p))
        .collect()
}

/// Residual of `w - z - k*theta*N(w)` and the pieces of its Jacobian
/// `I - k*theta*(diag(d) + diag(e) L)`.
struct Linearization {
    residual: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
}

/// Newton iteration for a nodal system whose Jacobian has the form
/// `I - scale * (diag(d) + diag(e) L)` with `L` the Dirichlet stencil.
/// Returns the iteration count.
fn newton(
    w: &mut [f64],
    scale: f64,
    g: &Grid1D,
    p: &ModelParams,
    s: &InnerScheme,
    mut linearize: impl FnMut(&[f64]) -> Result<Linearization>,
) -> Result<usize> {
    let n = w.len();
    let inv_dx2 = 1.0 / (g.dx() * g.dx());
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut iterations = 0;
    let mut lin = linearize(w)?;
    loop {
        let residual = lin.residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        if !residual.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations,
                residual,
            });
        }
        if residual < s.newton_tol {
            return Ok(iterations);
        }
        if iterations >= s.newton_max_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual,
            });
        }
        for i in 0..n {
            let off = -scale * lin.e[i] * inv_dx2;
            lower[i] = off;
            upper[i] = off;
            diag[i] = 1.0 - scale * (lin.d[i] - 2.0 * lin.e[i] * inv_dx2);
        }
        let mut delta: Vec<f64> = lin.residual.iter().map(|r| -r).collect();
        if tridiag::solve(&lower, &diag, &upper, &mut delta).is_none() {
            return Err(Error::NewtonDivergence {
                iterations,
                residual,
            });
        }
        iterations += 1;

        // Halve the update until the iterate is admissible.
        let mut step = 1.0;
        let base = w.to_vec();
        loop {
            for i in 0..n {
                w[i] = base[i] + step * delta[i];
            }
            let admissible = w.iter().all(|&v| 1.0 - p.delta * v > 0.0);
            if admissible {
                match linearize(w) {
                    Ok(next) => {
                        lin = next;
                        break;
                    }
                    Err(Error::DegenerateState { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            step *= 0.5;
            if step < 1e-4 {
                w.copy_from_slice(&base);
                let (node, factor) = w
                    .iter()
                    .zip(&delta)
                    .map(|(v, d)| 1.0 - p.delta * (v + d))
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
                return Err(Error::DegenerateState { node, factor });
            }
        }
    }
}

fn theta(kind: SchemeKind) -> f64 {
    match kind {
        SchemeKind::ImplicitEuler => 1.0,
        _ => 0.5,
    }
}

/// Right-hand side of the `vel` equation of the A-subproblem.
fn rate_a(
    vel: &[f64],
    lap_psi: Option<&[f64]>,
    p: &ModelParams,
    g: &Grid1D,
) -> Result<(Vec<f64>, Vec<Coefficients>)> {
    let coeffs = nodal_coefficients(vel, p)?;
    let lap = g.laplacian(vel)?;
    let rate = (0..vel.len())
        .map(|i| {
            let mut r = coeffs[i].alpha_t * lap[i];
            if let Some(lp) = lap_psi {
                r += p.delta * vel[i] * coeffs[i].beta_t * lp[i];
            }
            r
        })
        .collect();
    Ok((rate, coeffs))
}

fn explicit_guard(vel: &[f64], k: f64, p: &ModelParams, g: &Grid1D) -> Result<Option<String>> {
    let coeffs = nodal_coefficients(vel, p)?;
    let max_alpha = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.alpha_t));
    let stiffness = k * max_alpha * g.laplacian_spectral_radius();
    if stiffness > EXPLICIT_STABILITY_LIMIT {
        return Ok(Some(format!(
            "explicit diffusion step unstable: h*lambda_max = {stiffness:.3e} > {EXPLICIT_STABILITY_LIMIT}"
        )));
    }
    Ok(None)
}

/// Advances the A-subproblem of decomposition `d` over `[0, h]`.
pub fn solve_a(
    u: &State,
    h: f64,
    p: &ModelParams,
    g: &Grid1D,
    d: Decomposition,
    s: &InnerScheme,
) -> Result<SubstepResult> {
    check_step(h)?;
    s.validate()?;
    u.check(g)?;
    if s.kind == SchemeKind::ClosedForm {
        return Err(Error::Unsupported(
            "closed_form is only available for the B-subproblem of Decomposition I".into(),
        ));
    }
    if s.kind.is_implicit() {
        require_dirichlet(g, s.kind)?;
    }
    nodal_coefficients(&u.vel, p)?;

    let weight = d.a_psi_weight();
    // psi is frozen in Decomposition IV, so its Laplacian is computed once.
    let lap_psi = match d {
        Decomposition::IV => Some(g.laplacian(&u.psi)?.into_vec()),
        _ => None,
    };
    let lap_psi = lap_psi.as_deref();
    let k = h / s.substeps as f64;
    let mut psi = u.psi.clone();
    let mut vel = u.vel.clone().into_vec();
    let mut iters = 0;

    for _ in 0..s.substeps {
        let next: Vec<f64> = match s.kind {
            SchemeKind::ExplicitEuler | SchemeKind::Rk2Explicit => {
                if let Some(reason) = explicit_guard(&vel, k, p, g)? {
                    let state = State::new(psi, Field(vel), u.t);
                    return Ok(SubstepResult::blowup(state, iters, reason));
                }
                let (k1, _) = rate_a(&vel, lap_psi, p, g)?;
                let pred: Vec<f64> = vel.iter().zip(&k1).map(|(v, r)| v + k * r).collect();
                if s.kind == SchemeKind::ExplicitEuler {
                    pred
                } else {
                    let (k2, _) = rate_a(&pred, lap_psi, p, g)?;
                    (0..vel.len())
                        .map(|i| vel[i] + 0.5 * k * (k1[i] + k2[i]))
                        .collect()
                }
            }
            SchemeKind::ImplicitEuler | SchemeKind::CrankNicolson => {
                let th = theta(s.kind);
                let mut z = vel.clone();
                if th < 1.0 {
                    let (r0, _) = rate_a(&vel, lap_psi, p, g)?;
                    for (zi, ri) in z.iter_mut().zip(&r0) {
                        *zi += (1.0 - th) * k * ri;
                    }
                }
                let mut w = vel.clone();
                let scale = k * th;
                iters += newton(&mut w, scale, g, p, s, |w| {
                    let lap = g.laplacian(w)?;
                    let coeffs = nodal_coefficients(w, p)?;
                    let n = w.len();
                    let mut residual = Vec::with_capacity(n);
                    let mut dd = Vec::with_capacity(n);
                    let mut ee = Vec::with_capacity(n);
                    for i in 0..n {
                        let c = &coeffs[i];
                        let mut rate = c.alpha_t * lap[i];
                        let mut dr = c.alpha_tp * lap[i];
                        if let Some(lp) = lap_psi {
                            rate += p.delta * w[i] * c.beta_t * lp[i];
                            dr += p.delta * (c.beta_t + w[i] * c.beta_tp) * lp[i];
                        }
                        residual.push(w[i] - z[i] - scale * rate);
                        dd.push(dr);
                        ee.push(c.alpha_t);
                    }
                    Ok(Linearization {
                        residual,
                        d: dd,
                        e: ee,
                    })
                })?;
                w
            }
            SchemeKind::ClosedForm => unreachable!(),
        };
        if weight != 0.0 {
            for i in 0..psi.len() {
                psi[i] += weight * 0.5 * k * (vel[i] + next[i]);
            }
        }
        vel = next;
        let state = State::new(psi.clone(), Field(vel.clone()), u.t);
        if let Some(reason) = blowup_reason(&state) {
            return Ok(SubstepResult::blowup(State { t: u.t + h, ..state }, iters, reason));
        }
    }
    Ok(SubstepResult::ok(State::new(psi, Field(vel), u.t + h), iters))
}

/// Exact B-flow of Decomposition I:
/// `vel(h) = (1 - sqrt((1 - delta vel0)^2 - 2 beta delta h L psi0)) / delta`,
/// `psi` constant.
pub fn solve_b_closed_form(u: &State, h: f64, p: &ModelParams, g: &Grid1D) -> Result<SubstepResult> {
    solve_b_closed_form_with_floor(u, h, p, g, DEFAULT_RADICAND_FLOOR)
}

pub fn solve_b_closed_form_with_floor(
    u: &State,
    h: f64,
    p: &ModelParams,
    g: &Grid1D,
    radicand_floor: f64,
) -> Result<SubstepResult> {
    check_step(h)?;
    u.check(g)?;
    let lap_psi = g.laplacian(&u.psi)?;
    let vel = if p.is_linear() {
        u.vel.add_scaled(p.beta * h, &lap_psi)
    } else {
        let n = u.vel.len();
        let mut out = Vec::with_capacity(n);
        let mut offending: Option<(usize, f64)> = None;
        for i in 0..n {
            let v = u.vel[i];
            let factor = 1.0 - p.delta * v;
            if !(factor > 0.0) {
                return Err(Error::DegenerateState { node: i, factor });
            }
            let radicand = factor * factor - 2.0 * p.beta * p.delta * h * lap_psi[i];
            if !(radicand >= radicand_floor) {
                if offending.is_none() {
                    offending = Some((i, radicand));
                }
                continue;
            }
            // (1 - sqrt(r)) / delta rewritten without cancellation.
            out.push((v * (2.0 - p.delta * v) + 2.0 * p.beta * h * lap_psi[i]) / (1.0 + radicand.sqrt()));
        }
        if let Some((node, radicand)) = offending {
            let h_max = closed_form_step_bound(&u.vel, &lap_psi, p);
            return Err(Error::RadicandNonpositive {
                node,
                radicand,
                h_max,
            });
        }
        Field(out)
    };
    let state = State::new(u.psi.clone(), vel, u.t + h);
    if let Some(reason) = blowup_reason(&state) {
        return Ok(SubstepResult::blowup(state, 0, reason));
    }
    Ok(SubstepResult::ok(state, 0))
}

/// Largest step keeping every radicand of the closed-form B-flow
/// nonnegative: `min_i (1 - delta vel_i)^2 / (2 beta delta max(L psi_i, 0))`.
pub fn closed_form_step_bound(vel: &[f64], lap_psi: &[f64], p: &ModelParams) -> f64 {
    vel.iter()
        .zip(lap_psi)
        .filter(|(_, &lp)| lp > 0.0)
        .map(|(&v, &lp)| {
            let f = 1.0 - p.delta * v;
            f * f / (2.0 * p.beta * p.delta * lp)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Wave-type B-subproblem `(psi, vel)' = (w_b vel, g(vel) L psi)` with
/// `g = beta~` (I, II, III) or `g = beta` (IV) and `w_b` the decomposition's
/// B-weight.
pub fn solve_b_wave(
    u: &State,
    h: f64,
    p: &ModelParams,
    g: &Grid1D,
    d: Decomposition,
    s: &InnerScheme,
) -> Result<SubstepResult> {
    check_step(h)?;
    s.validate()?;
    u.check(g)?;
    if s.kind == SchemeKind::ClosedForm {
        return Err(Error::Unsupported(format!(
            "closed_form is not available for the B-subproblem of Decomposition {d}"
        )));
    }
    if s.kind.is_implicit() {
        require_dirichlet(g, s.kind)?;
    }
    let linear_coeff = d == Decomposition::IV;
    // (g, g') at one node
    let coeff = |v: f64, i: usize| -> Result<(f64, f64)> {
        if linear_coeff {
            Ok((p.beta, 0.0))
        } else {
            let c = coefficients_checked(v, i, p)?;
            Ok((c.beta_t, c.beta_tp))
        }
    };
    let weight = d.b_psi_weight();
    let k = h / s.substeps as f64;
    let n = g.len();
    let mut psi = u.psi.clone().into_vec();
    let mut vel = u.vel.clone().into_vec();
    let mut iters = 0;

    let rate = |psi: &[f64], vel: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let lap = g.laplacian(psi)?;
        let mut dv = Vec::with_capacity(n);
        for i in 0..n {
            dv.push(coeff(vel[i], i)?.0 * lap[i]);
        }
        Ok((vel.iter().map(|v| weight * v).collect(), dv))
    };

    for _ in 0..s.substeps {
        let (next_psi, next_vel) = match s.kind {
            SchemeKind::ExplicitEuler => {
                let (dp, dv) = rate(&psi, &vel)?;
                (
                    psi.iter().zip(&dp).map(|(a, b)| a + k * b).collect::<Vec<_>>(),
                    vel.iter().zip(&dv).map(|(a, b)| a + k * b).collect::<Vec<_>>(),
                )
            }
            SchemeKind::Rk2Explicit => {
                let (dp1, dv1) = rate(&psi, &vel)?;
                let pp: Vec<f64> = psi.iter().zip(&dp1).map(|(a, b)| a + k * b).collect();
                let pv: Vec<f64> = vel.iter().zip(&dv1).map(|(a, b)| a + k * b).collect();
                let (dp2, dv2) = rate(&pp, &pv)?;
                (
                    (0..n).map(|i| psi[i] + 0.5 * k * (dp1[i] + dp2[i])).collect(),
                    (0..n).map(|i| vel[i] + 0.5 * k * (dv1[i] + dv2[i])).collect(),
                )
            }
            SchemeKind::ImplicitEuler | SchemeKind::CrankNicolson => {
                let th = theta(s.kind);
                let lap0 = g.laplacian(&psi)?;
                let mut z = vel.clone();
                if th < 1.0 {
                    for i in 0..n {
                        z[i] += (1.0 - th) * k * coeff(vel[i], i)?.0 * lap0[i];
                    }
                }
                // psi(w) = psi0 + k*weight*((1-th) vel0 + th w)
                let psi_base: Vec<f64> = (0..n)
                    .map(|i| psi[i] + k * weight * (1.0 - th) * vel[i])
                    .collect();
                let psi_of = |w: &[f64]| -> Vec<f64> {
                    (0..n).map(|i| psi_base[i] + k * weight * th * w[i]).collect()
                };
                let scale = k * th;
                let mut w = vel.clone();
                iters += newton(&mut w, scale, g, p, s, |w| {
                    let lap = g.laplacian(&psi_of(w))?;
                    let mut residual = Vec::with_capacity(n);
                    let mut dd = Vec::with_capacity(n);
                    let mut ee = Vec::with_capacity(n);
                    for i in 0..n {
                        let (gi, gpi) = coeff(w[i], i)?;
                        residual.push(w[i] - z[i] - scale * gi * lap[i]);
                        dd.push(gpi * lap[i]);
                        ee.push(gi * k * weight * th);
                    }
                    Ok(Linearization {
                        residual,
                        d: dd,
                        e: ee,
                    })
                })?;
                (psi_of(&w), w)
            }
            SchemeKind::ClosedForm => unreachable!(),
        };
        psi = next_psi;
        vel = next_vel;
        let state = State::new(Field(psi.clone()), Field(vel.clone()), u.t);
        if let Some(reason) = blowup_reason(&state) {
            return Ok(SubstepResult::blowup(State { t: u.t + h, ..state }, iters, reason));
        }
    }
    Ok(SubstepResult::ok(
        State::new(Field(psi), Field(vel), u.t + h),
        iters,
    ))
}

/// Dispatches to the closed form or the wave solver.
pub fn solve_b(
    u: &State,
    h: f64,
    p: &ModelParams,
    g: &Grid1D,
    d: Decomposition,
    s: &InnerScheme,
) -> Result<SubstepResult> {
    match (s.kind, d) {
        (SchemeKind::ClosedForm, Decomposition::I) => solve_b_closed_form(u, h, p, g),
        _ => solve_b_wave(u, h, p, g, d, s),
    }
}
