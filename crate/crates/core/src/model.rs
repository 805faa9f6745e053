//! Westervelt operators in first-order form.
//!
//! With `u = (psi, vel)` the semi-discrete problem reads
//! `u' = F(u) = (vel, at(vel) * L vel + bt(vel) * L psi)` where
//! `at(v) = alpha / (1 - delta v)` and `bt(v) = beta / (1 - delta v)`.
//! Four splittings `F = A + B` are provided through [`Decomposition`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};

/// Physical coefficients. `delta = 2 * gamma` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Informational only; `beta = c^2` for physical parameter sets.
    pub sound_speed: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta: 2.0 * gamma,
            sound_speed: beta.max(0.0).sqrt(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from `delta` directly (`gamma = delta / 2`).
    pub fn with_delta(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        Self::new(alpha, beta, 0.5 * delta)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.gamma, self.delta, self.sound_speed]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.beta <= 0.0 {
            return Err(Error::InvalidParams(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParams(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.delta != 2.0 * self.gamma {
            return Err(Error::InvalidParams(format!(
                "delta must equal 2*gamma, got delta={} gamma={}",
                self.delta, self.gamma
            )));
        }
        if self.sound_speed < 0.0 {
            return Err(Error::InvalidParams("sound speed must be >= 0".into()));
        }
        Ok(())
    }

    /// `alpha = beta = 1`, `gamma = 1/2`.
    pub fn model_problem() -> Self {
        Self::new(1.0, 1.0, 0.5).expect("valid constants")
    }

    /// `alpha = 1e-2`, `c = 1e3`, `beta = c^2`, `delta = 2e-4` (MKS).
    pub fn realistic() -> Self {
        let mut p = Self::with_delta(1e-2, 1e6, 2e-4).expect("valid constants");
        p.sound_speed = 1e3;
        p
    }

    /// Same coefficients with the nonlinearity switched off.
    pub fn linearized(&self) -> Self {
        Self {
            gamma: 0.0,
            delta: 0.0,
            ..*self
        }
    }

    pub fn is_linear(&self) -> bool {
        self.delta == 0.0
    }
}

/// Nodal values of the coefficient functions and their derivatives at a
/// single velocity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub factor: f64,
    pub alpha_t: f64,
    pub alpha_tp: f64,
    pub beta_t: f64,
    pub beta_tp: f64,
    pub beta_tpp: f64,
}

impl Coefficients {
    /// Does not check admissibility; see [`coefficients_checked`].
    pub fn at(vel: f64, p: &ModelParams) -> Self {
        let factor = 1.0 - p.delta * vel;
        let inv = 1.0 / factor;
        let inv2 = inv * inv;
        Self {
            factor,
            alpha_t: p.alpha * inv,
            alpha_tp: p.alpha * p.delta * inv2,
            beta_t: p.beta * inv,
            beta_tp: p.beta * p.delta * inv2,
            beta_tpp: 2.0 * p.beta * p.delta * p.delta * inv2 * inv,
        }
    }
}

pub(crate) fn coefficients_checked(vel: f64, node: usize, p: &ModelParams) -> Result<Coefficients> {
    let c = Coefficients::at(vel, p);
    if !(c.factor > 0.0) {
        return Err(Error::DegenerateState {
            node,
            factor: c.factor,
        });
    }
    Ok(c)
}

/// The pair `(psi, vel)` on one grid at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub psi: Field,
    pub vel: Field,
    pub t: f64,
}

impl State {
    pub fn new(psi: Field, vel: Field, t: f64) -> Self {
        Self { psi, vel, t }
    }

    pub fn zeros(g: &Grid1D) -> Self {
        Self::new(g.zeros(), g.zeros(), 0.0)
    }

    pub fn check(&self, g: &Grid1D) -> Result<()> {
        g.check(&self.psi)?;
        g.check(&self.vel)?;
        self.psi.check_finite()?;
        self.vel.check_finite()
    }

    /// Componentwise difference; the time stamp is taken from `self`.
    pub fn diff(&self, other: &State) -> State {
        State::new(self.psi.sub(&other.psi), self.vel.sub(&other.vel), self.t)
    }

    pub fn max_abs(&self) -> f64 {
        self.psi.max_abs().max(self.vel.max_abs())
    }
}

/// Time derivative of a [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub psi: Field,
    pub vel: Field,
}

impl Rate {
    pub fn add(&self, other: &Rate) -> Rate {
        Rate {
            psi: self.psi.add_scaled(1.0, &other.psi),
            vel: self.vel.add_scaled(1.0, &other.vel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decomposition {
    I,
    II,
    III,
    IV,
}

impl Decomposition {
    pub const ALL: [Decomposition; 4] = [
        Decomposition::I,
        Decomposition::II,
        Decomposition::III,
        Decomposition::IV,
    ];

    /// Weight of `vel` in the `psi` component of `A`.
    pub fn a_psi_weight(self) -> f64 {
        match self {
            Decomposition::I => 1.0,
            Decomposition::II => 0.5,
            Decomposition::III | Decomposition::IV => 0.0,
        }
    }

    /// Weight of `vel` in the `psi` component of `B`.
    pub fn b_psi_weight(self) -> f64 {
        1.0 - self.a_psi_weight()
    }

    pub fn name(self) -> &'static str {
        match self {
            Decomposition::I => "I",
            Decomposition::II => "II",
            Decomposition::III => "III",
            Decomposition::IV => "IV",
        }
    }
}

impl std::fmt::Display for Decomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Decomposition::I),
            "II" => Ok(Decomposition::II),
            "III" => Ok(Decomposition::III),
            "IV" => Ok(Decomposition::IV),
            other => Err(Error::InvalidConfig(format!("unknown decomposition {other:?}"))),
        }
    }
}

fn map_nodes(vel: &[f64], p: &ModelParams, f: impl Fn(&Coefficients) -> f64) -> Result<Field> {
    vel.iter()
        .enumerate()
        .map(|(i, &v)| coefficients_checked(v, i, p).map(|c| f(&c)))
        .collect::<Result<Vec<_>>>()
        .map(Field)
}

/// `alpha / (1 - delta vel)` nodewise.
pub fn coeff_alpha_tilde(vel: &[f64], p: &ModelParams) -> Result<Field> {
    map_nodes(vel, p, |c| c.alpha_t)
}

/// `beta / (1 - delta vel)` nodewise.
pub fn coeff_beta_tilde(vel: &[f64], p: &ModelParams) -> Result<Field> {
    map_nodes(vel, p, |c| c.beta_t)
}

/// Laplacians of both components plus the nodal coefficients.
struct Pieces {
    lap_psi: Field,
    lap_vel: Field,
    alpha_t: Field,
    beta_t: Field,
}

fn pieces(u: &State, p: &ModelParams, g: &Grid1D) -> Result<Pieces> {
    g.check(&u.psi)?;
    g.check(&u.vel)?;
    Ok(Pieces {
        lap_psi: g.laplacian(&u.psi)?,
        lap_vel: g.laplacian(&u.vel)?,
        alpha_t: coeff_alpha_tilde(&u.vel, p)?,
        beta_t: coeff_beta_tilde(&u.vel, p)?,
    })
}

fn zip3(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Field {
    // a*b + c*d
    Field(
        a.iter()
            .zip(b)
            .zip(c.iter().zip(d))
            .map(|((a, b), (c, d))| a * b + c * d)
            .collect(),
    )
}

fn product(a: &[f64], b: &[f64]) -> Field {
    Field(a.iter().zip(b).map(|(a, b)| a * b).collect())
}

pub fn eval_f(u: &State, p: &ModelParams, g: &Grid1D) -> Result<Rate> {
    let pc = pieces(u, p, g)?;
    Ok(Rate {
        psi: u.vel.clone(),
        vel: zip3(&pc.alpha_t, &pc.lap_vel, &pc.beta_t, &pc.lap_psi),
    })
}

pub fn eval_a(u: &State, p: &ModelParams, g: &Grid1D, d: Decomposition) -> Result<Rate> {
    let pc = pieces(u, p, g)?;
    let psi = u.vel.scaled(d.a_psi_weight());
    let vel = match d {
        Decomposition::IV => {
            let n = u.vel.len();
            Field(
                (0..n)
                    .map(|i| {
                        pc.alpha_t[i] * pc.lap_vel[i]
                            + p.delta * u.vel[i] * pc.beta_t[i] * pc.lap_psi[i]
                    })
                    .collect(),
            )
        }
        _ => product(&pc.alpha_t, &pc.lap_vel),
    };
    Ok(Rate { psi, vel })
}

pub fn eval_b(u: &State, p: &ModelParams, g: &Grid1D, d: Decomposition) -> Result<Rate> {
    let psi = u.vel.scaled(d.b_psi_weight());
    let vel = match d {
        Decomposition::IV => {
            g.check(&u.psi)?;
            g.laplacian(&u.psi)?.scaled(p.beta)
        }
        _ => {
            let beta_t = coeff_beta_tilde(&u.vel, p)?;
            g.check(&u.psi)?;
            product(&beta_t, &g.laplacian(&u.psi)?)
        }
    };
    Ok(Rate { psi, vel })
}

/// Extrema of `1 - delta * vel` against a positivity threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NondegReport {
    pub min_factor: f64,
    pub max_factor: f64,
    /// Node attaining `min_factor`.
    pub argmin: usize,
    pub threshold: f64,
    pub passed: bool,
}

pub const DEFAULT_NU_MIN: f64 = 1e-3;

pub fn check_nondegeneracy(u: &State, p: &ModelParams, nu_min: f64) -> NondegReport {
    let mut min_factor = f64::INFINITY;
    let mut max_factor = f64::NEG_INFINITY;
    let mut argmin = 0;
    for (i, &v) in u.vel.iter().enumerate() {
        let f = 1.0 - p.delta * v;
        // NaN compares false everywhere; force it to register as a failure.
        if f < min_factor || f.is_nan() {
            min_factor = f;
            argmin = i;
        }
        if f > max_factor {
            max_factor = f;
        }
    }
    if u.vel.is_empty() {
        min_factor = 1.0;
        max_factor = 1.0;
    }
    NondegReport {
        min_factor,
        max_factor,
        argmin,
        threshold: nu_min,
        passed: min_factor >= nu_min,
    }
}

/// Lie commutator `[A,B](v) = A'(v)B(v) - B'(v)A(v)` for Decomposition I,
/// evaluated from the expanded closed form with the grid's difference
/// stencils standing in for the exact derivatives.
pub fn commutator_ab_decomp1(u: &State, p: &ModelParams, g: &Grid1D) -> Result<Rate> {
    u.check(g)?;
    let n = g.len();
    let coeffs = u
        .vel
        .iter()
        .enumerate()
        .map(|(i, &v)| coefficients_checked(v, i, p))
        .collect::<Result<Vec<_>>>()?;
    let lap_psi = g.laplacian(&u.psi)?;
    let lap_vel = g.laplacian(&u.vel)?;
    let grad_vel = g.first_difference(&u.vel)?;
    let grad_lap_psi = g.first_difference(&lap_psi)?;
    let bilap_psi = g.laplacian(&lap_psi)?;

    let mut zeta1 = Vec::with_capacity(n);
    let mut zeta2 = Vec::with_capacity(n);
    for i in 0..n {
        let c = &coeffs[i];
        let lap_beta_t = c.beta_tpp * grad_vel[i] * grad_vel[i] + c.beta_tp * lap_vel[i];
        let grad_beta_t = c.beta_tp * grad_vel[i];
        zeta1.push(c.beta_t * lap_psi[i]);
        zeta2.push(
            c.alpha_t
                * (lap_beta_t * lap_psi[i]
                    + 2.0 * grad_beta_t * grad_lap_psi[i]
                    + c.beta_t * bilap_psi[i])
                - c.beta_t * lap_vel[i],
        );
    }
    Ok(Rate {
        psi: Field(zeta1),
        vel: Field(zeta2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, -1.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, 1.0, -0.1).is_err());
        let p = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        assert!(p.is_linear());
        let mut bad = unit_params();
        bad.delta = 3.0;
        assert!(bad.validate().is_err());
        let r = ModelParams::realistic();
        assert_eq!(r.beta, r.sound_speed * r.sound_speed);
        assert_eq!(r.delta, 2e-4);
    }

    #[test]
    fn alpha_tilde_examples() {
        let p = unit_params();
        assert_eq!(coeff_alpha_tilde(&[0.0; 4], &p).unwrap().0, vec![1.0; 4]);
        assert_eq!(coeff_alpha_tilde(&[0.5], &p).unwrap()[0], 2.0);
        let lin = ModelParams::new(1.5, 1.0, 0.0).unwrap();
        assert_eq!(coeff_alpha_tilde(&[0.3, 7.0, -2.0], &lin).unwrap().0, vec![1.5; 3]);
        assert!(matches!(
            coeff_beta_tilde(&[0.0, 1.0], &p),
            Err(Error::DegenerateState { node: 1, .. })
        ));
    }

    #[test]
    fn eval_f_nodal_example() {
        // dx = 0.5; middle node has L psi = 1, L vel = 1 and vel = 0.5.
        let g = Grid1D::dirichlet(1.0, 3).unwrap();
        let u = State::new(
            Field(vec![0.125, 0.0, 0.125]),
            Field(vec![0.625, 0.5, 0.625]),
            0.0,
        );
        let p = ModelParams::with_delta(1.0, 1.0, 1.0).unwrap();
        let f = eval_f(&u, &p, &g).unwrap();
        assert!((f.vel[1] - 4.0).abs() < 1e-12);
        assert_eq!(f.psi, u.vel);
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = Grid1D::dirichlet(8.0, 20).unwrap();
        let u = State::zeros(&g);
        let p = unit_params();
        let f = eval_f(&u, &p, &g).unwrap();
        assert!(f.psi.iter().chain(f.vel.iter()).all(|v| *v == 0.0));
        let c = commutator_ab_decomp1(&u, &p, &g).unwrap();
        assert!(c.psi.iter().chain(c.vel.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn decomposition_one_with_zero_velocity() {
        let g = Grid1D::dirichlet(8.0, 40).unwrap();
        let psi = g.sample(|x| (-x * x).exp());
        let u = State::new(psi.clone(), g.zeros(), 0.0);
        let p = unit_params();
        let a = eval_a(&u, &p, &g, Decomposition::I).unwrap();
        assert!(a.psi.iter().chain(a.vel.iter()).all(|v| *v == 0.0));
        let b = eval_b(&u, &p, &g, Decomposition::I).unwrap();
        assert!(b.psi.iter().all(|v| *v == 0.0));
        assert_eq!(b.vel, g.laplacian(&psi).unwrap());
    }

    #[test]
    fn decomposition_four_identity() {
        let p = ModelParams::new(0.7, 2.3, 0.4).unwrap();
        for k in 0..200 {
            let v = -1.0 + 2.0 * k as f64 / 200.0;
            let c = Coefficients::at(v, &p);
            assert!((p.delta * v * c.beta_t + p.beta - c.beta_t).abs() <= 1e-14 * c.beta_t);
        }
    }

    #[test]
    fn nondegeneracy_examples() {
        let g = Grid1D::dirichlet(1.0, 5).unwrap();
        let p = unit_params();
        let u = State::new(g.zeros(), Field(vec![0.1, 0.3, -0.2, 0.0, 0.3]), 0.0);
        let r = check_nondegeneracy(&u, &p, 0.1);
        assert!(r.passed && r.min_factor >= 0.7);
        let u = State::new(g.zeros(), Field(vec![0.1, 1.2, -0.2, 0.0, 0.3]), 0.0);
        let r = check_nondegeneracy(&u, &p, 0.1);
        assert!(!r.passed);
        assert_eq!(r.argmin, 1);
        assert!((r.min_factor + 0.2).abs() < 1e-15);
        let lin = p.linearized();
        let r = check_nondegeneracy(&u, &lin, 0.1);
        assert_eq!((r.min_factor, r.max_factor), (1.0, 1.0));
        let u = State::new(g.zeros(), Field(vec![0.1, f64::NAN, 0.0, 0.0, 0.0]), 0.0);
        assert!(!check_nondegeneracy(&u, &p, 0.1).passed);
    }
}
