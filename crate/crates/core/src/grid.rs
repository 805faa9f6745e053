//! Uniform one-dimensional grids on `(-a, a)`, discrete Laplacians and
//! discrete Sobolev norms.
//!
//! Dirichlet grids store interior nodes only; the boundary values are
//! identically zero and enter the stencils as ghost values. Periodic grids
//! store `M` nodes starting at `-a` and use an FFT-based Laplacian.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    DirichletZero,
    Periodic,
}

struct SpectralPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `-k^2` in FFT ordering.
    symbol: Vec<f64>,
}

#[derive(Clone)]
pub struct Grid1D {
    half_width: f64,
    num_nodes: usize,
    dx: f64,
    bc: BoundaryMode,
    spectral: Option<Arc<SpectralPlan>>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("half_width", &self.half_width)
            .field("num_nodes", &self.num_nodes)
            .field("dx", &self.dx)
            .field("bc", &self.bc)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width
            && self.num_nodes == other.num_nodes
            && self.bc == other.bc
    }
}

impl Grid1D {
    pub fn new(half_width: f64, num_nodes: usize, bc: BoundaryMode) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        if num_nodes < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {num_nodes}"
            )));
        }
        let width = 2.0 * half_width;
        let (dx, spectral) = match bc {
            BoundaryMode::DirichletZero => (width / (num_nodes + 1) as f64, None),
            BoundaryMode::Periodic => {
                let dx = width / num_nodes as f64;
                let spectral = if num_nodes % 2 == 0 {
                    Some(Arc::new(plan_spectral(num_nodes, half_width)))
                } else {
                    None
                };
                (dx, spectral)
            }
        };
        Ok(Self {
            half_width,
            num_nodes,
            dx,
            bc,
            spectral,
        })
    }

    pub fn dirichlet(half_width: f64, num_nodes: usize) -> Result<Self> {
        Self::new(half_width, num_nodes, BoundaryMode::DirichletZero)
    }

    pub fn periodic(half_width: f64, num_nodes: usize) -> Result<Self> {
        Self::new(half_width, num_nodes, BoundaryMode::Periodic)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.num_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.num_nodes == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bc(&self) -> BoundaryMode {
        self.bc
    }

    pub fn node(&self, i: usize) -> f64 {
        match self.bc {
            BoundaryMode::DirichletZero => -self.half_width + (i + 1) as f64 * self.dx,
            BoundaryMode::Periodic => -self.half_width + i as f64 * self.dx,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.num_nodes).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field((0..self.num_nodes).map(|i| f(self.node(i))).collect())
    }

    pub fn zeros(&self) -> Field {
        Field(vec![0.0; self.num_nodes])
    }

    pub fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.num_nodes {
            return Err(Error::GridMismatch {
                expected: self.num_nodes,
                found: f.len(),
            });
        }
        Ok(())
    }

    /// The grid's Laplacian: central differences on Dirichlet grids,
    /// spectral on periodic grids.
    pub fn laplacian(&self, f: &[f64]) -> Result<Field> {
        match self.bc {
            BoundaryMode::DirichletZero => laplacian_fd(f, self),
            BoundaryMode::Periodic => laplacian_spectral(f, self),
        }
    }

    /// Largest magnitude of an eigenvalue of [`Grid1D::laplacian`].
    pub fn laplacian_spectral_radius(&self) -> f64 {
        match self.bc {
            BoundaryMode::DirichletZero => 4.0 / (self.dx * self.dx),
            BoundaryMode::Periodic => (std::f64::consts::PI / self.dx).powi(2),
        }
    }

    /// First-order central difference with zero extension (Dirichlet) or
    /// wrap-around (periodic).
    pub fn first_difference(&self, f: &[f64]) -> Result<Field> {
        self.check(f)?;
        let n = f.len();
        let inv = 0.5 / self.dx;
        let out = (0..n)
            .map(|i| {
                let (left, right) = self.neighbours(f, i);
                (right - left) * inv
            })
            .collect();
        Ok(Field(out))
    }

    fn neighbours(&self, f: &[f64], i: usize) -> (f64, f64) {
        let n = f.len();
        match self.bc {
            BoundaryMode::DirichletZero => {
                let left = if i == 0 { 0.0 } else { f[i - 1] };
                let right = if i + 1 == n { 0.0 } else { f[i + 1] };
                (left, right)
            }
            BoundaryMode::Periodic => (f[(i + n - 1) % n], f[(i + 1) % n]),
        }
    }
}

fn plan_spectral(m: usize, half_width: f64) -> SpectralPlan {
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    let base = 2.0 * std::f64::consts::PI / (2.0 * half_width);
    let half = m / 2;
    let symbol = (0..m)
        .map(|j| {
            let mode = if j < half {
                j as f64
            } else {
                j as f64 - m as f64
            };
            let k = base * mode;
            -k * k
        })
        .collect();
    SpectralPlan {
        forward,
        inverse,
        symbol,
    }
}

/// Grid samples of a scalar function. Length always matches the grid it
/// was built on; non-finite entries are a fault detected by
/// [`Field::check_finite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field(self.0.iter().map(|v| c * v).collect())
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &[f64]) -> Field {
        Field(self.0.iter().zip(other).map(|(a, b)| a + c * b).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Field {
        self.add_scaled(-1.0, other)
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Second-order central difference with zero ghost values outside both ends.
pub fn laplacian_fd(f: &[f64], g: &Grid1D) -> Result<Field> {
    if g.bc != BoundaryMode::DirichletZero {
        return Err(Error::WrongBoundaryMode {
            required: "dirichlet_zero",
        });
    }
    g.check(f)?;
    let n = f.len();
    let inv = 1.0 / (g.dx * g.dx);
    let out = (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { f[i - 1] };
            let right = if i + 1 == n { 0.0 } else { f[i + 1] };
            (left - 2.0 * f[i] + right) * inv
        })
        .collect();
    Ok(Field(out))
}

/// Fourier Laplacian: inverse transform of `-k^2` times the transform.
pub fn laplacian_spectral(f: &[f64], g: &Grid1D) -> Result<Field> {
    if g.bc != BoundaryMode::Periodic {
        return Err(Error::WrongBoundaryMode {
            required: "periodic",
        });
    }
    let plan = g.spectral.as_ref().ok_or_else(|| {
        Error::InvalidGrid(format!(
            "spectral Laplacian needs an even node count, got {}",
            g.num_nodes
        ))
    })?;
    g.check(f)?;
    let n = f.len();
    let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward.process(&mut buf);
    for (c, s) in buf.iter_mut().zip(&plan.symbol) {
        *c *= *s;
    }
    plan.inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(Field(buf.iter().map(|c| c.re * scale).collect()))
}

pub fn norm_l2(g: &Grid1D, f: &[f64]) -> Result<f64> {
    g.check(f)?;
    Ok((g.dx * f.iter().map(|v| v * v).sum::<f64>()).sqrt())
}

/// Discrete `H^k` norm, `sqrt(sum_{j<=k} |D^j f|_{L2}^2)`, with `D` the grid's
/// first-order central difference.
pub fn norm_hk(g: &Grid1D, f: &[f64], k: usize) -> Result<f64> {
    if k > 3 {
        return Err(Error::InvalidParams(format!(
            "Sobolev index must be at most 3, got {k}"
        )));
    }
    let mut sum = norm_l2(g, f)?.powi(2);
    let mut deriv = Field(f.to_vec());
    for _ in 0..k {
        deriv = g.first_difference(&deriv)?;
        sum += norm_l2(g, &deriv)?.powi(2);
    }
    Ok(sum.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpacePair {
    L2xL2,
    H3xH1,
}

/// Product-space norm `|u1|_{X1} + |u2|_{X2}`.
pub fn state_norm(g: &Grid1D, u: &State, pair: SpacePair) -> Result<f64> {
    let (k1, k2) = match pair {
        SpacePair::L2xL2 => (0, 0),
        SpacePair::H3xH1 => (3, 1),
    };
    Ok(norm_hk(g, &u.psi, k1)? + norm_hk(g, &u.vel, k2)?)
}
