#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use westervelt::grid::{state_norm, Field, Grid1D, SpacePair};
use westervelt::model::{commutator_ab_decomp1, eval_a, eval_b, Decomposition, ModelParams, Rate, State};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sum of `terms` Gaussians with amplitudes in `[-amp, amp]`, centres in
/// the middle half of the domain and widths in `[min_width, 2 min_width]`.
/// Keep `min_width` small enough that the bumps vanish to round-off at the
/// walls, otherwise zero ghost values introduce boundary kinks.
pub fn random_bumps(g: &Grid1D, rng: &mut ChaCha8Rng, terms: usize, amp: f64, min_width: f64) -> Field {
    let a = g.half_width();
    let params: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| {
            (
                rng.gen_range(-amp..amp),
                rng.gen_range(-0.25 * a..0.25 * a),
                rng.gen_range(min_width..2.0 * min_width),
            )
        })
        .collect();
    g.sample(|x| {
        params
            .iter()
            .map(|(c, m, w)| c * (-((x - m) / w).powi(2)).exp())
            .sum()
    })
}

/// Random smooth state whose velocity keeps `1 - delta vel >= 1/2`.
pub fn random_state(g: &Grid1D, p: &ModelParams, rng: &mut ChaCha8Rng) -> State {
    let w = 0.075 * g.half_width();
    let psi = random_bumps(g, rng, 3, 1.0, w);
    let mut vel = random_bumps(g, rng, 3, 1.0, w);
    if p.delta > 0.0 {
        let limit = 0.5 / p.delta;
        let m = vel.max_abs();
        if m > limit {
            vel = vel.scaled(limit / m);
        }
    }
    State::new(psi, vel, 0.0)
}

pub fn rate_norm(g: &Grid1D, r: &Rate) -> f64 {
    state_norm(g, &State::new(r.psi.clone(), r.vel.clone(), 0.0), SpacePair::L2xL2).unwrap()
}

pub fn rate_diff(a: &Rate, b: &Rate) -> Rate {
    Rate {
        psi: a.psi.sub(&b.psi),
        vel: a.vel.sub(&b.vel),
    }
}

fn shift(u: &State, w: &Rate, eps: f64) -> State {
    State::new(u.psi.add_scaled(eps, &w.psi), u.vel.add_scaled(eps, &w.vel), u.t)
}

/// Central-difference directional derivative `X'(u) w`.
fn directional(
    f: impl Fn(&State) -> Rate,
    u: &State,
    w: &Rate,
    eps: f64,
) -> Rate {
    let plus = f(&shift(u, w, eps));
    let minus = f(&shift(u, w, -eps));
    Rate {
        psi: plus.psi.sub(&minus.psi).scaled(0.5 / eps),
        vel: plus.vel.sub(&minus.vel).scaled(0.5 / eps),
    }
}

/// `A'(u)B(u) - B'(u)A(u)` from directional finite differences.
pub fn commutator_fd(u: &State, p: &ModelParams, g: &Grid1D, d: Decomposition, eps: f64) -> Rate {
    let a = |v: &State| eval_a(v, p, g, d).unwrap();
    let b = |v: &State| eval_b(v, p, g, d).unwrap();
    let au = a(u);
    let bu = b(u);
    rate_diff(&directional(a, u, &bu, eps), &directional(b, u, &au, eps))
}

/// Classical RK4 for a scalar autonomous ODE.
pub fn rk4_scalar(f: impl Fn(f64) -> f64, y0: f64, t: f64, steps: usize) -> f64 {
    let k = t / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * k * k1);
        let k3 = f(y + 0.5 * k * k2);
        let k4 = f(y + k * k3);
        y += k / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Relative gap between the analytic commutator and directional finite
/// differences; a fine grid keeps the stencil product-rule defect small.
pub fn commutator_relative_error(u: &State, p: &ModelParams, g: &Grid1D) -> f64 {
    let analytic = commutator_ab_decomp1(u, p, g).unwrap();
    let fd = commutator_fd(u, p, g, Decomposition::I, 1e-6);
    rate_norm(g, &rate_diff(&analytic, &fd)) / rate_norm(g, &fd)
}

/// Outcome of the closed-form B-flow oracle over random nodal tuples.
pub struct ClosedFormCheck {
    pub max_abs_error: f64,
    pub tuples: usize,
}

/// Compares the closed-form B-flow of Decomposition I against RK4
/// (10^4 steps) of the nodal ODE `v' = beta L psi / (1 - delta v)` on
/// random admissible tuples `(alpha, beta, delta, v, L psi, h)`, with `h`
/// at most half the admissible bound.
pub fn closed_form_vs_rk4(seed: u64, tuples: usize) -> ClosedFormCheck {
    use westervelt::subsolvers::{closed_form_step_bound, solve_b_closed_form};
    // Three nodes with dx = 1; psi = (0, -L/2, 0) puts L psi = L at the
    // middle node, which is the one checked.
    let g = Grid1D::dirichlet(2.0, 3).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let beta = r.gen_range(0.1..5.0);
        let delta = r.gen_range(0.05..2.0);
        let p = ModelParams::with_delta(r.gen_range(0.1..5.0), beta, delta).unwrap();
        let factor = r.gen_range(0.2..2.0);
        let v0 = (1.0 - factor) / delta;
        let lap = r.gen_range(-2.0..2.0);
        let u = State::new(Field(vec![0.0, -0.5 * lap, 0.0]), Field(vec![0.0, v0, 0.0]), 0.0);
        let laps = g.laplacian(&u.psi).unwrap();
        assert!((laps[1] - lap).abs() < 1e-14);
        let bound = closed_form_step_bound(&u.vel, &laps, &p).min(2.0);
        let h = r.gen_range(0.01..0.5) * bound;
        let closed = solve_b_closed_form(&u, h, &p, &g).unwrap().state.vel[1];
        let rk = rk4_scalar(|v| beta * lap / (1.0 - delta * v), v0, h, 10_000);
        worst = worst.max((closed - rk).abs());
    }
    ClosedFormCheck {
        max_abs_error: worst,
        tuples,
    }
}
