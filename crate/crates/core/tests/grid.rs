mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use westervelt::experiments::fit_slope;
use westervelt::grid::{laplacian_fd, laplacian_spectral, norm_hk, norm_l2, Field, Grid1D};

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn fd_laplacian_converges_at_second_order() {
    // cos(pi x / 2a) vanishes at both walls, so the zero ghost values are exact.
    let a = 1.0;
    let k = PI / (2.0 * a);
    let mut pts = Vec::new();
    for m in [15, 31, 63, 127, 255] {
        let g = Grid1D::dirichlet(a, m).unwrap();
        let f = g.sample(|x| (k * x).cos());
        let exact = g.sample(|x| -k * k * (k * x).cos());
        let lap = laplacian_fd(&f, &g).unwrap();
        pts.push((g.dx(), max_err(&lap, &exact)));
    }
    let slope = fit_slope(&pts).unwrap();
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    for w in pts.windows(2) {
        let ratio = w[0].1 / w[1].1;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }
}

#[test]
fn spectral_laplacian_of_gaussian_is_spectrally_accurate() {
    let g = Grid1D::periodic(8.0, 256).unwrap();
    let f = g.sample(|x| (-x * x).exp());
    let exact = g.sample(|x| (4.0 * x * x - 2.0) * (-x * x).exp());
    let lap = laplacian_spectral(&f, &g).unwrap();
    assert!(max_err(&lap, &exact) < 1e-6);
}

#[test]
fn fd_and_spectral_laplacians_agree_under_refinement() {
    // The second-order stencil cannot match the spectral result to 1e-6 at
    // moderate resolution; their gap must shrink at the stencil's order.
    let mut gaps = Vec::new();
    for m in [128, 256, 512] {
        let fd_grid = Grid1D::dirichlet(8.0, m - 1).unwrap();
        let sp_grid = Grid1D::periodic(8.0, m).unwrap();
        let gauss = |x: f64| (-x * x).exp();
        let fd = laplacian_fd(&fd_grid.sample(gauss), &fd_grid).unwrap();
        let sp = laplacian_spectral(&sp_grid.sample(gauss), &sp_grid).unwrap();
        // Interior Dirichlet node i sits at periodic node i + 1.
        let gap = fd.iter().enumerate().map(|(i, v)| (v - sp[i + 1]).abs()).fold(0.0, f64::max);
        gaps.push(gap);
    }
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.6 && ratio < 4.4, "ratio {ratio}");
    }
}

#[test]
fn gaussian_l2_norm_matches_closed_form() {
    // |exp(-x^2)|_L2^2 = sqrt(pi/2) on the real line; the tail beyond 8 is negligible.
    for g in [Grid1D::dirichlet(8.0, 400).unwrap(), Grid1D::periodic(8.0, 400).unwrap()] {
        let n = norm_l2(&g, &g.sample(|x| (-x * x).exp())).unwrap();
        assert!((n - (PI / 2.0).sqrt().sqrt()).abs() < 1e-10, "{n}");
    }
}

#[test]
fn h3_norm_of_gaussian_matches_quadrature() {
    // Full norm (sum_{j<=3} |f^(j)|^2)^(1/2) of f = exp(-x^2), by midpoint
    // quadrature of the analytic derivatives.
    let derivs = |x: f64| {
        let e = (-x * x).exp();
        [e, -2.0 * x * e, (4.0 * x * x - 2.0) * e, (-8.0 * x * x * x + 12.0 * x) * e]
    };
    let n = 200_000;
    let (a, b) = (-8.0, 8.0);
    let dx = (b - a) / n as f64;
    let mut sq = 0.0;
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * dx;
        sq += derivs(x).iter().map(|d| d * d).sum::<f64>() * dx;
    }
    let golden = sq.sqrt();
    let g = Grid1D::dirichlet(8.0, 3999).unwrap();
    let h3 = norm_hk(&g, &g.sample(|x| (-x * x).exp()), 3).unwrap();
    assert!((h3 - golden).abs() / golden < 1e-4, "{h3} vs {golden}");
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacians_are_linear(f in field_strategy(32), h in field_strategy(32), c in -3.0f64..3.0) {
        for g in [Grid1D::dirichlet(2.0, 32).unwrap(), Grid1D::periodic(2.0, 32).unwrap()] {
            let combo: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x + c * y).collect();
            let lhs = g.laplacian(&combo).unwrap();
            let lf = g.laplacian(&f).unwrap();
            let lh = g.laplacian(&h).unwrap();
            let scale = 1.0 / (g.dx() * g.dx());
            for i in 0..32 {
                prop_assert!((lhs[i] - lf[i] - c * lh[i]).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn laplacians_are_symmetric_and_nonpositive(f in field_strategy(32), h in field_strategy(32)) {
        for g in [Grid1D::dirichlet(2.0, 32).unwrap(), Grid1D::periodic(2.0, 32).unwrap()] {
            let lf = g.laplacian(&f).unwrap();
            let lh = g.laplacian(&h).unwrap();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let scale = 1.0 / (g.dx() * g.dx());
            prop_assert!((dot(&lf, &h) - dot(&f, &lh)).abs() < 1e-9 * scale);
            prop_assert!(dot(&lf, &f) <= 1e-9 * scale);
        }
    }

    #[test]
    fn norms_are_homogeneous_and_subadditive(f in field_strategy(24), h in field_strategy(24), c in -5.0f64..5.0, k in 0usize..4) {
        let g = Grid1D::dirichlet(1.0, 24).unwrap();
        let nf = norm_hk(&g, &f, k).unwrap();
        let nh = norm_hk(&g, &h, k).unwrap();
        let scaled = Field(f.clone()).scaled(c);
        prop_assert!((norm_hk(&g, &scaled, k).unwrap() - c.abs() * nf).abs() <= 1e-9 * (1.0 + nf));
        let sum: Vec<f64> = f.iter().zip(&h).map(|(x, y)| x + y).collect();
        prop_assert!(norm_hk(&g, &sum, k).unwrap() <= nf + nh + 1e-9 * (1.0 + nf + nh));
    }
}
