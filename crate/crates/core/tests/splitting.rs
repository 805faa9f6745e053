mod common;

use westervelt::experiments::{default_ladder, fit_slope, measure_errors, ErrorKind, MeasureOptions, Scenario};
use westervelt::grid::{state_norm, Field, Grid1D, SpacePair};
use westervelt::model::{eval_f, Decomposition, State};
use westervelt::splitting::{compose_step, Integrator, IntegratorConfig, SplitScheme, SubFlows};
use westervelt::subsolvers::{InnerScheme, Stability, SubstepResult};
use westervelt::{Result, SchemeKind};

fn presets() -> [SplitScheme; 4] {
    [
        SplitScheme::lie_ab(),
        SplitScheme::lie_ba(),
        SplitScheme::strang_aba(),
        SplitScheme::strang_bab(),
    ]
}

#[test]
fn split_step_is_consistent_with_f() {
    let sc = Scenario::model_problem();
    let g = sc.grid().unwrap();
    let u = sc.initial_state(&g).unwrap();
    let f = eval_f(&u, &sc.params, &g).unwrap();
    for d in Decomposition::ALL {
        for scheme in presets() {
            let cfg = IntegratorConfig::new(d, scheme.clone());
            let integ = Integrator::new(&sc.params, &g, &cfg).unwrap();
            let pts: Vec<(f64, f64)> = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
                .iter()
                .map(|&h| {
                    let step = integ.split_step(&u, h).unwrap().state;
                    let euler = State::new(u.psi.add_scaled(h, &f.psi), u.vel.add_scaled(h, &f.vel), h);
                    (h, state_norm(&g, &step.diff(&euler), SpacePair::L2xL2).unwrap())
                })
                .collect();
            let slope = fit_slope(&pts[1..]).unwrap();
            assert!(slope >= 1.8, "{d} {}: {slope}", scheme.name);
        }
    }
}

/// Local-error slope of Decomposition I with near-exact inner solves
/// (Crank-Nicolson, 16 substeps per stage).
fn exact_grade_local_slope(scheme: SplitScheme, ladder: &[f64]) -> f64 {
    let sc = Scenario::model_problem();
    let inner = InnerScheme::new(SchemeKind::CrankNicolson).with_substeps(16);
    let cfg = IntegratorConfig::new(Decomposition::I, scheme).with_inner(inner, InnerScheme::new(SchemeKind::ClosedForm));
    let opts = MeasureOptions {
        global: false,
        ..MeasureOptions::default()
    };
    measure_errors(&sc, &cfg, ladder, &opts).unwrap().slopes.local_l2l2.unwrap()
}

#[test]
fn lie_local_error_is_second_order() {
    let slope = exact_grade_local_slope(SplitScheme::lie_ab(), &default_ladder(1.0));
    assert!((slope - 2.0).abs() < 0.25, "{slope}");
}

#[test]
fn strang_local_error_is_third_order_once_resolved() {
    // On h <= 1/320 the diffusion stiffness h * lambda_max drops below one
    // and the asymptotic order is visible.
    let ladder: Vec<f64> = [320, 640, 1280, 2560].iter().map(|&n| 1.0 / n as f64).collect();
    let slope = exact_grade_local_slope(SplitScheme::strang_aba(), &ladder);
    assert!((slope - 3.0).abs() < 0.25, "{slope}");
}

#[test]
#[ignore = "pre-asymptotic on the default ladder: the fitted slope is about 2.63"]
fn strang_local_error_is_third_order_on_default_ladder() {
    let slope = exact_grade_local_slope(SplitScheme::strang_aba(), &default_ladder(1.0));
    assert!((slope - 3.0).abs() < 0.25, "{slope}");
}

#[test]
fn integration_is_deterministic() {
    let sc = Scenario::model_problem();
    let g = sc.grid().unwrap();
    let u = sc.initial_state(&g).unwrap();
    for d in Decomposition::ALL {
        let cfg = IntegratorConfig::new(d, SplitScheme::strang_aba());
        let integ = Integrator::new(&sc.params, &g, &cfg).unwrap();
        let a = integ.integrate(&u, 1.0, 40).unwrap();
        let b = integ.integrate(&u, 1.0, 40).unwrap();
        let bits = |s: &State| s.psi.iter().chain(s.vel.iter()).map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.state), bits(&b.state));
        assert_eq!(a.effort, b.effort);
    }
}

#[test]
fn decomposition_one_needs_no_b_side_newton() {
    let sc = Scenario::model_problem();
    let g = sc.grid().unwrap();
    let u = sc.initial_state(&g).unwrap();
    let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab());
    let run = Integrator::new(&sc.params, &g, &cfg).unwrap().integrate(&u, 1.0, 20).unwrap();
    assert_eq!(run.effort.newton_b, 0);
    assert!(run.effort.newton_a > 0);
    let cfg = IntegratorConfig::new(Decomposition::III, SplitScheme::lie_ab());
    let run = Integrator::new(&sc.params, &g, &cfg).unwrap().integrate(&u, 1.0, 20).unwrap();
    assert!(run.effort.newton_b > 0);
}

#[test]
fn global_error_ladder_reports_local_and_global_records() {
    let sc = Scenario::model_problem();
    let cfg = IntegratorConfig::new(Decomposition::I, SplitScheme::lie_ab());
    let ladder = [0.1, 0.05, 0.025];
    let report = measure_errors(&sc, &cfg, &ladder, &MeasureOptions::default()).unwrap();
    assert_eq!(report.records_of(ErrorKind::Global).count(), 3);
    assert_eq!(report.records_of(ErrorKind::Local).count(), 3);
    assert!(report.slopes.global_l2l2.is_some());
    let fp = &report.records[0].fingerprint;
    assert!(report.records.iter().all(|r| &r.fingerprint == fp));
}

/// Two commuting diagonal flows `vel' = a .* vel` and `vel' = b .* vel`,
/// integrated exactly.
struct DiagonalFlows {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn exp_flow(rates: &[f64], u: &State, t: f64) -> Result<SubstepResult> {
    let vel = Field(u.vel.iter().zip(rates).map(|(v, r)| v * (r * t).exp()).collect());
    Ok(SubstepResult {
        state: State::new(u.psi.clone(), vel, u.t + t),
        newton_iters_total: 0,
        stability: Stability::Ok,
    })
}

impl SubFlows for DiagonalFlows {
    fn flow_a(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
        exp_flow(&self.a, u, t)
    }
    fn flow_b(&mut self, u: &State, t: f64) -> Result<SubstepResult> {
        exp_flow(&self.b, u, t)
    }
}

#[test]
fn commuting_flows_are_split_exactly() {
    let g = Grid1D::periodic(1.0, 8).unwrap();
    let mut flows = DiagonalFlows {
        a: (0..8).map(|i| -(i as f64)).collect(),
        b: (0..8).map(|i| -0.5 * (i as f64).powi(2)).collect(),
    };
    let u = State::new(g.zeros(), g.sample(|x| 1.0 + x), 0.0);
    let h = 0.3;
    for scheme in presets() {
        let out = compose_step(&mut flows, &scheme, &u, h).unwrap().state;
        for i in 0..8 {
            let exact = u.vel[i] * ((flows.a[i] + flows.b[i]) * h).exp();
            assert!((out.vel[i] - exact).abs() < 1e-14 * (1.0 + exact.abs()), "{}", scheme.name);
        }
    }
}
