//! Horizon cost checked against references that share no code with the adaptive path.

use mpfc_core::integrator::integrate_funnel_phase;
use mpfc_core::{
    evaluate_cost, simulate_funnel, stage_cost, FunnelParams, GainSpec, IntegratorConfig, StageCost, SystemModel, Tail,
};

/// `int_0^1 y^2` for `y' = -u` under the funnel law with `(c, T) = (1, 1)` from `y = 0.5`,
/// from the classical RK4 oracle below (step 1e-6, trapezoid quadrature).
const SCALAR_INTEGRAL: f64 = 0.04304319400741129;

/// Classical RK4 on the scalar closed loop `y' = -2 c y / (phi (1 - y^2/phi^2))`,
/// `phi = c (T - t)`, with the stage cost `q y^2` accumulated by the trapezoid rule.
/// Stops a little before `T`: there `|y| = O((T - t)^2)` and the remaining cost is negligible.
fn rk4_scalar_integral(y0: f64, c: f64, t_final: f64, q: f64, dt: f64) -> f64 {
    let rhs = |t: f64, y: f64| {
        let phi = c * (t_final - t);
        let s = y * y / (phi * phi);
        -(2.0 * c / (1.0 - s)) * y / phi
    };
    let stop = t_final - 1e-5;
    let steps = (stop / dt).floor() as usize;
    let (mut t, mut y, mut acc) = (0.0, y0, 0.0);
    for _ in 0..steps {
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
        let k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
        let k4 = rhs(t + dt, y + dt * k3);
        let next = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        acc += 0.5 * dt * q * (y * y + next * next);
        y = next;
        t += dt;
    }
    acc
}

fn scalar_model() -> SystemModel {
    SystemModel::builtin("scalar-neg-u", 1).unwrap()
}

#[test]
fn rk4_oracle_reproduces_frozen_reference() {
    let oracle = rk4_scalar_integral(0.5, 1.0, 1.0, 1.0, 1e-6);
    assert!(
        (oracle - SCALAR_INTEGRAL).abs() <= 1e-10,
        "oracle {oracle:.17} drifted from {SCALAR_INTEGRAL:.17}"
    );
}

#[test]
fn scalar_cost_matches_rk4_oracle() {
    let stage = StageCost::diagonal(&[1.0], &[0.0]).unwrap();
    let r = evaluate_cost(
        &[0.5],
        FunnelParams::new(1.0, 1.0),
        &scalar_model(),
        GainSpec::default(),
        &stage,
        2.0,
        &IntegratorConfig::default(),
    )
    .unwrap();
    let want = SCALAR_INTEGRAL + 1.0;
    assert!(
        (r.integral - SCALAR_INTEGRAL).abs() <= 1e-6 * SCALAR_INTEGRAL,
        "integral {}",
        r.integral
    );
    assert!((r.cost - want).abs() <= 1e-6 * want, "J = {}", r.cost);
    assert!(r.equilibrium_reached);
}

/// Composite Simpson over an even number of uniform panels.
fn simpson(values: &[f64], dt: f64) -> f64 {
    assert!(values.len() % 2 == 1);
    let n = values.len() - 1;
    let inner: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * values[k]).sum();
    dt / 3.0 * (values[0] + inner + values[n])
}

fn simpson_cross_check(model: &SystemModel, stage: &StageCost, y0: &[f64], p: FunnelParams) {
    let cfg = IntegratorConfig::default();
    let end = p.t_max(cfg.spatial_accuracy);
    let panels = 20_000;
    let dt = end / panels as f64;
    let nodes: Vec<f64> = (0..=panels).map(|k| k as f64 * dt).collect();
    let tr = simulate_funnel(model, p, GainSpec::default(), stage, y0, end, &nodes, Tail::Skip, &cfg).unwrap();
    assert_eq!(tr.times.len(), nodes.len());
    let ell: Vec<f64> = tr
        .states
        .iter()
        .zip(&tr.controls)
        .map(|(y, u)| stage_cost(y, u, stage).unwrap())
        .collect();
    let post_hoc = simpson(&ell, dt);
    let carried = tr.final_cost;
    assert!(
        (post_hoc - carried).abs() <= 1e-6 * carried.abs(),
        "carried {carried} vs Simpson {post_hoc}"
    );
}

#[test]
fn carried_cost_matches_simpson_scalar() {
    let stage = StageCost::diagonal(&[1.0], &[0.1]).unwrap();
    simpson_cross_check(&scalar_model(), &stage, &[0.5], FunnelParams::new(1.0, 1.0));
}

#[test]
fn carried_cost_matches_simpson_paper_plant() {
    let model = SystemModel::builtin("paper-example", 2).unwrap();
    let stage = StageCost::diagonal(&[1.0, 1.0], &[0.2, 0.2]).unwrap();
    simpson_cross_check(&model, &stage, &[3.0, -3.0], FunnelParams::new(5.4817, 0.8583));
}

#[test]
fn funnel_phase_stops_at_spatial_accuracy() {
    let stage = StageCost::diagonal(&[1.0], &[0.0]).unwrap();
    let cfg = IntegratorConfig::default();
    let p = FunnelParams::new(1.0, 1.0);
    let tr = integrate_funnel_phase(&scalar_model(), p, GainSpec::default(), &stage, &[0.5], &cfg).unwrap();
    for (t, y) in tr.times.iter().zip(&tr.states) {
        assert!(y[0].abs() < 1.0 - t, "|y({t})| = {}", y[0].abs());
    }
    assert!(tr.snap_residual < cfg.spatial_accuracy);
    assert_eq!(tr.final_state, vec![0.0]);
}
