use mpfc_core::linalg::norm;
use mpfc_core::{
    audit_bounds, audit_containment, audit_descent, run_mpfc, GainSpec, IntegratorConfig, MpfcConfig, OptimizerConfig,
    OuterFunnel, StageCost, SystemModel,
};

fn scalar(integrator: IntegratorConfig) -> MpfcConfig {
    let plant = SystemModel::builtin("scalar-neg-u", 1).unwrap();
    MpfcConfig {
        step: 0.25,
        horizon_steps: 4,
        t_end: 2.0,
        equilibrium_threshold: mpfc_core::mpfc::DEFAULT_EQUILIBRIUM_THRESHOLD,
        model: plant.clone(),
        plant,
        gains: GainSpec::default(),
        stage: StageCost::diagonal(&[1.0], &[0.1]).unwrap(),
        outer: OuterFunnel::Infinite,
        integrator,
        optimizer: OptimizerConfig::default(),
        y0: vec![0.5],
        nodes_per_step: 50,
        noise: None,
    }
}

fn verdicts(cfg: &MpfcConfig) -> Vec<bool> {
    let rec = run_mpfc(cfg).unwrap();
    let steps = rec.summaries();
    let mut v: Vec<bool> = audit_descent(&steps).checks.iter().map(|c| c.passed).collect();
    v.extend(audit_bounds(&steps).checks.iter().map(|c| c.passed));
    v.extend(
        audit_containment(&rec.nodes, &cfg.outer)
            .checks
            .iter()
            .map(|c| c.passed),
    );
    v
}

#[test]
fn halved_tolerances_give_identical_verdicts() {
    let coarse = verdicts(&scalar(IntegratorConfig::default()));
    let fine = verdicts(&scalar(IntegratorConfig::default().halved()));
    assert_eq!(coarse, fine);
    assert!(coarse.iter().all(|&p| p));
}

#[test]
fn scalar_output_norm_decreases_at_sampling_instants() {
    let rec = run_mpfc(&scalar(IntegratorConfig::default())).unwrap();
    let norms: Vec<f64> = rec.steps.iter().map(|s| norm(&s.measured)).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!(norm(rec.final_state()) <= 1e-2 * 0.5);
}

#[test]
fn affine_outer_funnel_is_respected() {
    let plant = SystemModel::parse("affine", "0.5*y1 + y2 - u1; y1*y2 - u2", 2).unwrap();
    let outer = OuterFunnel::Affine { a: 2.0, b: 0.1 };
    let cfg = MpfcConfig {
        model: plant.clone(),
        plant,
        stage: StageCost::diagonal(&[1.0, 1.0], &[0.1, 0.1]).unwrap(),
        outer,
        y0: vec![1.0, -0.5],
        t_end: 3.0,
        ..scalar(IntegratorConfig::default())
    };
    let rec = run_mpfc(&cfg).unwrap();
    assert!(audit_containment(&rec.nodes, &outer).passed());
    for n in &rec.nodes {
        assert!(n.norm_y <= outer.value(n.t));
        assert!(n.phi <= outer.value(n.t));
    }
}
