//! Fixtures shared by the benchmarks.

use mpfc_core::{
    GainSpec, IntegratorConfig, MpfcConfig, OptimizerConfig, OuterFunnel, Predictor, StageCost, SystemModel,
};

pub const PAPER_Y0: [f64; 2] = [3.0, -3.0];

/// The two-dimensional reference scenario: `h = 0.25`, `H = 5`, `t_end = 3`.
pub fn paper_config() -> MpfcConfig {
    let plant = SystemModel::builtin("paper-example", 2).expect("builtin model");
    MpfcConfig {
        step: 0.25,
        horizon_steps: 20,
        t_end: 3.0,
        equilibrium_threshold: mpfc_core::mpfc::DEFAULT_EQUILIBRIUM_THRESHOLD,
        model: plant.clone(),
        plant,
        gains: GainSpec::default(),
        stage: StageCost::diagonal(&[1.0, 1.0], &[0.2, 0.2]).expect("diagonal weights"),
        outer: OuterFunnel::Infinite,
        integrator: IntegratorConfig::default(),
        optimizer: OptimizerConfig::default(),
        y0: PAPER_Y0.to_vec(),
        nodes_per_step: 200,
        noise: None,
    }
}

pub fn paper_predictor() -> Predictor {
    paper_config().predictor()
}
