//! Extending the horizon by one step past a funnel that already ended adds no cost.

use mpfc_core::{FunnelParams, GainSpec, IntegratorConfig, Predictor, StageCost, SystemModel};
use proptest::prelude::*;

fn paper() -> Predictor {
    Predictor::new(
        SystemModel::builtin("paper-example", 2).unwrap(),
        GainSpec::default(),
        StageCost::diagonal(&[1.0, 1.0], &[0.2, 0.2]).unwrap(),
        IntegratorConfig::default(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn extension_by_one_step_is_free(
        y in prop::collection::vec(-3.0..3.0f64, 2),
        t_frac in 0.02..1.0f64,
        entry in 0.3..0.95f64,
    ) {
        let (h, horizon) = (0.25, 5.0);
        let t_final = t_frac * (horizon - h);
        let n = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let p = FunnelParams::new((n + 1e-3) / (entry * t_final), t_final);
        let pred = paper();
        let short = pred.cost(&y, p, horizon - h).unwrap().cost;
        let long = pred.cost(&y, p, horizon).unwrap().cost;
        prop_assert!((short - long).abs() <= 1e-10, "J_(H-h) = {short}, J_H = {long}");
    }
}
