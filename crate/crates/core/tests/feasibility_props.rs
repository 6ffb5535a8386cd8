use mpfc_core::linalg::norm;
use mpfc_core::{
    is_feasible, make_candidate, shift_candidate, simulate_funnel, FeasibilityContext, FunnelParams, GainSpec,
    IntegratorConfig, OuterFunnel, Shifted, StageCost, SystemModel, Tail,
};
use proptest::prelude::*;

/// A state together with an outer funnel that strictly contains it at `t_hat` and stays
/// positive over `[t_hat, t_hat + H]`.
#[derive(Debug, Clone)]
struct Case {
    y: Vec<f64>,
    outer: OuterFunnel,
    t_hat: f64,
    horizon: f64,
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=3).prop_flat_map(|m| prop::collection::vec(-4.0..4.0f64, m))
}

fn case() -> impl Strategy<Value = Case> {
    let outer_kind = 0u8..3;
    (
        state(),
        outer_kind,
        0.0..10.0f64,
        0.05..10.0f64,
        1e-3..5.0f64,
        0.0..1.0f64,
        0.0..3.0f64,
    )
        .prop_map(|(y, kind, t_hat, horizon, margin, slope, r)| {
            let n = norm(&y);
            let outer = match kind {
                0 => OuterFunnel::Infinite,
                1 => {
                    // psi(t_hat) = n + margin, positive up to t_hat + H
                    let end = t_hat + horizon;
                    let b = slope * (n + margin) / end;
                    OuterFunnel::Affine {
                        a: n + margin + b * t_hat,
                        b,
                    }
                }
                _ => {
                    let b = 3.0 * slope;
                    let r = r.min(n + 0.5 * margin);
                    let a = (n + margin - r) * (b * t_hat).exp();
                    OuterFunnel::Exponential { a, b, r }
                }
            };
            Case {
                y,
                outer,
                t_hat,
                horizon,
            }
        })
}

fn ctx(c: &Case) -> FeasibilityContext {
    FeasibilityContext::new(c.t_hat, c.horizon, c.outer)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn constructive_candidate_is_feasible(c in case()) {
        prop_assume!(norm(&c.y) < c.outer.value(c.t_hat));
        let p = make_candidate(&ctx(&c), &c.y).unwrap();
        prop_assert!(is_feasible(&p, &ctx(&c), &c.y).is_feasible(), "{p:?} for {c:?}");
    }

    #[test]
    fn constructive_entry_lies_between_state_and_outer(c in case()) {
        prop_assume!(!c.outer.is_infinite() && norm(&c.y) < c.outer.value(c.t_hat));
        let p = make_candidate(&ctx(&c), &c.y).unwrap();
        let (n, psi) = (norm(&c.y), c.outer.value(c.t_hat));
        let entry = p.entry_radius();
        prop_assert!((entry - 0.5 * (n + psi)).abs() <= 1e-12 * psi.max(1.0));
        prop_assert!(n < entry && entry < psi);
    }

    #[test]
    fn feasible_sets_are_nested(c in case(), k in 1usize..20, ratio in 0.01..1.0f64, frac in 0.0..1.0f64) {
        // H - h with h a fraction of H
        let h = c.horizon * frac * 0.5;
        let short = FeasibilityContext::new(c.t_hat, c.horizon - h, c.outer);
        let t_final = (c.horizon - h) * (k as f64 / 20.0);
        let p = FunnelParams::new((norm(&c.y) + 1e-3) / (ratio * t_final), t_final);
        if is_feasible(&p, &short, &c.y).is_feasible() {
            prop_assert!(is_feasible(&p, &ctx(&c), &c.y).is_feasible());
        }
    }
}

fn plant(m: usize) -> SystemModel {
    match m {
        1 => SystemModel::builtin("scalar-neg-u", 1).unwrap(),
        2 => SystemModel::builtin("paper-example", 2).unwrap(),
        _ => SystemModel::parse("three", "y2 - u1; y1*y3 - u2; -y1 - u3", 3).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// The recursive-feasibility step: after one sampling period under `p`, the shifted
    /// pair is feasible at the new time and state.
    #[test]
    fn shifted_candidate_stays_feasible(c in case(), h_frac in 0.02..0.9f64) {
        prop_assume!(norm(&c.y) < c.outer.value(c.t_hat));
        let cx = ctx(&c);
        let p = make_candidate(&cx, &c.y).unwrap();
        let h = h_frac * p.t_final;
        let m = c.y.len();
        let model = plant(m);
        let stage = StageCost::diagonal(&vec![1.0; m], &vec![0.1; m]).unwrap();
        let tr = simulate_funnel(
            &model, p, GainSpec::default(), &stage, &c.y, h, &[], Tail::Integrate, &IntegratorConfig::default(),
        ).unwrap();
        let Shifted::Params(next) = shift_candidate(&p, h) else {
            panic!("T = {} > h = {h} must shift", p.t_final);
        };
        let later = FeasibilityContext::new(c.t_hat + h, c.horizon, c.outer);
        let verdict = is_feasible(&next, &later, &tr.final_state);
        prop_assert!(verdict.is_feasible(), "{verdict:?}: |y| = {} vs {}", norm(&tr.final_state), next.entry_radius());
    }
}
