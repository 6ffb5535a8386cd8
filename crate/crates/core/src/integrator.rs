//! Adaptive Dormand–Prince 5(4) integration with dense output, and the funnel-phase
//! driver that stops at `t_max = T - delta / c` and snaps the state to the equilibrium.

use crate::dynamics::SystemModel;
use crate::error::{MpfcError, Result};
use crate::funnel::{closed_loop_rhs, feedback_into, FunnelParams, GainSpec};
use crate::linalg::norm;
use crate::prediction::StageCost;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// `delta`: the funnel phase stops where `phi = delta`.
    pub spatial_accuracy: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Spacing of the output grid recorded by [`integrate_funnel_phase`].
    pub output_spacing: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-6,
            spatial_accuracy: 1e-9,
            initial_step: 1e-3,
            min_step: 1e-13,
            max_steps: 10_000_000,
            output_spacing: 0.05,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("spatial_accuracy", self.spatial_accuracy),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("output_spacing", self.output_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MpfcError::InvalidConfig(format!(
                    "integrator {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.min_step >= self.initial_step {
            return Err(MpfcError::InvalidConfig(
                "integrator min_step must be below initial_step".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(MpfcError::InvalidConfig("integrator max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances halved.
    pub fn halved(&self) -> Self {
        Self {
            abs_tol: 0.5 * self.abs_tol,
            rel_tol: 0.5 * self.rel_tol,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, rhs: Self) {
        self.accepted += rhs.accepted;
        self.rejected += rhs.rejected;
        self.evaluations += rhs.evaluations;
    }
}

/// States sampled at the requested nodes, plus the exact end state.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub final_state: Vec<f64>,
    pub stats: StepStats,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output (Shampine)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Upper bound on one state component, checked at every accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limit {
    pub component: usize,
    pub bound: f64,
}

/// Integrates `x' = rhs(t, x)` over `span` and reports the state at each of `nodes`
/// (sorted, inside `span`) via the continuous extension of each accepted step.
///
/// A right-hand side error inside a trial step rejects the step and shrinks `h`;
/// an error at an accepted state is returned as-is.
pub fn integrate<F>(rhs: F, y0: &[f64], span: (f64, f64), cfg: &IntegratorConfig, nodes: &[f64]) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_bounded(rhs, y0, span, cfg, nodes, None)
}

/// [`integrate`], aborting with [`MpfcError::BoundExceeded`] once an accepted state violates `limit`.
pub fn integrate_bounded<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    cfg: &IntegratorConfig,
    nodes: &[f64],
    limit: Option<Limit>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let (a, b) = span;
    if !(a < b) {
        return Err(MpfcError::Domain(format!("integration span [{a}, {b}] is empty")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(MpfcError::NonFiniteState { t: a });
    }
    let n = y0.len();
    let mut t = a;
    let mut y = y0.to_vec();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    let mut stats = StepStats::default();

    let mut times = Vec::with_capacity(nodes.len());
    let mut states = Vec::with_capacity(nodes.len());
    let mut next_node = 0;
    while next_node < nodes.len() && nodes[next_node] <= a {
        times.push(nodes[next_node]);
        states.push(y.clone());
        next_node += 1;
    }

    rhs(t, &y, &mut k[0])?;
    stats.evaluations += 1;

    let mut h = cfg.initial_step.min(b - a);
    let mut last_rejected = false;
    let mut stage_error: Option<MpfcError> = None;
    let mut attempts = 0usize;

    while t < b {
        if attempts >= cfg.max_steps {
            return Err(MpfcError::MaxStepsExceeded(cfg.max_steps));
        }
        attempts += 1;
        if h < cfg.min_step {
            return Err(stage_error.unwrap_or(MpfcError::StepUnderflow { t, step: h }));
        }
        let final_step = t + h >= b;
        let step = if final_step { b - t } else { h };

        if let Err(e) = try_step(&mut rhs, t, &y, step, &mut k, &mut stage, &mut y_new, &mut stats) {
            stage_error = Some(e);
            stats.rejected += 1;
            h = step * 0.25;
            last_rejected = true;
            continue;
        }

        let mut acc = 0.0;
        for i in 0..n {
            let err = step * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            acc += (err / sc) * (err / sc);
        }
        let err = (acc / n as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h = step * 0.25;
            last_rejected = true;
            continue;
        }

        let fac = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
        };
        if err > 1.0 {
            stats.rejected += 1;
            h = step * fac.min(1.0);
            last_rejected = true;
            continue;
        }

        stats.accepted += 1;
        stage_error = None;
        let t_new = if final_step { b } else { t + step };

        if next_node < nodes.len() && nodes[next_node] <= t_new {
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = step * k[0][i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - step * k[6][i] - bspl;
                cont[4][i] =
                    step * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            while next_node < nodes.len() && nodes[next_node] <= t_new {
                let tn = nodes[next_node];
                let state = if tn == t_new {
                    y_new.clone()
                } else {
                    let theta = (tn - t) / step;
                    let theta1 = 1.0 - theta;
                    (0..n)
                        .map(|i| {
                            cont[0][i]
                                + theta
                                    * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])))
                        })
                        .collect()
                };
                times.push(tn);
                states.push(state);
                next_node += 1;
            }
        }

        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MpfcError::NonFiniteState { t });
        }
        if let Some(l) = limit {
            if y[l.component] > l.bound {
                return Err(MpfcError::BoundExceeded {
                    t,
                    value: y[l.component],
                    bound: l.bound,
                });
            }
        }
        // FSAL: the last stage was evaluated at the accepted state
        k.swap(0, 6);

        h = if last_rejected { step * fac.min(1.0) } else { step * fac };
        last_rejected = false;
    }

    Ok(OdeSolution {
        times,
        states,
        final_state: y,
        stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn try_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 7],
    stage: &mut [f64],
    y_new: &mut [f64],
    stats: &mut StepStats,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let [k1, k2, k3, k4, k5, k6, k7] = k;
    for i in 0..n {
        stage[i] = y[i] + h * A21 * k1[i];
    }
    rhs(t + C2 * h, stage, k2)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    rhs(t + C3 * h, stage, k3)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    rhs(t + C4 * h, stage, k4)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    rhs(t + C5 * h, stage, k5)?;
    for i in 0..n {
        stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    rhs(t + h, stage, k6)?;
    for i in 0..n {
        y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    rhs(t + h, y_new, k7)?;
    stats.evaluations += 6;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Integrated to the requested end while the funnel was still open.
    ReachedEnd,
    /// Stopped at `t_max` and snapped the state to zero.
    HitTMax,
    /// Started at the equilibrium; nothing to integrate.
    Equilibrium,
}

/// Sampled closed-loop solution of the funnel feedback, in local time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// Running stage cost `int_0^tau l(y, u)`.
    pub cost: Vec<f64>,
    pub termination: Termination,
    /// Time of the snap to the equilibrium, if it happened.
    pub snapped_at: Option<f64>,
    /// `|y|` just before the snap (zero otherwise).
    pub snap_residual: f64,
    /// Exact state at the end of the window (zero after a snap).
    pub final_state: Vec<f64>,
    pub final_cost: f64,
    pub stats: StepStats,
}

/// What to do after the snap at `t_max` when the window extends further.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Stop at `t_max`; the zero-input tail contributes nothing for class-S models.
    Skip,
    /// Integrate the model with `u = 0` from the zero state up to the window end.
    Integrate,
}

/// Applies the funnel law for `p` to `model` from `y0` on `[0, window]`, recording the
/// solution at `nodes` (local times, sorted). The funnel phase ends at
/// `min(window, t_max)`; if `t_max < window` the state is set to zero there.
#[allow(clippy::too_many_arguments)]
pub fn simulate_funnel(
    model: &SystemModel,
    p: FunnelParams,
    g: GainSpec,
    stage: &StageCost,
    y0: &[f64],
    window: f64,
    nodes: &[f64],
    tail: Tail,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    simulate_funnel_bounded(model, p, g, stage, y0, window, nodes, tail, cfg, None)
}

/// [`simulate_funnel`], aborting once the running cost exceeds `cost_bound`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_funnel_bounded(
    model: &SystemModel,
    p: FunnelParams,
    g: GainSpec,
    stage: &StageCost,
    y0: &[f64],
    window: f64,
    nodes: &[f64],
    tail: Tail,
    cfg: &IntegratorConfig,
    cost_bound: Option<f64>,
) -> Result<Trajectory> {
    let m = model.dimension();
    if y0.len() != m {
        return Err(MpfcError::DimensionMismatch {
            expected: m,
            found: y0.len(),
        });
    }
    let y0_norm = norm(y0);
    if !(y0_norm < p.entry_radius()) {
        return Err(MpfcError::FunnelViolation {
            tau: 0.0,
            norm: y0_norm,
            phi: p.entry_radius(),
        });
    }
    let t_max = p.t_max(cfg.spatial_accuracy);
    let phase_end = t_max.min(window);
    let snaps = t_max < window;

    if y0.iter().all(|&v| v == 0.0) {
        let times: Vec<f64> = nodes.iter().copied().filter(|&t| t <= window).collect();
        return Ok(Trajectory {
            states: vec![vec![0.0; m]; times.len()],
            controls: vec![vec![0.0; m]; times.len()],
            cost: vec![0.0; times.len()],
            times,
            termination: Termination::Equilibrium,
            snapped_at: None,
            snap_residual: 0.0,
            final_state: vec![0.0; m],
            final_cost: 0.0,
            stats: StepStats::default(),
        });
    }

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut controls = Vec::new();
    let mut cost = Vec::new();
    let mut stats = StepStats::default();
    let mut u = vec![0.0; m];

    let (mut end_state, end_cost) = if phase_end > 0.0 {
        let mut phase_nodes: Vec<f64> = nodes.iter().copied().filter(|&t| t < phase_end).collect();
        phase_nodes.push(phase_end);
        let mut aug0 = y0.to_vec();
        aug0.push(0.0);
        let rhs = closed_loop_rhs(model, p, g, stage);
        let limit = cost_bound.map(|bound| Limit { component: m, bound });
        let sol = integrate_bounded(rhs, &aug0, (0.0, phase_end), cfg, &phase_nodes, limit)?;
        stats += sol.stats;
        for (t, s) in sol.times.iter().zip(&sol.states) {
            let y = &s[..m];
            feedback_into(y, *t, &p, &g, &mut u)?;
            times.push(*t);
            states.push(y.to_vec());
            controls.push(u.clone());
            cost.push(s[m]);
        }
        let end = sol.final_state;
        (end[..m].to_vec(), end[m])
    } else {
        // funnel already narrower than delta at tau = 0
        times.push(0.0);
        states.push(y0.to_vec());
        controls.push(vec![0.0; m]);
        cost.push(0.0);
        (y0.to_vec(), 0.0)
    };

    if !snaps {
        return Ok(Trajectory {
            times,
            states,
            controls,
            cost,
            termination: Termination::ReachedEnd,
            snapped_at: None,
            snap_residual: 0.0,
            final_state: end_state,
            final_cost: end_cost,
            stats,
        });
    }

    let snap_time = phase_end.max(0.0);
    let snap_residual = norm(&end_state);
    end_state.fill(0.0);

    if tail == Tail::Integrate {
        let tail_nodes: Vec<f64> = nodes
            .iter()
            .copied()
            .filter(|&t| t > snap_time && t <= window)
            .collect();
        if !tail_nodes.is_empty() || window > snap_time {
            let zero_u = vec![0.0; m];
            let open_loop = |_t: f64, x: &[f64], dx: &mut [f64]| {
                model.eval_into(x, &zero_u, dx);
                Ok(())
            };
            let sol = integrate(open_loop, &end_state, (snap_time, window), cfg, &tail_nodes)?;
            stats += sol.stats;
            for (t, s) in sol.times.into_iter().zip(sol.states) {
                times.push(t);
                states.push(s);
                controls.push(vec![0.0; m]);
                cost.push(end_cost);
            }
            end_state = sol.final_state;
        }
    }

    Ok(Trajectory {
        times,
        states,
        controls,
        cost,
        termination: Termination::HitTMax,
        snapped_at: Some(snap_time),
        snap_residual,
        final_state: end_state,
        final_cost: end_cost,
        stats,
    })
}

/// Output nodes `0, d, 2d, ...` strictly below `end`.
pub fn output_grid(end: f64, spacing: f64) -> Vec<f64> {
    (0..).map(|k| k as f64 * spacing).take_while(|&t| t < end).collect()
}

/// Funnel phase on `[0, t_max]`, `t_max = T - delta / c`, sampled on the configured grid
/// plus `t_max`; the state is taken to be zero from `t_max` on.
pub fn integrate_funnel_phase(
    model: &SystemModel,
    p: FunnelParams,
    g: GainSpec,
    stage: &StageCost,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let nodes = output_grid(p.t_max(cfg.spatial_accuracy), cfg.output_spacing);
    simulate_funnel(model, p, g, stage, y0, p.t_final, &nodes, Tail::Skip, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.36787944117144233;

    /// Default tolerances leave about 1e-7 global error on the unit interval.
    fn tight() -> IntegratorConfig {
        IntegratorConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            ..Default::default()
        }
    }

    #[test]
    fn constant_solution_is_exact() {
        let sol = integrate(
            |_t, _y, d: &mut [f64]| {
                d.fill(0.0);
                Ok(())
            },
            &[1.0, 2.0],
            (0.0, 1.0),
            &IntegratorConfig::default(),
            &[0.5, 1.0],
        )
        .unwrap();
        assert_eq!(sol.final_state, vec![1.0, 2.0]);
        assert_eq!(sol.states, vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn exponential_decay() {
        let sol = integrate(
            |_t, y: &[f64], d: &mut [f64]| {
                d[0] = -y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 1.0),
            &tight(),
            &[],
        )
        .unwrap();
        assert!((sol.final_state[0] - E_INV).abs() <= 1e-8);
    }

    #[test]
    fn gaussian_time_varying() {
        let sol = integrate(
            |t, y: &[f64], d: &mut [f64]| {
                d[0] = -2.0 * t * y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 1.0),
            &tight(),
            &[],
        )
        .unwrap();
        assert!((sol.final_state[0] - E_INV).abs() <= 1e-8);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let nodes: Vec<f64> = (0..=100).map(|k| k as f64 * 0.02).collect();
        let sol = integrate(
            |_t, y: &[f64], d: &mut [f64]| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            &[0.0, 1.0],
            (0.0, 2.0),
            &IntegratorConfig::default(),
            &nodes,
        )
        .unwrap();
        assert_eq!(sol.times, nodes);
        for (t, s) in sol.times.iter().zip(&sol.states) {
            assert!((s[0] - t.sin()).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn empty_span_rejected() {
        let r = integrate(|_, _, _| Ok(()), &[0.0], (1.0, 1.0), &IntegratorConfig::default(), &[]);
        assert!(matches!(r, Err(MpfcError::Domain(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2 from 1 escapes at t = 1
        let r = integrate(
            |_t, y: &[f64], d: &mut [f64]| {
                d[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 2.0),
            &IntegratorConfig::default(),
            &[],
        );
        assert!(matches!(
            r,
            Err(MpfcError::StepUnderflow { .. } | MpfcError::NonFiniteState { .. } | MpfcError::MaxStepsExceeded(_))
        ));
    }

    #[test]
    fn max_steps_enforced() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..Default::default()
        };
        let r = integrate(
            |_t, y: &[f64], d: &mut [f64]| {
                d[0] = -y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 100.0),
            &cfg,
            &[],
        );
        assert_eq!(r.unwrap_err(), MpfcError::MaxStepsExceeded(3));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig {
            min_step: 1e-2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            abs_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn scalar_setup() -> (SystemModel, StageCost) {
        (
            SystemModel::builtin("scalar-neg-u", 1).unwrap(),
            StageCost::diagonal(&[1.0], &[0.0]).unwrap(),
        )
    }

    #[test]
    fn funnel_phase_from_equilibrium() {
        let (model, stage) = scalar_setup();
        let traj = integrate_funnel_phase(
            &model,
            FunnelParams::new(1.0, 1.0),
            GainSpec::default(),
            &stage,
            &[0.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Equilibrium);
        assert!(traj.states.iter().all(|s| s[0] == 0.0));
        assert!(traj.controls.iter().all(|u| u[0] == 0.0));
        assert_eq!(traj.final_cost, 0.0);
    }

    #[test]
    fn funnel_phase_scalar_containment() {
        let (model, stage) = scalar_setup();
        let cfg = IntegratorConfig {
            output_spacing: 1e-3,
            ..Default::default()
        };
        let p = FunnelParams::new(1.0, 1.0);
        let traj = integrate_funnel_phase(&model, p, GainSpec::default(), &stage, &[0.5], &cfg).unwrap();
        assert_eq!(traj.termination, Termination::HitTMax);
        for (t, y) in traj.times.iter().zip(&traj.states) {
            assert!(y[0].abs() < 1.0 - t, "t = {t}, y = {}", y[0]);
        }
        assert!(traj.snap_residual < 1e-9, "{}", traj.snap_residual);
        assert_eq!(traj.final_state, vec![0.0]);
        assert!(traj.cost.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn entry_violation_rejected() {
        let (model, stage) = scalar_setup();
        let r = integrate_funnel_phase(
            &model,
            FunnelParams::new(1.0, 0.5),
            GainSpec::default(),
            &stage,
            &[0.5],
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(MpfcError::FunnelViolation { .. })));
    }

    #[test]
    fn window_shorter_than_funnel() {
        let (model, stage) = scalar_setup();
        let nodes = [0.0, 0.1, 0.2];
        let traj = simulate_funnel(
            &model,
            FunnelParams::new(1.0, 1.0),
            GainSpec::default(),
            &stage,
            &[0.5],
            0.25,
            &nodes,
            Tail::Integrate,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::ReachedEnd);
        assert_eq!(traj.times, vec![0.0, 0.1, 0.2, 0.25]);
        assert!(traj.final_state[0] > 0.0 && traj.final_state[0] < 0.75);
    }

    #[test]
    fn funnel_expiring_inside_window_continues_with_zero_input() {
        let (model, stage) = scalar_setup();
        let nodes: Vec<f64> = (0..=10).map(|k| k as f64 * 0.05).collect();
        let traj = simulate_funnel(
            &model,
            FunnelParams::new(2.0, 0.3),
            GainSpec::default(),
            &stage,
            &[0.5],
            0.5,
            &nodes,
            Tail::Integrate,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::HitTMax);
        let snap = traj.snapped_at.unwrap();
        assert!((snap - (0.3 - 1e-9 / 2.0)).abs() < 1e-15);
        for (t, (y, u)) in traj.times.iter().zip(traj.states.iter().zip(&traj.controls)) {
            if *t > snap {
                assert_eq!((y[0], u[0]), (0.0, 0.0));
            }
        }
        assert_eq!(*traj.times.last().unwrap(), 0.5);
    }
}
