//! The receding-horizon loop: measure, optimize `(c, T)`, apply the funnel law to the plant
//! for one sampling interval, and audit the cost and containment inequalities online.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::SystemModel;
use crate::error::{MpfcError, Result};
use crate::feasibility::{is_feasible, make_candidate, FeasibilityContext, OuterFunnel};
use crate::funnel::{FunnelParams, GainSpec};
use crate::integrator::{simulate_funnel, IntegratorConfig, Tail};
use crate::linalg::norm;
use crate::optimizer::{fresh_candidate, search, AcceptedFrom, Candidate, OptimizerConfig, WarmStart};
use crate::prediction::{Predictor, StageCost};

pub const DEFAULT_EQUILIBRIUM_THRESHOLD: f64 = 1e-8;

/// Uniform perturbation of each measured component in `[-amplitude, amplitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct MpfcConfig {
    pub step: f64,
    /// Horizon in steps; `H = horizon_steps * step`.
    pub horizon_steps: usize,
    pub t_end: f64,
    pub equilibrium_threshold: f64,
    pub plant: SystemModel,
    pub model: SystemModel,
    pub gains: GainSpec,
    pub stage: StageCost,
    pub outer: OuterFunnel,
    pub integrator: IntegratorConfig,
    pub optimizer: OptimizerConfig,
    pub y0: Vec<f64>,
    pub nodes_per_step: usize,
    pub noise: Option<MeasurementNoise>,
}

impl MpfcConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon_steps as f64 * self.step
    }

    /// Number of sampling instants `t_i = i h` with `t_i < t_end`.
    pub fn step_count(&self) -> usize {
        let raw = self.t_end / self.step;
        let nearest = raw.round();
        if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
            nearest as usize
        } else {
            raw.ceil() as usize
        }
    }

    /// Collects every violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.step > 0.0 && self.step.is_finite()) {
            v.push(format!("step size h must be positive, got {}", self.step));
        }
        if self.horizon_steps < 2 {
            v.push(format!(
                "horizon must span n >= 2 steps, got n = {}",
                self.horizon_steps
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.equilibrium_threshold >= 0.0) {
            v.push("equilibrium threshold must be non-negative".into());
        }
        let m = self.model.dimension();
        if self.plant.dimension() != m {
            v.push(format!(
                "plant dimension {} differs from model dimension {m}",
                self.plant.dimension()
            ));
        }
        if self.stage.dimension() != m {
            v.push(format!(
                "stage cost dimension {} differs from model dimension {m}",
                self.stage.dimension()
            ));
        }
        if self.y0.len() != m {
            v.push(format!("y0 has {} components, model dimension is {m}", self.y0.len()));
        }
        if self.y0.iter().any(|x| !x.is_finite()) {
            v.push("y0 must be finite".into());
        }
        if let Err(e) = self.outer.validate() {
            v.push(e.to_string());
        } else if self.y0.len() == m && !self.outer.is_infinite() {
            let (n0, psi0) = (norm(&self.y0), self.outer.value(0.0));
            if !(n0 < psi0) {
                v.push(format!("initial output norm {n0} is not below psi(0) = {psi0}"));
            }
            if self.t_end > 0.0 {
                if let Err(e) = self.outer.validate_window(self.t_end + self.horizon()) {
                    v.push(e.to_string());
                }
            }
        }
        if let Err(e) = self.integrator.validate() {
            v.push(e.to_string());
        }
        if let Err(e) = self.optimizer.validate() {
            v.push(e.to_string());
        }
        if self.nodes_per_step == 0 {
            v.push("nodes_per_step must be at least 1".into());
        }
        if let Some(n) = &self.noise {
            if !(n.amplitude >= 0.0 && n.amplitude.is_finite()) {
                v.push("measurement noise amplitude must be non-negative".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(MpfcError::InvalidConfig(v.join("; ")))
        }
    }

    pub fn predictor(&self) -> Predictor {
        Predictor::new(self.model.clone(), self.gains, self.stage.clone(), self.integrator)
    }
}

/// The quantities of one step that the audits consume; exactly one row of `steps.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub index: usize,
    pub time: f64,
    pub c: f64,
    pub t_final: f64,
    /// `J_H(yhat_i, c_i*, T_i*)`.
    pub cost: f64,
    /// `int_{t_i}^{t_{i+1}} l` along the plant.
    pub increment: f64,
    pub evaluations: usize,
    pub accepted_from: AcceptedFrom,
}

impl StepSummary {
    pub fn params(&self) -> FunnelParams {
        FunnelParams::new(self.c, self.t_final)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub summary: StepSummary,
    pub measured: Vec<f64>,
    pub terminal_mode: bool,
    /// Warm-start candidate of this step (absent at `i = 0` and in terminal mode).
    pub candidate: Option<Candidate>,
    /// The warm-start candidate passed the membership test before the search.
    pub recursively_feasible: bool,
    /// `J_H(c_i*, T_i*) <= J_H(candidate) + 1e-9`, when a feasible candidate exists.
    pub acceptance_ok: bool,
    /// Plant state at `t_{i+1}`, handed to the next step unchanged.
    pub end_state: Vec<f64>,
    pub snap_residual: f64,
}

/// One output node of the stitched closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub t: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    /// `max(0, phi(t - t_i; c_i*, T_i*))`.
    pub phi: f64,
    pub norm_y: f64,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunEnd {
    EndTime,
    /// Reached `t_end` with terminal mode active since `since_step`.
    TerminalMode {
        since_step: usize,
    },
}

impl fmt::Display for RunEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunEnd::EndTime => f.write_str("end time reached"),
            RunEnd::TerminalMode { since_step } => {
                write!(f, "end time reached in terminal mode (since step {since_step})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRecord {
    pub steps: Vec<StepRecord>,
    pub nodes: Vec<NodeRecord>,
    /// Sum of the step increments.
    pub closed_loop_cost: f64,
    pub end: RunEnd,
}

impl ClosedLoopRecord {
    pub fn summaries(&self) -> Vec<StepSummary> {
        self.steps.iter().map(|s| s.summary).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.steps.last().map(|s| s.end_state.as_slice()).unwrap_or(&[])
    }

    /// Largest jump between the end state of step `i` and the measurement of step `i + 1`.
    pub fn max_stitch_jump(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| {
                w[0].end_state
                    .iter()
                    .zip(&w[1].measured)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn step_failed(step: usize, time: f64) -> impl FnOnce(MpfcError) -> MpfcError {
    move |e| MpfcError::StepFailed {
        step,
        time,
        source: Box::new(e),
    }
}

/// Runs the MPFC loop from `y0` until `t_end`.
pub fn run_mpfc(cfg: &MpfcConfig) -> Result<ClosedLoopRecord> {
    cfg.validate()?;
    let m = cfg.model.dimension();
    let h = cfg.step;
    let horizon = cfg.horizon();
    let predictor = cfg.predictor();
    let n_steps = cfg.step_count();
    let mut noise_rng = cfg.noise.map(|n| (n, ChaCha8Rng::seed_from_u64(n.seed)));

    let mut y = cfg.y0.clone();
    let mut previous: Option<FunnelParams> = None;
    let mut steps = Vec::with_capacity(n_steps);
    let mut nodes = Vec::with_capacity(n_steps * cfg.nodes_per_step + 1);
    let mut total = 0.0;
    let mut terminal_since = None;

    for i in 0..n_steps {
        let t_i = i as f64 * h;
        let window = if i + 1 == n_steps { (cfg.t_end - t_i).min(h) } else { h };
        let mut measured = y.clone();
        if let Some((n, rng)) = noise_rng.as_mut() {
            if n.amplitude > 0.0 {
                for v in &mut measured {
                    *v += rng.random_range(-n.amplitude..=n.amplitude);
                }
            }
        }
        let ctx = FeasibilityContext::new(t_i, horizon, cfg.outer);
        let fail = |e| step_failed(i, t_i)(e);

        let terminal = norm(&measured) <= cfg.equilibrium_threshold;
        let (params, cost, evaluations, accepted_from, candidate) = if terminal {
            terminal_since.get_or_insert(i);
            let mut p = match previous {
                Some(prev) => fresh_candidate(&prev, horizon, &cfg.optimizer),
                None => FunnelParams::new(cfg.optimizer.c_bounds.0, horizon),
            };
            if !is_feasible(&p, &ctx, &measured).is_feasible() {
                p = make_candidate(&ctx, &measured).map_err(fail)?;
            }
            let cost = predictor.cost(&measured, p, horizon).map_err(fail)?.cost;
            (p, cost, 1, AcceptedFrom::FreshCandidate, None)
        } else {
            terminal_since = None;
            let warm = previous.map(|previous| WarmStart { previous, step: h });
            let out = search(&ctx, &measured, warm, &predictor, &cfg.optimizer).map_err(fail)?;
            (
                out.best,
                out.best_cost,
                out.evaluations,
                out.accepted_from,
                out.candidate,
            )
        };
        let recursively_feasible = candidate.is_none_or(|c| c.feasible);
        let acceptance_ok = candidate.is_none_or(|c| !c.feasible || cost <= c.cost + 1e-9);
        if !recursively_feasible {
            log::warn!("step {i}: warm-start candidate infeasible");
        }

        let mut local: Vec<f64> = (0..cfg.nodes_per_step)
            .map(|k| window * k as f64 / cfg.nodes_per_step as f64)
            .collect();
        local.push(window);
        let traj = simulate_funnel(
            &cfg.plant,
            params,
            cfg.gains,
            &cfg.stage,
            &y,
            window,
            &local,
            Tail::Integrate,
            &cfg.integrator,
        )
        .map_err(fail)?;

        let last = i + 1 == n_steps;
        let keep = if last { local.len() } else { local.len() - 1 };
        let mut cursor = 0;
        for (tau, (state, u)) in traj.times.iter().zip(traj.states.iter().zip(&traj.controls)) {
            if cursor < keep && *tau == local[cursor] {
                let phi = (params.c * (params.t_final - tau)).max(0.0);
                nodes.push(NodeRecord {
                    t: t_i + tau,
                    y: state.clone(),
                    u: u.clone(),
                    phi,
                    norm_y: norm(state),
                    step_index: i,
                });
                cursor += 1;
            }
        }
        debug_assert_eq!(cursor, keep);

        let increment = traj.final_cost;
        total += increment;
        log::info!(
            "step {i}: t = {t_i:.4}, (c, T) = ({:.6e}, {:.6e}), J = {cost:.9e}, {} evals, {}",
            params.c,
            params.t_final,
            evaluations,
            accepted_from.as_str()
        );
        steps.push(StepRecord {
            summary: StepSummary {
                index: i,
                time: t_i,
                c: params.c,
                t_final: params.t_final,
                cost,
                increment,
                evaluations,
                accepted_from,
            },
            measured,
            terminal_mode: terminal,
            candidate,
            recursively_feasible,
            acceptance_ok,
            end_state: traj.final_state.clone(),
            snap_residual: traj.snap_residual,
        });
        debug_assert_eq!(traj.final_state.len(), m);
        y = traj.final_state;
        previous = Some(params);
    }

    Ok(ClosedLoopRecord {
        steps,
        nodes,
        closed_loop_cost: total,
        end: match terminal_since {
            Some(since_step) => RunEnd::TerminalMode { since_step },
            None => RunEnd::EndTime,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub label: String,
    pub detail: String,
}

/// Outcome of one audit; `Display` renders one `PASS`/`FAIL` line per check.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl AuditReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, passed: bool, label: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check {
            passed,
            label: label.into(),
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        if self.checks.is_empty() {
            writeln!(f, "PASS vacuous")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.label,
                c.detail
            )?;
        }
        writeln!(f, "{} {}", if self.passed() { "PASS" } else { "FAIL" }, self.name)
    }
}

pub const DESCENT_TOLERANCE: f64 = 1e-6;
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Per-step `int l <= J_i - J_{i+1}` within `1e-6 (1 + |J_i|)`, increments non-negative, and
/// partial sums bounded by `J_0 + 1e-6`.
pub fn audit_descent(steps: &[StepSummary]) -> AuditReport {
    let mut r = AuditReport::new("descent");
    for w in steps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let drop = a.cost - b.cost;
        let tol = DESCENT_TOLERANCE * (1.0 + a.cost.abs());
        r.check(
            a.increment <= drop + tol,
            format!("step {} -> {}", a.index, b.index),
            format!("increment {:.9e} <= J drop {:.9e} (tol {:.1e})", a.increment, drop, tol),
        );
    }
    if let Some(first) = steps.first() {
        let negative: Vec<usize> = steps
            .iter()
            .filter(|s| !(s.increment >= 0.0))
            .map(|s| s.index)
            .collect();
        r.check(
            negative.is_empty(),
            "increments non-negative",
            if negative.is_empty() {
                format!("{} steps", steps.len())
            } else {
                format!("negative at steps {negative:?}")
            },
        );
        let mut sum = 0.0;
        let mut worst: f64 = 0.0;
        let mut first_bad = None;
        for s in steps {
            sum += s.increment;
            worst = worst.max(sum);
            if first_bad.is_none() && sum > first.cost + DESCENT_TOLERANCE {
                first_bad = Some(s.index);
            }
        }
        r.check(
            first_bad.is_none(),
            "partial sums",
            match first_bad {
                None => format!("max {:.9e} <= J_0 {:.9e}", worst, first.cost),
                Some(i) => format!("exceeds J_0 {:.9e} at step {i}", first.cost),
            },
        );
    }
    r
}

/// `c_i* <= J_{i-1} + 1e-9` for `i >= 1` and `max c_i* <= J_0 + 1e-9`.
pub fn audit_bounds(steps: &[StepSummary]) -> AuditReport {
    let mut r = AuditReport::new("bounds");
    for w in steps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        r.check(
            b.c <= a.cost + BOUND_TOLERANCE,
            format!("step {}", b.index),
            format!("c* {:.9e} <= J_prev {:.9e}", b.c, a.cost),
        );
    }
    if let Some(first) = steps.first() {
        let max_c = steps.iter().map(|s| s.c).fold(f64::NEG_INFINITY, f64::max);
        r.check(
            max_c <= first.cost + BOUND_TOLERANCE,
            "max c*",
            format!("{:.9e} <= J_0 {:.9e}", max_c, first.cost),
        );
    }
    r
}

/// At every node: `|y| < phi` where `phi > 0` and `|y| <= psi(t)` where `psi` is finite,
/// both without slack. One line per step; each failing node is listed.
pub fn audit_containment(nodes: &[NodeRecord], outer: &OuterFunnel) -> AuditReport {
    let mut r = AuditReport::new("containment");
    let mut start = 0;
    while start < nodes.len() {
        let step = nodes[start].step_index;
        let end = nodes[start..]
            .iter()
            .position(|n| n.step_index != step)
            .map_or(nodes.len(), |k| start + k);
        let mut min_margin = f64::INFINITY;
        let mut bad = 0;
        for n in &nodes[start..end] {
            if n.phi > 0.0 {
                min_margin = min_margin.min(n.phi - n.norm_y);
                if !(n.norm_y < n.phi) {
                    bad += 1;
                    r.check(
                        false,
                        format!("node t = {:.9e}", n.t),
                        format!("|y| = {:.9e} not below phi = {:.9e}", n.norm_y, n.phi),
                    );
                }
            }
            if !outer.is_infinite() {
                let psi = outer.value(n.t);
                if !(n.norm_y <= psi) {
                    bad += 1;
                    r.check(
                        false,
                        format!("node t = {:.9e}", n.t),
                        format!("|y| = {:.9e} exceeds psi = {:.9e}", n.norm_y, psi),
                    );
                }
            }
        }
        r.check(
            bad == 0,
            format!("step {step}"),
            format!("{} nodes, min phi - |y| = {:.9e}", end - start, min_margin),
        );
        start = end;
    }
    r
}
