//! Derivative-free search for `(c, T)` in the feasible set, minimizing `J_H`.
//!
//! The search runs Nelder–Mead in `(ln c, T)` with box projection; infeasible points are
//! rejected with `J = +inf` and never integrated. The shifted (or fresh) candidate from the
//! previous step is always evaluated first and wins ties, so the returned cost never exceeds
//! the candidate's.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{MpfcError, Result};
use crate::feasibility::{is_feasible, make_candidate, shift_candidate, Feasibility, FeasibilityContext, Shifted};
use crate::funnel::FunnelParams;
use crate::prediction::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    NelderMead,
    Grid,
}

/// Per-axis lattice for [`grid_oracle`]: `c` log-spaced, `T` linear, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub c_range: (f64, f64),
    pub c_count: usize,
    pub t_range: (f64, f64),
    pub t_count: usize,
}

impl GridSpec {
    pub fn c_values(&self) -> Vec<f64> {
        let (lo, hi) = self.c_range;
        let mut cs: Vec<f64> = spaced(lo.ln(), hi.ln(), self.c_count)
            .into_iter()
            .map(f64::exp)
            .collect();
        // endpoints exactly as given
        if let Some(first) = cs.first_mut() {
            *first = lo;
        }
        if self.c_count > 1 {
            cs[self.c_count - 1] = hi;
        }
        cs
    }

    pub fn t_values(&self) -> Vec<f64> {
        spaced(self.t_range.0, self.t_range.1, self.t_count)
    }

    pub fn len(&self) -> usize {
        self.c_count * self.t_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_evaluations: usize,
    /// Relative size of the initial simplex.
    pub initial_spread: f64,
    /// Relative tolerance on `J` for simplex convergence.
    pub tolerance: f64,
    /// Lattice size `(c, T)` when `method` is [`Method::Grid`].
    pub grid: (usize, usize),
    pub c_bounds: (f64, f64),
    /// Lower bound on `T` as a fraction of the horizon.
    pub t_floor: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::NelderMead,
            max_evaluations: 200,
            initial_spread: 0.2,
            tolerance: 1e-6,
            grid: (50, 50),
            c_bounds: (1e-6, 1e4),
            t_floor: 1e-4,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.c_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(MpfcError::InvalidConfig(format!(
                "optimizer c bounds must satisfy 0 < c_min < c_max, got ({lo}, {hi})"
            )));
        }
        if self.max_evaluations < 10 {
            return Err(MpfcError::InvalidConfig(
                "optimizer max_evaluations must be at least 10".into(),
            ));
        }
        if !(self.initial_spread > 0.0 && self.tolerance > 0.0) {
            return Err(MpfcError::InvalidConfig(
                "optimizer spread and tolerance must be positive".into(),
            ));
        }
        if !(self.t_floor > 0.0 && self.t_floor < 1.0) {
            return Err(MpfcError::InvalidConfig("optimizer t_floor must lie in (0, 1)".into()));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(MpfcError::InvalidConfig("optimizer grid must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStatus {
    Evaluated,
    Infeasible(crate::feasibility::InfeasibleReason),
    /// Feasible, but the prediction failed numerically.
    Failed,
    /// Feasible, but abandoned once its cost provably exceeded the pruning ceiling.
    Pruned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub params: FunnelParams,
    /// `+inf` unless `status` is [`EvalStatus::Evaluated`].
    pub cost: f64,
    pub status: EvalStatus,
}

impl Evaluation {
    /// A cost was computed.
    pub fn evaluated(&self) -> bool {
        self.status == EvalStatus::Evaluated
    }

    /// Membership in the feasible set, independent of how the cost evaluation ended.
    pub fn feasible(&self) -> bool {
        !matches!(self.status, EvalStatus::Infeasible(_))
    }
}

/// Evaluations whose cost exceeds this multiple of the incumbent are abandoned early.
pub const PRUNE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptedFrom {
    Search,
    ShiftedCandidate,
    FreshCandidate,
}

impl AcceptedFrom {
    pub fn as_str(self) -> &'static str {
        match self {
            AcceptedFrom::Search => "search",
            AcceptedFrom::ShiftedCandidate => "shifted-candidate",
            AcceptedFrom::FreshCandidate => "fresh-candidate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "search" => Some(AcceptedFrom::Search),
            "shifted-candidate" => Some(AcceptedFrom::ShiftedCandidate),
            "fresh-candidate" => Some(AcceptedFrom::FreshCandidate),
            _ => None,
        }
    }
}

/// The warm-start candidate handed to [`search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub params: FunnelParams,
    pub kind: AcceptedFrom,
    pub feasible: bool,
    /// `J_H` at the candidate, `+inf` if infeasible.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutcome {
    pub best: FunnelParams,
    /// Best feasible cost found; the computed upper approximation of the value function.
    pub best_cost: f64,
    pub evaluations: usize,
    pub accepted_from: AcceptedFrom,
    pub candidate: Option<Candidate>,
    pub log: Vec<Evaluation>,
}

/// Previous step's parameters; [`search`] shifts them by `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmStart {
    pub previous: FunnelParams,
    pub step: f64,
}

/// Candidate used when the previous funnel expired within the step: `(max(c_min, c/2), H)`.
pub fn fresh_candidate(previous: &FunnelParams, horizon: f64, ocfg: &OptimizerConfig) -> FunnelParams {
    FunnelParams::new((0.5 * previous.c).max(ocfg.c_bounds.0), horizon)
}

struct Objective<'a> {
    ctx: &'a FeasibilityContext,
    yhat: &'a [f64],
    predictor: &'a Predictor,
    log: Vec<Evaluation>,
    incumbent: f64,
}

impl Objective<'_> {
    fn record(&mut self, e: Evaluation) {
        if e.evaluated() {
            self.incumbent = self.incumbent.min(e.cost);
        }
        self.log.push(e);
    }

    fn evaluate(&mut self, params: FunnelParams) -> f64 {
        let ceiling = PRUNE_FACTOR * self.incumbent;
        let e = evaluate_point(self.ctx, self.yhat, self.predictor, params, ceiling);
        self.record(e);
        e.cost
    }
}

/// Costs above `ceiling` come back as [`EvalStatus::Pruned`]; pass `+inf` to evaluate fully.
pub fn evaluate_point(
    ctx: &FeasibilityContext,
    yhat: &[f64],
    predictor: &Predictor,
    params: FunnelParams,
    ceiling: f64,
) -> Evaluation {
    match is_feasible(&params, ctx, yhat) {
        Feasibility::Infeasible(reason) => Evaluation {
            params,
            cost: f64::INFINITY,
            status: EvalStatus::Infeasible(reason),
        },
        Feasibility::Feasible => match predictor.cost_below(yhat, params, ctx.horizon, ceiling) {
            Ok(Some(res)) => Evaluation {
                params,
                cost: res.cost,
                status: EvalStatus::Evaluated,
            },
            Ok(None) => Evaluation {
                params,
                cost: f64::INFINITY,
                status: EvalStatus::Pruned,
            },
            Err(e) => {
                log::debug!("prediction failed at (c, T) = ({}, {}): {e}", params.c, params.t_final);
                Evaluation {
                    params,
                    cost: f64::INFINITY,
                    status: EvalStatus::Failed,
                }
            }
        },
    }
}

/// Search coordinates `(ln c, T)` and their projection onto the parameter box.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    log_c: (f64, f64),
    t: (f64, f64),
}

impl Bounds {
    fn new(ctx: &FeasibilityContext, ocfg: &OptimizerConfig) -> Self {
        Self {
            log_c: (ocfg.c_bounds.0.ln(), ocfg.c_bounds.1.ln()),
            t: (ocfg.t_floor * ctx.horizon, ctx.horizon),
        }
    }

    fn project(&self, x: [f64; 2]) -> [f64; 2] {
        [x[0].clamp(self.log_c.0, self.log_c.1), x[1].clamp(self.t.0, self.t.1)]
    }

    fn params(x: [f64; 2]) -> FunnelParams {
        FunnelParams::new(x[0].exp(), x[1])
    }

    fn coords(p: &FunnelParams) -> [f64; 2] {
        [p.c.ln(), p.t_final]
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// One Nelder–Mead run from `start`; returns the best vertex.
fn nelder_mead(
    obj: &mut Objective<'_>,
    bounds: &Bounds,
    start: ([f64; 2], f64),
    spread: f64,
    ocfg: &OptimizerConfig,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> ([f64; 2], f64) {
    let eval = |obj: &mut Objective<'_>, x: [f64; 2]| -> ([f64; 2], f64) {
        let x = bounds.project(x);
        let f = obj.evaluate(Bounds::params(x));
        (x, f)
    };
    let (x0, f0) = start;
    let span_t = bounds.t.1 - bounds.t.0;
    let dc = (1.0 + spread).ln() * rng.random_range(0.75..1.25);
    // step T inward when starting at the horizon bound
    let dt_mag = (spread * x0[1]).min(0.5 * span_t) * rng.random_range(0.75..1.25);
    let dt = if x0[1] + dt_mag > bounds.t.1 { -dt_mag } else { dt_mag };
    let mut simplex = vec![(x0, f0)];
    if obj.log.len() >= budget {
        return (x0, f0);
    }
    simplex.push(eval(obj, [x0[0] + dc, x0[1]]));
    if obj.log.len() >= budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        return simplex[0];
    }
    simplex.push(eval(obj, [x0[0], x0[1] + dt]));

    while obj.log.len() < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0], simplex[2]);
        let diameter = simplex
            .iter()
            .map(|(x, _)| ((x[0] - best.0[0]).abs()).max((x[1] - best.0[1]).abs() / span_t.max(1e-300)))
            .fold(0.0, f64::max);
        if (worst.1 - best.1).abs() <= ocfg.tolerance * best.1.abs() && diameter < 1e-4 {
            break;
        }
        if diameter < 1e-10 {
            break;
        }
        let centroid = lerp(simplex[0].0, simplex[1].0, 0.5);
        let reflected = eval(obj, lerp(centroid, worst.0, -1.0));
        if reflected.1 < best.1 {
            if obj.log.len() >= budget {
                simplex[2] = reflected;
                break;
            }
            let expanded = eval(obj, lerp(centroid, worst.0, -2.0));
            simplex[2] = if expanded.1 < reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 < simplex[1].1 {
            simplex[2] = reflected;
            continue;
        }
        if obj.log.len() >= budget {
            break;
        }
        let contracted = if reflected.1 < worst.1 {
            eval(obj, lerp(centroid, reflected.0, 0.5))
        } else {
            eval(obj, lerp(centroid, worst.0, 0.5))
        };
        if contracted.1 < worst.1.min(reflected.1) {
            simplex[2] = contracted;
            continue;
        }
        // shrink toward the best vertex
        for vertex in &mut simplex[1..] {
            if obj.log.len() >= budget {
                break;
            }
            *vertex = eval(obj, lerp(best.0, vertex.0, 0.5));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Entry ratios `|y| / (c T)` and horizon fractions of the probe starts.
const PROBE_RATIOS: [f64; 2] = [0.6, 0.9];
const PROBE_FRACTIONS: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

/// Deterministic starting points spread over the entry ratio and terminal time; the cost
/// landscape can have separate basins for slow wide funnels and fast narrow ones.
fn probe_points(ctx: &FeasibilityContext, yhat: &[f64]) -> Vec<FunnelParams> {
    let y = crate::linalg::norm(yhat);
    if y == 0.0 {
        return Vec::new();
    }
    PROBE_FRACTIONS
        .iter()
        .flat_map(|&f| {
            let t = f * ctx.horizon;
            PROBE_RATIOS.iter().map(move |&rho| FunnelParams::new(y / (rho * t), t))
        })
        .collect()
}

/// Up to `count` best evaluated points that are pairwise apart, best first.
fn distinct_starts(
    log: &[Evaluation],
    bounds: &Bounds,
    fallback: ([f64; 2], f64),
    count: usize,
) -> Vec<([f64; 2], f64)> {
    let mut ranked: Vec<([f64; 2], f64)> = log
        .iter()
        .filter(|e| e.evaluated())
        .map(|e| (bounds.project(Bounds::coords(&e.params)), e.cost))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let span_t = bounds.t.1 - bounds.t.0;
    let mut starts: Vec<([f64; 2], f64)> = Vec::new();
    for p in ranked {
        let apart = starts
            .iter()
            .all(|s| (s.0[0] - p.0[0]).abs() > 0.5 || (s.0[1] - p.0[1]).abs() > 0.2 * span_t);
        if apart {
            starts.push(p);
            if starts.len() == count {
                break;
            }
        }
    }
    if starts.is_empty() {
        starts.push(fallback);
    }
    starts
}

/// Evaluates the warm-start candidate (shifted, or fresh when the funnel expired).
pub fn evaluate_candidate(
    ctx: &FeasibilityContext,
    yhat: &[f64],
    warm: &WarmStart,
    predictor: &Predictor,
    ocfg: &OptimizerConfig,
) -> (Candidate, Evaluation) {
    let (params, kind) = match shift_candidate(&warm.previous, warm.step) {
        Shifted::Params(p) => (p, AcceptedFrom::ShiftedCandidate),
        Shifted::Equilibrium => (
            fresh_candidate(&warm.previous, ctx.horizon, ocfg),
            AcceptedFrom::FreshCandidate,
        ),
    };
    let e = evaluate_point(ctx, yhat, predictor, params, f64::INFINITY);
    (
        Candidate {
            params,
            kind,
            feasible: e.feasible(),
            cost: e.cost,
        },
        e,
    )
}

/// Minimizes `J_H` over the feasible set. The result is never worse than the warm-start
/// candidate and wins ties in its favor.
pub fn search(
    ctx: &FeasibilityContext,
    yhat: &[f64],
    warm: Option<WarmStart>,
    predictor: &Predictor,
    ocfg: &OptimizerConfig,
) -> Result<OptimizerOutcome> {
    let mut obj = Objective {
        ctx,
        yhat,
        predictor,
        log: Vec::new(),
        incumbent: f64::INFINITY,
    };
    let candidate = warm.map(|w| {
        let (cand, e) = evaluate_candidate(ctx, yhat, &w, predictor, ocfg);
        obj.record(e);
        cand
    });
    if let Some(c) = &candidate {
        if !c.feasible {
            log::warn!(
                "{} ({}, {}) is not feasible at t = {}",
                c.kind.as_str(),
                c.params.c,
                c.params.t_final,
                ctx.time
            );
        }
    }

    let constructive = make_candidate(ctx, yhat)?;
    let bounds = Bounds::new(ctx, ocfg);
    let seed_point = bounds.project(Bounds::coords(&constructive));
    let seed_cost = obj.evaluate(Bounds::params(seed_point));

    let (best_x, best_f) = match candidate {
        Some(c) if c.feasible && c.cost <= seed_cost => (bounds.project(Bounds::coords(&c.params)), c.cost),
        _ => (seed_point, seed_cost),
    };

    match ocfg.method {
        Method::NelderMead => {
            let mut rng = ChaCha8Rng::seed_from_u64(ocfg.seed);
            for p in probe_points(ctx, yhat) {
                if obj.log.len() >= ocfg.max_evaluations {
                    break;
                }
                obj.evaluate(Bounds::params(bounds.project(Bounds::coords(&p))));
            }
            let starts = distinct_starts(&obj.log, &bounds, (best_x, best_f), 2);
            for (k, &start) in starts.iter().enumerate() {
                let remaining = ocfg.max_evaluations.saturating_sub(obj.log.len());
                let share = if k + 1 == starts.len() {
                    remaining
                } else {
                    remaining / 2
                };
                let cap = obj.log.len() + share;
                let (mut x, mut f) = start;
                while obj.log.len() + 3 <= cap {
                    let (nx, nf) = nelder_mead(&mut obj, &bounds, (x, f), ocfg.initial_spread, ocfg, cap, &mut rng);
                    let improved = nf < f && (f - nf) > ocfg.tolerance * nf.abs();
                    if nf < f {
                        x = nx;
                        f = nf;
                    }
                    if !improved {
                        break;
                    }
                }
                log::trace!("start {k}: J = {f:.9e} at (ln c, T) = ({:.6}, {:.6})", x[0], x[1]);
            }
        }
        Method::Grid => {
            let spec = GridSpec {
                c_range: ocfg.c_bounds,
                c_count: ocfg.grid.0,
                t_range: bounds.t,
                t_count: ocfg.grid.1,
            };
            let lattice = grid_landscape(ctx, yhat, predictor, &spec, PRUNE_FACTOR * obj.incumbent);
            obj.log.extend(lattice);
        }
    }

    // exact argmin over everything evaluated against the candidate (ties to the candidate)
    let search_best = obj
        .log
        .iter()
        .filter(|e| e.evaluated())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .copied();
    let Some(search_best) = search_best else {
        return Err(MpfcError::NoFeasiblePoint);
    };

    let (best, best_cost, accepted_from) = match candidate {
        Some(c) if c.feasible && c.cost <= search_best.cost => (c.params, c.cost, c.kind),
        _ => (search_best.params, search_best.cost, AcceptedFrom::Search),
    };
    debug_assert!(is_feasible(&best, ctx, yhat).is_feasible());

    Ok(OptimizerOutcome {
        best,
        best_cost,
        evaluations: obj.log.len(),
        accepted_from,
        candidate,
        log: obj.log,
    })
}

/// Evaluates every lattice point (in parallel); row order is `c`-major.
pub fn grid_landscape(
    ctx: &FeasibilityContext,
    yhat: &[f64],
    predictor: &Predictor,
    grid: &GridSpec,
    ceiling: f64,
) -> Vec<Evaluation> {
    let cs = grid.c_values();
    let ts = grid.t_values();
    let points: Vec<FunnelParams> = cs
        .iter()
        .flat_map(|&c| ts.iter().map(move |&t| FunnelParams::new(c, t)))
        .collect();
    points
        .par_iter()
        .map(|&p| evaluate_point(ctx, yhat, predictor, p, ceiling))
        .collect()
}

/// Pruning ceiling for a lattice: a multiple of the constructive candidate's cost.
pub fn oracle_ceiling(ctx: &FeasibilityContext, yhat: &[f64], predictor: &Predictor) -> Result<f64> {
    let p = make_candidate(ctx, yhat)?;
    Ok(PRUNE_FACTOR * predictor.cost(yhat, p, ctx.horizon)?.cost)
}

/// Exhaustive lattice search; the validation oracle for [`search`].
pub fn grid_oracle(
    ctx: &FeasibilityContext,
    yhat: &[f64],
    predictor: &Predictor,
    grid: &GridSpec,
) -> Result<OptimizerOutcome> {
    let log = grid_landscape(ctx, yhat, predictor, grid, oracle_ceiling(ctx, yhat, predictor)?);
    let best = log
        .iter()
        .filter(|e| e.evaluated())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .copied()
        .ok_or(MpfcError::NoFeasiblePoint)?;
    Ok(OptimizerOutcome {
        best: best.params,
        best_cost: best.cost,
        evaluations: log.len(),
        accepted_from: AcceptedFrom::Search,
        candidate: None,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemModel;
    use crate::feasibility::OuterFunnel;
    use crate::funnel::GainSpec;
    use crate::integrator::IntegratorConfig;
    use crate::prediction::StageCost;

    fn scalar(r: f64) -> Predictor {
        Predictor::new(
            SystemModel::builtin("scalar-neg-u", 1).unwrap(),
            GainSpec::default(),
            StageCost::diagonal(&[1.0], &[r]).unwrap(),
            IntegratorConfig::default(),
        )
    }

    #[test]
    fn lattice_spacing() {
        let g = GridSpec {
            c_range: (0.1, 10.0),
            c_count: 3,
            t_range: (0.5, 2.0),
            t_count: 4,
        };
        let cs = g.c_values();
        assert!((cs[1] - 1.0).abs() < 1e-12);
        assert_eq!(cs[2], 10.0);
        assert_eq!(g.t_values(), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn equilibrium_state_drives_c_to_lower_bound() {
        let ctx = FeasibilityContext::new(0.0, 2.0, OuterFunnel::Infinite);
        let ocfg = OptimizerConfig::default();
        let out = search(&ctx, &[0.0], None, &scalar(0.1), &ocfg).unwrap();
        assert!(
            (out.best_cost - ocfg.c_bounds.0).abs() <= 1e-6 * ocfg.c_bounds.0 + 1e-12,
            "{}",
            out.best_cost
        );
    }

    #[test]
    fn candidate_wins_ties() {
        let ctx = FeasibilityContext::new(0.5, 2.0, OuterFunnel::Infinite);
        let ocfg = OptimizerConfig::default();
        let warm = WarmStart {
            previous: FunnelParams::new(ocfg.c_bounds.0, 1.0),
            step: 0.25,
        };
        let out = search(&ctx, &[0.0], Some(warm), &scalar(0.1), &ocfg).unwrap();
        assert_eq!(out.accepted_from, AcceptedFrom::ShiftedCandidate);
        assert_eq!(out.best, FunnelParams::new(ocfg.c_bounds.0, 0.75));
    }

    #[test]
    fn expired_warm_start_uses_fresh_candidate() {
        let ctx = FeasibilityContext::new(0.5, 2.0, OuterFunnel::Infinite);
        let warm = WarmStart {
            previous: FunnelParams::new(0.8, 0.2),
            step: 0.25,
        };
        let out = search(&ctx, &[0.0], Some(warm), &scalar(0.1), &OptimizerConfig::default()).unwrap();
        let cand = out.candidate.unwrap();
        assert_eq!(cand.kind, AcceptedFrom::FreshCandidate);
        assert_eq!(cand.params, FunnelParams::new(0.4, 2.0));
        assert!(matches!(
            out.accepted_from,
            AcceptedFrom::FreshCandidate | AcceptedFrom::Search
        ));
        assert!(out.best_cost <= cand.cost);
    }

    #[test]
    fn outcome_never_worse_than_candidate_and_feasible() {
        let pred = scalar(0.1);
        let ctx = FeasibilityContext::new(0.25, 2.0, OuterFunnel::Infinite);
        let y = [0.3];
        let warm = WarmStart {
            previous: FunnelParams::new(1.3, 1.6),
            step: 0.25,
        };
        let out = search(&ctx, &y, Some(warm), &pred, &OptimizerConfig::default()).unwrap();
        let cand = out.candidate.unwrap();
        assert!(cand.feasible);
        assert!(out.best_cost <= cand.cost);
        assert!(is_feasible(&out.best, &ctx, &y).is_feasible());
        assert!(out.best_cost >= out.best.c);
        assert!(out.evaluations <= 200);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pred = scalar(0.1);
        let ctx = FeasibilityContext::new(0.0, 2.0, OuterFunnel::Infinite);
        let ocfg = OptimizerConfig {
            seed: 42,
            ..Default::default()
        };
        let a = search(&ctx, &[0.5], None, &pred, &ocfg).unwrap();
        let b = search(&ctx, &[0.5], None, &pred, &ocfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_grid() {
        let pred = scalar(0.1);
        let ctx = FeasibilityContext::new(0.0, 2.0, OuterFunnel::Infinite);
        let p = make_candidate(&ctx, &[0.5]).unwrap();
        let g = GridSpec {
            c_range: (p.c, p.c),
            c_count: 1,
            t_range: (p.t_final, p.t_final),
            t_count: 1,
        };
        let out = grid_oracle(&ctx, &[0.5], &pred, &g).unwrap();
        let direct = pred.cost(&[0.5], p, 2.0).unwrap().cost;
        assert_eq!(out.best_cost, direct);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn grid_at_equilibrium_picks_smallest_c() {
        let pred = scalar(0.1);
        let ctx = FeasibilityContext::new(0.0, 2.0, OuterFunnel::Infinite);
        let g = GridSpec {
            c_range: (0.01, 1.0),
            c_count: 5,
            t_range: (0.5, 2.0),
            t_count: 4,
        };
        let out = grid_oracle(&ctx, &[0.0], &pred, &g).unwrap();
        assert!((out.best.c - 0.01).abs() < 1e-15);
        assert!((out.best_cost - 0.01).abs() < 1e-15);
    }

    #[test]
    fn infeasible_lattice() {
        let pred = scalar(0.1);
        let ctx = FeasibilityContext::new(0.0, 2.0, OuterFunnel::Infinite);
        let g = GridSpec {
            c_range: (0.01, 0.1),
            c_count: 3,
            t_range: (0.5, 1.0),
            t_count: 3,
        };
        assert_eq!(
            grid_oracle(&ctx, &[0.5], &pred, &g).unwrap_err(),
            MpfcError::NoFeasiblePoint
        );
        assert!(grid_landscape(&ctx, &[0.5], &pred, &g, f64::INFINITY)
            .iter()
            .all(|e| !e.feasible()));
    }
}
