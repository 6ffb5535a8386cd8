//! Horizon cost `J_H(y, c, T) = int_0^H l(y, u) dtau + c` of the funnel-controlled prediction.

use nalgebra::DMatrix;

use crate::dynamics::SystemModel;
use crate::error::{MpfcError, Result};
use crate::funnel::{FunnelParams, GainSpec};
use crate::integrator::{
    output_grid, simulate_funnel_bounded, IntegratorConfig, StepStats, Tail, Termination, Trajectory,
};

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-12;

/// Quadratic stage cost `l(y, u) = <y, Q y> + <u, R u>` with symmetric PSD `Q`, `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn check_psd(name: &str, m: &DMatrix<f64>, dimension: usize) -> Result<()> {
    if m.nrows() != dimension || m.ncols() != dimension {
        return Err(MpfcError::InvalidConfig(format!(
            "{name} must be {dimension}x{dimension}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if (m - m.transpose()).amax() > SYMMETRY_TOLERANCE {
        return Err(MpfcError::InvalidConfig(format!("{name} is not symmetric")));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < -PSD_TOLERANCE {
        return Err(MpfcError::InvalidConfig(format!(
            "{name} is not positive semi-definite (smallest eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

impl StageCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let m = q.nrows();
        check_psd("Q", &q, m)?;
        check_psd("R", &r, m)?;
        Ok(Self { q, r })
    }

    pub fn from_rows(q: &[Vec<f64>], r: &[Vec<f64>]) -> Result<Self> {
        let to_matrix = |name: &str, rows: &[Vec<f64>]| -> Result<DMatrix<f64>> {
            let n = rows.len();
            if rows.iter().any(|row| row.len() != n) {
                return Err(MpfcError::InvalidConfig(format!("{name} must be square")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        };
        Self::new(to_matrix("Q", q)?, to_matrix("R", r)?)
    }

    pub fn diagonal(q: &[f64], r: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&q.to_vec().into()),
            DMatrix::from_diagonal(&r.to_vec().into()),
        )
    }

    pub fn dimension(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Needed for the convergence guarantee; PSD suffices for everything else.
    pub fn q_is_positive_definite(&self) -> bool {
        self.q.clone().symmetric_eigenvalues().min() > PSD_TOLERANCE
    }

    #[inline]
    pub fn eval(&self, y: &[f64], u: &[f64]) -> f64 {
        quadratic_form(&self.q, y) + quadratic_form(&self.r, u)
    }
}

#[inline]
fn quadratic_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += m[(i, j)] * x[i];
        }
        acc += col * x[j];
    }
    acc
}

pub fn stage_cost(y: &[f64], u: &[f64], sc: &StageCost) -> Result<f64> {
    for len in [y.len(), u.len()] {
        if len != sc.dimension() {
            return Err(MpfcError::DimensionMismatch {
                expected: sc.dimension(),
                found: len,
            });
        }
    }
    Ok(sc.eval(y, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// `J = integral + c`.
    pub cost: f64,
    pub integral: f64,
    pub trajectory: Trajectory,
    /// `min(T, H)`.
    pub effective_t: f64,
    pub equilibrium_reached: bool,
}

/// Everything needed to evaluate `J_H` besides the measured state and the decision pair.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub model: SystemModel,
    pub gains: GainSpec,
    pub stage: StageCost,
    pub integrator: IntegratorConfig,
}

impl Predictor {
    pub fn new(model: SystemModel, gains: GainSpec, stage: StageCost, integrator: IntegratorConfig) -> Self {
        Self {
            model,
            gains,
            stage,
            integrator,
        }
    }

    pub fn cost(&self, yhat: &[f64], p: FunnelParams, horizon: f64) -> Result<PredictionResult> {
        evaluate_cost(yhat, p, &self.model, self.gains, &self.stage, horizon, &self.integrator)
    }

    /// `Ok(None)` when `J` provably exceeds `ceiling`.
    pub fn cost_below(
        &self,
        yhat: &[f64],
        p: FunnelParams,
        horizon: f64,
        ceiling: f64,
    ) -> Result<Option<PredictionResult>> {
        match evaluate_cost_bounded(
            yhat,
            p,
            &self.model,
            self.gains,
            &self.stage,
            horizon,
            &self.integrator,
            Some(ceiling),
        ) {
            Ok(r) => Ok(Some(r)),
            Err(MpfcError::BoundExceeded { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Evaluates the horizon cost. For `T <= 0` the cost is `c` by convention. Otherwise the
/// funnel phase runs on `[0, min(t_max, H)]`; the zero-input tail after the snap costs nothing
/// and is not integrated.
pub fn evaluate_cost(
    yhat: &[f64],
    p: FunnelParams,
    model: &SystemModel,
    g: GainSpec,
    sc: &StageCost,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<PredictionResult> {
    evaluate_cost_bounded(yhat, p, model, g, sc, horizon, cfg, None)
}

/// [`evaluate_cost`] that stops with [`MpfcError::BoundExceeded`] once the running cost
/// shows `J > ceiling`; the stage cost is non-negative, so the verdict is final.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cost_bounded(
    yhat: &[f64],
    p: FunnelParams,
    model: &SystemModel,
    g: GainSpec,
    sc: &StageCost,
    horizon: f64,
    cfg: &IntegratorConfig,
    ceiling: Option<f64>,
) -> Result<PredictionResult> {
    let m = model.dimension();
    if p.t_final <= 0.0 {
        return Ok(PredictionResult {
            cost: p.c,
            integral: 0.0,
            trajectory: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                controls: Vec::new(),
                cost: Vec::new(),
                termination: Termination::Equilibrium,
                snapped_at: None,
                snap_residual: 0.0,
                final_state: vec![0.0; m],
                final_cost: 0.0,
                stats: StepStats::default(),
            },
            effective_t: p.t_final,
            equilibrium_reached: true,
        });
    }
    let effective_t = p.t_final.min(horizon);
    let nodes = output_grid(p.t_max(cfg.spatial_accuracy).min(horizon), cfg.output_spacing);
    let bound = ceiling.map(|j| j - p.c);
    let trajectory = simulate_funnel_bounded(model, p, g, sc, yhat, effective_t, &nodes, Tail::Skip, cfg, bound)?;
    let integral = trajectory.final_cost;
    let equilibrium_reached = trajectory.termination != Termination::ReachedEnd;
    Ok(PredictionResult {
        cost: integral + p.c,
        integral,
        trajectory,
        effective_t,
        equilibrium_reached,
    })
}
