//! Finite-time funnel boundary `phi(t; c, T) = c (T - t)` and the funnel feedback law
//! `u = N(alpha_c(|y/phi|^2)) * y/phi`, with `alpha_c(s) = 2c / (1 - s)`.

use crate::dynamics::SystemModel;
use crate::error::{MpfcError, Result};
use crate::linalg::dot;
use crate::prediction::StageCost;

/// Relative margin below `phi` at which the feedback reports a funnel violation.
pub const FUNNEL_GUARD: f64 = 1e-12;

/// Decision pair `(c, T)`: slope magnitude and terminal time of the funnel boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunnelParams {
    pub c: f64,
    pub t_final: f64,
}

impl FunnelParams {
    pub fn new(c: f64, t_final: f64) -> Self {
        Self { c, t_final }
    }

    /// Initial funnel radius `phi(0) = c T`.
    pub fn entry_radius(&self) -> f64 {
        self.c * self.t_final
    }

    /// Last time integrated before snapping to the equilibrium: `T - delta / c`.
    pub fn t_max(&self, spatial_accuracy: f64) -> f64 {
        self.t_final - spatial_accuracy / self.c
    }
}

/// The surjection `N` composed with `alpha_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Surjection {
    /// `N(s) = s`; known positive control direction.
    #[default]
    Identity,
    /// `N(s) = -s`; known negative control direction.
    Negated,
    /// `N(s) = s cos(s)`; for unknown control direction.
    Exploratory,
}

impl Surjection {
    #[inline]
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Surjection::Identity => s,
            Surjection::Negated => -s,
            Surjection::Exploratory => s * s.cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GainSpec {
    pub surjection: Surjection,
}

impl GainSpec {
    pub fn new(surjection: Surjection) -> Self {
        Self { surjection }
    }
}

pub fn funnel_value(tau: f64, p: &FunnelParams) -> Result<f64> {
    if tau < 0.0 || tau >= p.t_final || p.c <= 0.0 {
        return Err(MpfcError::Domain(format!(
            "funnel boundary undefined at tau = {tau} for (c, T) = ({}, {})",
            p.c, p.t_final
        )));
    }
    Ok(p.c * (p.t_final - tau))
}

pub fn gain_alpha(s: f64, c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(MpfcError::Domain(format!("alpha_c requires 0 <= s < 1, got s = {s}")));
    }
    if c <= 0.0 {
        return Err(MpfcError::Domain(format!("alpha_c requires c > 0, got {c}")));
    }
    Ok(2.0 * c / (1.0 - s))
}

/// Writes the funnel control for `y` at local time `tau` into `u`; zero once `tau >= T`.
pub fn feedback_into(y: &[f64], tau: f64, p: &FunnelParams, g: &GainSpec, u: &mut [f64]) -> Result<()> {
    if tau >= p.t_final {
        u.fill(0.0);
        return Ok(());
    }
    let phi = funnel_value(tau, p)?;
    let norm_sq = dot(y, y);
    let norm = norm_sq.sqrt();
    if norm >= (1.0 - FUNNEL_GUARD) * phi {
        return Err(MpfcError::FunnelViolation { tau, norm, phi });
    }
    let s = norm_sq / (phi * phi);
    let gain = g.surjection.apply(2.0 * p.c / (1.0 - s)) / phi;
    for (ui, yi) in u.iter_mut().zip(y) {
        *ui = gain * yi;
    }
    Ok(())
}

pub fn feedback(y: &[f64], tau: f64, p: &FunnelParams, g: &GainSpec) -> Result<Vec<f64>> {
    let mut u = vec![0.0; y.len()];
    feedback_into(y, tau, p, g, &mut u)?;
    Ok(u)
}

/// Closed-loop right-hand side over the augmented state `[y; J]`, where the last
/// component accumulates the stage cost.
pub fn closed_loop_rhs<'a>(
    model: &'a SystemModel,
    p: FunnelParams,
    g: GainSpec,
    stage: &'a StageCost,
) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> + 'a {
    let m = model.dimension();
    let mut u = vec![0.0; m];
    move |tau, state, deriv| {
        let y = &state[..m];
        feedback_into(y, tau, &p, &g, &mut u)?;
        model.eval_into(y, &u, &mut deriv[..m]);
        deriv[m] = stage.eval(y, &u);
        Ok(())
    }
}
