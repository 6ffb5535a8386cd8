//! Outer funnel `psi`, the feasible set `F_H(t, y)`, and the constructive candidates
//! used for initial and recursive feasibility.

use std::fmt;

use crate::error::{MpfcError, Result};
use crate::funnel::FunnelParams;
use crate::linalg::norm;

/// User-prescribed envelope `|y(t)| <= psi(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OuterFunnel {
    #[default]
    Infinite,
    /// `psi(t) = a - b t`, `a > 0`, `b >= 0`; positive only up to `a / b`.
    Affine { a: f64, b: f64 },
    /// `psi(t) = a exp(-b t) + r`, `a > 0`, `b >= 0`, `r >= 0`.
    Exponential { a: f64, b: f64, r: f64 },
}

impl OuterFunnel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OuterFunnel::Infinite => true,
            OuterFunnel::Affine { a, b } => a > 0.0 && b >= 0.0 && a.is_finite() && b.is_finite(),
            OuterFunnel::Exponential { a, b, r } => {
                a > 0.0 && b >= 0.0 && r >= 0.0 && a.is_finite() && b.is_finite() && r.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(MpfcError::InvalidConfig(format!("invalid outer funnel {self:?}")))
        }
    }

    /// Checks `psi > 0` on `[0, until]`.
    pub fn validate_window(&self, until: f64) -> Result<()> {
        self.validate()?;
        if let OuterFunnel::Affine { .. } = self {
            if !(self.value(until) > 0.0) {
                return Err(MpfcError::InvalidConfig(format!(
                    "affine outer funnel is not positive on [0, {until}] (psi({until}) = {})",
                    self.value(until)
                )));
            }
        }
        Ok(())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, OuterFunnel::Infinite)
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            OuterFunnel::Infinite => f64::INFINITY,
            OuterFunnel::Affine { a, b } => a - b * t,
            OuterFunnel::Exponential { a, b, r } => a * (-b * t).exp() + r,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            OuterFunnel::Infinite => 0.0,
            OuterFunnel::Affine { b, .. } => -b,
            OuterFunnel::Exponential { a, b, .. } => -a * b * (-b * t).exp(),
        }
    }
}

/// Supremum of `|psi'|` over `window = [lo, hi]`, in closed form.
pub fn sup_outer_derivative(psi: &OuterFunnel, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(MpfcError::Domain(format!("window [{lo}, {hi}] is not ordered")));
    }
    match *psi {
        OuterFunnel::Infinite => Err(MpfcError::Domain(
            "derivative supremum is undefined for the infinite outer funnel".into(),
        )),
        OuterFunnel::Affine { b, .. } => Ok(b.abs()),
        // |psi'| = a b exp(-b t) is non-increasing, so the left endpoint attains the sup
        OuterFunnel::Exponential { a, b, .. } => Ok(a * b * (-b * lo).exp()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityContext {
    /// Absolute time `t` of the measurement.
    pub time: f64,
    pub horizon: f64,
    pub outer: OuterFunnel,
}

impl FeasibilityContext {
    pub fn new(time: f64, horizon: f64, outer: OuterFunnel) -> Self {
        Self { time, horizon, outer }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// `c <= 0` or `T <= 0` (or not finite).
    Positivity,
    /// `T > H`.
    Horizon,
    /// `|y| >= c T`.
    Entry,
    /// `phi(tau) > psi(t + tau)` for some `tau` in `[0, T)`.
    Containment,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfeasibleReason::Positivity => "positivity",
            InfeasibleReason::Horizon => "horizon",
            InfeasibleReason::Entry => "entry",
            InfeasibleReason::Containment => "containment",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible(InfeasibleReason),
}

impl Feasibility {
    pub fn is_feasible(self) -> bool {
        self == Feasibility::Feasible
    }

    pub fn reason(self) -> Option<InfeasibleReason> {
        match self {
            Feasibility::Feasible => None,
            Feasibility::Infeasible(r) => Some(r),
        }
    }
}

/// Minimum over `tau in [0, T]` of `psi(t + tau) - c (T - tau)`, decided in closed form.
fn containment_margin(p: &FunnelParams, ctx: &FeasibilityContext) -> f64 {
    let (c, t_final, t0) = (p.c, p.t_final, ctx.time);
    let gap = |tau: f64| ctx.outer.value(t0 + tau) - c * (t_final - tau);
    match ctx.outer {
        OuterFunnel::Infinite => f64::INFINITY,
        // the gap is affine in tau
        OuterFunnel::Affine { .. } => gap(0.0).min(gap(t_final)),
        // the gap is convex in tau with at most one critical point, where a b e^{-b(t+tau)} = c
        OuterFunnel::Exponential { a, b, .. } => {
            let mut margin = gap(0.0).min(gap(t_final));
            if b > 0.0 && a * b > c {
                let tau_star = (a * b / c).ln() / b - t0;
                if tau_star > 0.0 && tau_star < t_final {
                    margin = margin.min(gap(tau_star));
                }
            }
            margin
        }
    }
}

/// Membership test for `F_H(t, yhat)`; the entry inequality is strict with no slack.
pub fn is_feasible(p: &FunnelParams, ctx: &FeasibilityContext, yhat: &[f64]) -> Feasibility {
    use InfeasibleReason::*;
    if !(p.c > 0.0 && p.t_final > 0.0 && p.c.is_finite() && p.t_final.is_finite()) {
        return Feasibility::Infeasible(Positivity);
    }
    if p.t_final > ctx.horizon {
        return Feasibility::Infeasible(Horizon);
    }
    if !(norm(yhat) < p.entry_radius()) {
        return Feasibility::Infeasible(Entry);
    }
    if !(containment_margin(p, ctx) >= 0.0) {
        return Feasibility::Infeasible(Containment);
    }
    Feasibility::Feasible
}

/// Constructive feasible pair: `((|y| + 1) / H, H)` for infinite `psi`, otherwise the
/// midpoint-entry funnel whose slope matches the steepest descent of `psi` on the horizon.
pub fn make_candidate(ctx: &FeasibilityContext, yhat: &[f64]) -> Result<FunnelParams> {
    let y_norm = norm(yhat);
    let h = ctx.horizon;
    if ctx.outer.is_infinite() {
        return Ok(FunnelParams::new((y_norm + 1.0) / h, h));
    }
    let psi0 = ctx.outer.value(ctx.time);
    if !(y_norm < psi0) {
        return Err(MpfcError::InfeasibleStart {
            norm: y_norm,
            psi: psi0,
        });
    }
    let sup = sup_outer_derivative(&ctx.outer, (ctx.time, ctx.time + h))?;
    let mid = psi0 + y_norm;
    let t_hat = if sup > 0.0 { (mid / (2.0 * sup)).min(h) } else { h };
    Ok(FunnelParams::new(mid / (2.0 * t_hat), t_hat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shifted {
    Params(FunnelParams),
    /// `T <= h`: the predicted state reached the equilibrium within the step.
    Equilibrium,
}

pub fn shift_candidate(p: &FunnelParams, h: f64) -> Shifted {
    if p.t_final > h {
        Shifted::Params(FunnelParams::new(p.c, p.t_final - h))
    } else {
        Shifted::Equilibrium
    }
}
