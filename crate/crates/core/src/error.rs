use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = MpfcError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpfcError {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("model `{label}` is not at equilibrium: |f(0,0)| = {residual:e}")]
    NotAtEquilibrium { label: String, residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in component {component} of the vector field")]
    NonFinite { component: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("funnel violated at tau = {tau}: |y| = {norm:e} >= phi = {phi:e}")]
    FunnelViolation { tau: f64, norm: f64, phi: f64 },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("maximum number of integration steps ({0}) exceeded")]
    MaxStepsExceeded(usize),

    #[error("state bound exceeded at t = {t}: {value:e} > {bound:e}")]
    BoundExceeded { t: f64, value: f64, bound: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("infeasible start: |y| = {norm} is not below psi = {psi}")]
    InfeasibleStart { norm: f64, psi: f64 },

    #[error("no feasible parameter pair found")]
    NoFeasiblePoint,

    #[error("MPFC step {step} at t = {time} failed: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        source: Box<MpfcError>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
