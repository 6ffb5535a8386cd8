//! Model predictive funnel control: a receding-horizon controller whose decision variables
//! are the slope `c` and terminal time `T` of a linear funnel boundary, applied through a
//! high-gain funnel feedback law.

// `!(x < y)` is deliberate throughout: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod feasibility;
pub mod funnel;
pub mod integrator;
pub mod linalg;
pub mod mpfc;
pub mod optimizer;
pub mod prediction;

pub use dynamics::{check_high_gain, HighGainProbe, HighGainReport, HighGainVerdict, SystemModel};
pub use error::{MpfcError, Result};
pub use expr::{parse_vector_field, ParseError, VectorFieldExpr};
pub use feasibility::{
    is_feasible, make_candidate, shift_candidate, Feasibility, FeasibilityContext, InfeasibleReason, OuterFunnel,
    Shifted,
};
pub use funnel::{feedback, funnel_value, gain_alpha, FunnelParams, GainSpec, Surjection};
pub use integrator::{integrate, simulate_funnel, IntegratorConfig, OdeSolution, Tail, Termination, Trajectory};
pub use mpfc::{
    audit_bounds, audit_containment, audit_descent, run_mpfc, AuditReport, ClosedLoopRecord, MeasurementNoise,
    MpfcConfig, NodeRecord, RunEnd, StepRecord, StepSummary,
};
pub use optimizer::{
    grid_landscape, grid_oracle, search, AcceptedFrom, Evaluation, GridSpec, Method, OptimizerConfig, OptimizerOutcome,
    WarmStart,
};
pub use prediction::{evaluate_cost, stage_cost, PredictionResult, Predictor, StageCost};
