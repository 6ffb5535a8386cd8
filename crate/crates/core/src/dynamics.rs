//! Plant and prediction-model vector fields `y' = f(y, u)` for square systems,
//! plus a sampled check of the high-gain property.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MpfcError, Result};
use crate::expr::{parse_vector_field, VectorFieldExpr};
use crate::linalg::{dot, norm};

/// Residual allowed in `f(0, 0) = 0` at construction.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-12;

type RhsFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A square control system `y' = f(y, u)` with `y, u` in `R^m` and `f(0, 0) = 0`.
#[derive(Clone)]
pub struct SystemModel {
    label: String,
    dimension: usize,
    rhs: Arc<RhsFn>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    /// Wraps a vector field. Fails unless `f(0, 0)` vanishes to within [`EQUILIBRIUM_TOLERANCE`].
    pub fn new<F>(label: impl Into<String>, dimension: usize, rhs: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let label = label.into();
        if dimension == 0 {
            return Err(MpfcError::InvalidConfig(format!(
                "model `{label}` must have positive dimension"
            )));
        }
        let model = Self {
            label,
            dimension,
            rhs: Arc::new(rhs),
        };
        let zero = vec![0.0; dimension];
        let mut out = vec![0.0; dimension];
        model.eval_into(&zero, &zero, &mut out);
        let residual = norm(&out);
        if !(residual <= EQUILIBRIUM_TOLERANCE) {
            return Err(MpfcError::NotAtEquilibrium {
                label: model.label,
                residual,
            });
        }
        Ok(model)
    }

    pub fn from_expr(label: impl Into<String>, field: VectorFieldExpr) -> Result<Self> {
        let m = field.dimension();
        Self::new(label, m, move |y, u, out| field.eval_into(y, u, out))
    }

    pub fn parse(label: impl Into<String>, source: &str, dimension: usize) -> Result<Self> {
        Self::from_expr(label, parse_vector_field(source, dimension)?)
    }

    /// Built-in catalog: `paper-example` (m = 2), `scalar-neg-u` (`f = -u` in any dimension),
    /// and `zero` (`f = 0`).
    pub fn builtin(label: &str, dimension: usize) -> Result<Self> {
        match label {
            "paper-example" => {
                if dimension != 2 {
                    return Err(MpfcError::DimensionMismatch {
                        expected: 2,
                        found: dimension,
                    });
                }
                Self::new(label, 2, |y, u, out| {
                    out[0] = y[0] * y[0] + y[0] - u[0];
                    out[1] = y[1] * y[1] + y[0] - u[1];
                })
            }
            "scalar-neg-u" => Self::new(label, dimension, |_y, u, out| {
                for (o, ui) in out.iter_mut().zip(u) {
                    *o = -ui;
                }
            }),
            "zero" => Self::new(label, dimension, |_y, _u, out| out.fill(0.0)),
            other => Err(MpfcError::InvalidConfig(format!("unknown builtin model `{other}`"))),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Unchecked evaluation into `out`; used on the integrator hot path.
    #[inline]
    pub fn eval_into(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        (self.rhs)(y, u, out)
    }

    /// Checked evaluation of `f(y, u)`.
    pub fn eval_rhs(&self, y: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        for len in [y.len(), u.len()] {
            if len != self.dimension {
                return Err(MpfcError::DimensionMismatch {
                    expected: self.dimension,
                    found: len,
                });
            }
        }
        let mut out = vec![0.0; self.dimension];
        self.eval_into(y, u, &mut out);
        match out.iter().position(|v| !v.is_finite()) {
            Some(component) => Err(MpfcError::NonFinite { component }),
            None => Ok(out),
        }
    }
}

/// Sampling plan for [`check_high_gain`].
#[derive(Debug, Clone, PartialEq)]
pub struct HighGainProbe {
    /// Per-axis `(lower, upper)` bounds of the compact box `K`.
    pub bounds: Vec<(f64, f64)>,
    pub nu: f64,
    /// Gains `s`, strictly increasing.
    pub gains: Vec<f64>,
    pub direction_samples: usize,
    pub radius_samples: usize,
    /// Grid points per axis of `K`.
    pub state_samples: usize,
    pub chi_min: f64,
    /// Only used for direction sampling when `m >= 3`.
    pub seed: u64,
}

impl HighGainProbe {
    pub fn validate(&self, dimension: usize) -> Result<()> {
        let bad = |msg: &str| Err(MpfcError::InvalidConfig(format!("high-gain probe: {msg}")));
        if self.bounds.len() != dimension {
            return Err(MpfcError::DimensionMismatch {
                expected: dimension,
                found: self.bounds.len(),
            });
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad("nu must lie in (0, 1)");
        }
        if self.bounds.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return bad("box bounds must be ordered");
        }
        if self.direction_samples == 0 || self.radius_samples == 0 || self.state_samples == 0 {
            return bad("sample counts must be at least 1");
        }
        if self.gains.is_empty() || self.gains.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("gain samples must be non-empty and strictly increasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighGainVerdict {
    /// The sampled minimum reached `chi_min`; consistent with the property, not a proof.
    Consistent,
    Falsified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighGainReport {
    /// `(s, sampled chi(s))` pairs in probe order.
    pub chi: Vec<(f64, f64)>,
    pub verdict: HighGainVerdict,
}

impl HighGainReport {
    pub fn is_increasing(&self) -> bool {
        self.chi.windows(2).all(|w| w[0].1 < w[1].1)
    }
}

fn unit_directions(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dirs = Vec::with_capacity(count + 2 * m);
            // coordinate axes first so the sample always spans every direction
            for i in 0..m {
                for sign in [1.0, -1.0] {
                    let mut v = vec![0.0; m];
                    v[i] = sign;
                    dirs.push(v);
                }
            }
            while dirs.len() < count + 2 * m {
                let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&v);
                if n > 1e-3 && n <= 1.0 {
                    dirs.push(v.iter().map(|x| x / n).collect());
                }
            }
            dirs
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Sampled upper bound on `chi(s) = min { <v, f(z, -s v)> : z in K, nu <= |v| <= 1 }`.
pub fn check_high_gain(model: &SystemModel, probe: &HighGainProbe) -> Result<HighGainReport> {
    let m = model.dimension();
    probe.validate(m)?;

    let axes: Vec<Vec<f64>> = probe
        .bounds
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, probe.state_samples))
        .collect();
    let radii = if probe.radius_samples == 1 {
        vec![probe.nu]
    } else {
        linspace(probe.nu, 1.0, probe.radius_samples)
    };
    let directions = unit_directions(m, probe.direction_samples, probe.seed);

    let mut chi = Vec::with_capacity(probe.gains.len());
    let total: usize = axes.iter().map(Vec::len).product();
    let mut z = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut out = vec![0.0; m];
    for &s in &probe.gains {
        let mut best = f64::INFINITY;
        for flat in 0..total {
            let mut rest = flat;
            for (zi, axis) in z.iter_mut().zip(&axes) {
                *zi = axis[rest % axis.len()];
                rest /= axis.len();
            }
            for dir in &directions {
                for &r in &radii {
                    for i in 0..m {
                        v[i] = r * dir[i];
                        u[i] = -s * v[i];
                    }
                    model.eval_into(&z, &u, &mut out);
                    if let Some(component) = out.iter().position(|x| !x.is_finite()) {
                        return Err(MpfcError::NonFinite { component });
                    }
                    best = best.min(dot(&v, &out));
                }
            }
        }
        chi.push((s, best));
    }
    let peak = chi.iter().map(|&(_, c)| c).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if peak >= probe.chi_min {
        HighGainVerdict::Consistent
    } else {
        HighGainVerdict::Falsified
    };
    Ok(HighGainReport { chi, verdict })
}
