//! TOML run configuration: serde schema, validation into an [`MpfcConfig`], and re-emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mpfc_core::integrator::IntegratorConfig;
use mpfc_core::mpfc::DEFAULT_EQUILIBRIUM_THRESHOLD;
use mpfc_core::optimizer::{Method, OptimizerConfig};
use mpfc_core::{GainSpec, MeasurementNoise, MpfcConfig, OuterFunnel, StageCost, Surjection, SystemModel};

use crate::error::CliError;

/// Relative tolerance for `H = n h` with integer `n`.
const HORIZON_RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// One of the built-in models (`paper-example`, `scalar-neg-u`, `zero`).
    Builtin(String),
    /// Components `f_1; ...; f_m` over `y1..ym`, `u1..um`.
    Expr(String),
}

impl ModelSpec {
    pub fn resolve(&self, label: &str, dimension: usize) -> mpfc_core::Result<SystemModel> {
        match self {
            ModelSpec::Builtin(name) => SystemModel::builtin(name, dimension),
            ModelSpec::Expr(src) => SystemModel::parse(label, src, dimension),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub dimension: usize,
    pub plant: ModelSpec,
    /// Prediction model; the plant when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpfcSection {
    pub step: f64,
    pub horizon: f64,
    pub t_end: f64,
    #[serde(default = "default_threshold")]
    pub equilibrium_threshold: f64,
    #[serde(default = "default_nodes")]
    pub nodes_per_step: usize,
}

fn default_label() -> String {
    "scenario".into()
}

fn default_threshold() -> f64 {
    DEFAULT_EQUILIBRIUM_THRESHOLD
}

fn default_nodes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurjectionName {
    #[default]
    Identity,
    Negated,
    Exploratory,
}

impl From<SurjectionName> for Surjection {
    fn from(s: SurjectionName) -> Self {
        match s {
            SurjectionName::Identity => Surjection::Identity,
            SurjectionName::Negated => Surjection::Negated,
            SurjectionName::Exploratory => Surjection::Exploratory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunnelSection {
    #[serde(default)]
    pub surjection: SurjectionName,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterSection {
    #[default]
    Infinite,
    Affine {
        a: f64,
        b: f64,
    },
    Exponential {
        a: f64,
        b: f64,
        r: f64,
    },
}

impl From<OuterSection> for OuterFunnel {
    fn from(o: OuterSection) -> Self {
        match o {
            OuterSection::Infinite => OuterFunnel::Infinite,
            OuterSection::Affine { a, b } => OuterFunnel::Affine { a, b },
            OuterSection::Exponential { a, b, r } => OuterFunnel::Exponential { a, b, r },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub spatial_accuracy: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub output_spacing: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorConfig::default().into()
    }
}

impl From<IntegratorConfig> for IntegratorSection {
    fn from(c: IntegratorConfig) -> Self {
        Self {
            abs_tol: c.abs_tol,
            rel_tol: c.rel_tol,
            spatial_accuracy: c.spatial_accuracy,
            initial_step: c.initial_step,
            min_step: c.min_step,
            max_steps: c.max_steps,
            output_spacing: c.output_spacing,
        }
    }
}

impl From<IntegratorSection> for IntegratorConfig {
    fn from(s: IntegratorSection) -> Self {
        Self {
            abs_tol: s.abs_tol,
            rel_tol: s.rel_tol,
            spatial_accuracy: s.spatial_accuracy,
            initial_step: s.initial_step,
            min_step: s.min_step,
            max_steps: s.max_steps,
            output_spacing: s.output_spacing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    NelderMead,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub method: MethodName,
    pub max_evaluations: usize,
    pub initial_spread: f64,
    pub tolerance: f64,
    pub grid: [usize; 2],
    pub c_min: f64,
    pub c_max: f64,
    pub t_floor: f64,
    pub seed: u64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            method: MethodName::NelderMead,
            max_evaluations: d.max_evaluations,
            initial_spread: d.initial_spread,
            tolerance: d.tolerance,
            grid: [d.grid.0, d.grid.1],
            c_min: d.c_bounds.0,
            c_max: d.c_bounds.1,
            t_floor: d.t_floor,
            seed: d.seed,
        }
    }
}

impl From<OptimizerSection> for OptimizerConfig {
    fn from(s: OptimizerSection) -> Self {
        Self {
            method: match s.method {
                MethodName::NelderMead => Method::NelderMead,
                MethodName::Grid => Method::Grid,
            },
            max_evaluations: s.max_evaluations,
            initial_spread: s.initial_spread,
            tolerance: s.tolerance,
            grid: (s.grid[0], s.grid[1]),
            c_bounds: (s.c_min, s.c_max),
            t_floor: s.t_floor,
            seed: s.seed,
        }
    }
}

/// Decision-space box for `mpfc oracle`; defaults to the optimizer bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormats {
    Csv,
    Report,
    #[default]
    Both,
}

impl OutputFormats {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormats::Csv | OutputFormats::Both)
    }

    pub fn report(self) -> bool {
        matches!(self, OutputFormats::Report | OutputFormats::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: OutputFormats,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: OutputFormats::Both,
        }
    }
}

/// The on-disk schema. Every optional section is filled with its defaults on load, so
/// emitting a loaded file writes every parameter explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_label")]
    pub label: String,
    pub system: SystemSection,
    pub mpfc: MpfcSection,
    pub cost: CostSection,
    #[serde(default)]
    pub funnel: FunnelSection,
    #[serde(default)]
    pub outer: OuterSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub mpfc: MpfcConfig,
}

impl RunConfig {
    pub fn label(&self) -> &str {
        &self.file.label
    }

    pub fn out_dir(&self) -> &Path {
        &self.file.output.dir
    }

    pub fn formats(&self) -> OutputFormats {
        self.file.output.formats
    }

    pub fn outer(&self) -> OuterFunnel {
        self.mpfc.outer
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.file.optimizer.seed = seed;
        self.mpfc.optimizer.seed = seed;
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        self.file.output.dir = dir;
    }

    /// TOML text that loads back to the same configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("configuration is always serializable")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    validate(file).map_err(|problems| CliError::Validation {
        origin: origin.to_string(),
        problems,
    })
}

/// Builds the run configuration, collecting every violated invariant.
pub fn validate(file: ConfigFile) -> Result<RunConfig, Vec<String>> {
    let mut problems = Vec::new();
    let s = &file.mpfc;
    let mut horizon_steps = None;
    if !(s.step > 0.0 && s.step.is_finite()) {
        problems.push(format!("mpfc.step must be positive, got {}", s.step));
    } else if !(s.horizon > 0.0 && s.horizon.is_finite()) {
        problems.push(format!("mpfc.horizon must be positive, got {}", s.horizon));
    } else {
        let ratio = s.horizon / s.step;
        let n = ratio.round();
        if (ratio - n).abs() > HORIZON_RATIO_TOLERANCE * ratio.max(1.0) {
            problems.push(format!(
                "mpfc.horizon = {} is not an integer multiple of mpfc.step = {} (H / h = {ratio})",
                s.horizon, s.step
            ));
        } else if n < 2.0 {
            problems.push(format!("mpfc.horizon must be at least two steps, got H / h = {n}"));
        } else {
            horizon_steps = Some(n as usize);
        }
    }

    let dim = file.system.dimension;
    if dim == 0 {
        problems.push("system.dimension must be at least 1".into());
    }
    let plant = file
        .system
        .plant
        .resolve(&format!("{}-plant", file.label), dim)
        .map_err(|e| problems.push(format!("system.plant: {e}")))
        .ok();
    let model = match &file.system.model {
        Some(spec) => spec
            .resolve(&format!("{}-model", file.label), dim)
            .map_err(|e| problems.push(format!("system.model: {e}")))
            .ok(),
        None => plant.clone(),
    };
    let stage = StageCost::from_rows(&file.cost.q, &file.cost.r)
        .map_err(|e| problems.push(format!("cost: {e}")))
        .ok();

    let (Some(plant), Some(model), Some(stage), Some(horizon_steps)) = (plant, model, stage, horizon_steps) else {
        // the remaining checks need the resolved parts; report the independent ones
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            problems.push(format!("t_end must be positive, got {}", s.t_end));
        }
        if let Err(e) = OuterFunnel::from(file.outer).validate() {
            problems.push(format!("outer: {e}"));
        }
        if let Err(e) = IntegratorConfig::from(file.integrator).validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = OptimizerConfig::from(file.optimizer).validate() {
            problems.push(e.to_string());
        }
        return Err(problems);
    };

    let mpfc = MpfcConfig {
        step: s.step,
        horizon_steps,
        t_end: s.t_end,
        equilibrium_threshold: s.equilibrium_threshold,
        plant,
        model,
        gains: GainSpec::new(file.funnel.surjection.into()),
        stage,
        outer: file.outer.into(),
        integrator: file.integrator.into(),
        optimizer: file.optimizer.into(),
        y0: file.system.y0.clone(),
        nodes_per_step: s.nodes_per_step,
        noise: file.noise.map(|n| MeasurementNoise {
            amplitude: n.amplitude,
            seed: n.seed,
        }),
    };
    problems.extend(mpfc.violations());
    if file.label.trim().is_empty() {
        problems.push("label must not be empty".into());
    }
    if problems.is_empty() {
        Ok(RunConfig { file, mpfc })
    } else {
        Err(problems)
    }
}
