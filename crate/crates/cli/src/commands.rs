//! The `simulate`, `oracle` and `audit` commands, independent of argument parsing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mpfc_core::linalg::norm;
use mpfc_core::optimizer::{grid_landscape, oracle_ceiling, Evaluation, GridSpec};
use mpfc_core::{
    audit_bounds, audit_containment, audit_descent, run_mpfc, AuditReport, ClosedLoopRecord, FeasibilityContext,
    NodeRecord, OuterFunnel, StepSummary,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::records::{self, LandscapeRow};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const AUDIT_FILE: &str = "audit.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const LANDSCAPE_FILE: &str = "landscape.csv";

/// Relative tolerance on `J` for golden-file comparison.
pub const GOLDEN_TOLERANCE: f64 = 1e-6;

/// The three record audits, in report order.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSet {
    pub containment: AuditReport,
    pub descent: AuditReport,
    pub bounds: AuditReport,
}

impl AuditSet {
    pub fn run(steps: &[StepSummary], nodes: &[NodeRecord], outer: &OuterFunnel) -> Self {
        Self {
            containment: audit_containment(nodes, outer),
            descent: audit_descent(steps),
            bounds: audit_bounds(steps),
        }
    }

    pub fn passed(&self) -> bool {
        self.containment.passed() && self.descent.passed() && self.bounds.passed()
    }

    /// The content of `audit.txt`.
    pub fn render(&self) -> String {
        format!(
            "{}\n{}\n{}\n{} all audits\n",
            self.containment,
            self.descent,
            self.bounds,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub record: ClosedLoopRecord,
    pub audits: AuditSet,
    /// Recursive feasibility and the acceptance inequality held at every step.
    pub step_checks_passed: bool,
    pub summary: String,
    pub written: Vec<PathBuf>,
}

impl SimulateOutcome {
    pub fn passed(&self) -> bool {
        self.audits.passed() && self.step_checks_passed
    }
}

fn summarize(cfg: &RunConfig, record: &ClosedLoopRecord, audits: &AuditSet) -> (String, bool) {
    let mut s = String::new();
    let y0 = norm(&cfg.mpfc.y0);
    let y_end = norm(record.final_state());
    let _ = writeln!(s, "scenario: {}", cfg.label());
    let _ = writeln!(s, "steps: {}", record.steps.len());
    let _ = writeln!(s, "closed-loop cost: {}", records::fmt_f64(record.closed_loop_cost));
    let _ = writeln!(s, "|y(0)|: {}", records::fmt_f64(y0));
    let _ = writeln!(s, "|y(t_end)|: {}", records::fmt_f64(y_end));
    let _ = writeln!(s, "max stitch jump: {}", records::fmt_f64(record.max_stitch_jump()));
    let _ = writeln!(s, "end: {}", record.end);
    let mut ok = true;
    for st in &record.steps {
        ok &= st.recursively_feasible && st.acceptance_ok;
        let _ = writeln!(
            s,
            "step {}: recursive feasibility {}, acceptance {}{}",
            st.summary.index,
            if st.recursively_feasible { "PASS" } else { "FAIL" },
            if st.acceptance_ok { "PASS" } else { "FAIL" },
            if st.terminal_mode { ", terminal mode" } else { "" }
        );
    }
    let _ = writeln!(s, "audits: {}", if audits.passed() { "PASS" } else { "FAIL" });
    (s, ok)
}

/// Runs the scenario and writes the requested outputs into the configured directory.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutcome, CliError> {
    let dir = cfg.out_dir().to_path_buf();
    create_dir(&dir)?;
    let record = run_mpfc(&cfg.mpfc)?;
    let audits = AuditSet::run(&record.summaries(), &record.nodes, &cfg.outer());
    let (summary, step_checks_passed) = summarize(cfg, &record, &audits);
    let mut written = Vec::new();
    if cfg.formats().csv() {
        let p = dir.join(TRAJECTORY_FILE);
        records::write_trajectory(&p, &record.nodes)?;
        written.push(p);
        let p = dir.join(STEPS_FILE);
        records::write_steps(&p, &record.summaries())?;
        written.push(p);
    }
    if cfg.formats().report() {
        let p = dir.join(AUDIT_FILE);
        write_text(&p, &audits.render())?;
        written.push(p);
        let p = dir.join(SUMMARY_FILE);
        write_text(&p, &summary)?;
        written.push(p);
    }
    Ok(SimulateOutcome {
        record,
        audits,
        step_checks_passed,
        summary,
        written,
    })
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub grid: GridSpec,
    pub rows: Vec<Evaluation>,
    /// Lowest evaluated cost, `None` if no lattice point has a cost.
    pub best: Option<Evaluation>,
    pub all_infeasible: bool,
    /// Set in check mode: human-readable differences against the golden file.
    pub mismatches: Option<Vec<String>>,
    pub written: PathBuf,
}

impl OracleOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.as_ref().is_none_or(|m| m.is_empty())
    }
}

/// Lattice over the first step's decision space: the `[oracle]` box, else the optimizer bounds.
pub fn oracle_grid(cfg: &RunConfig, c_count: usize, t_count: usize) -> GridSpec {
    let o = &cfg.file.oracle;
    let opt = &cfg.mpfc.optimizer;
    let horizon = cfg.mpfc.horizon();
    GridSpec {
        c_range: (o.c_min.unwrap_or(opt.c_bounds.0), o.c_max.unwrap_or(opt.c_bounds.1)),
        c_count,
        t_range: (o.t_min.unwrap_or(opt.t_floor * horizon), o.t_max.unwrap_or(horizon)),
        t_count,
    }
}

/// Parses `CxT`, e.g. `50x50`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Argument(format!("grid must look like 50x50, got `{s}`"));
    let (c, t) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    let t: usize = t.trim().parse().map_err(|_| bad())?;
    if c == 0 || t == 0 {
        return Err(bad());
    }
    Ok((c, t))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Row-by-row comparison; lattice coordinates must agree to printed precision.
pub fn compare_landscape(found: &[LandscapeRow], golden: &[LandscapeRow]) -> Vec<String> {
    let mut out = Vec::new();
    if found.len() != golden.len() {
        out.push(format!(
            "row count {} differs from golden {}",
            found.len(),
            golden.len()
        ));
        return out;
    }
    for (k, (a, b)) in found.iter().zip(golden).enumerate() {
        if !close(a.c, b.c, 1e-15) || !close(a.t_final, b.t_final, 1e-15) {
            out.push(format!(
                "row {}: lattice point ({}, {}) vs golden ({}, {})",
                k + 1,
                a.c,
                a.t_final,
                b.c,
                b.t_final
            ));
        } else if a.feasible != b.feasible {
            out.push(format!(
                "row {}: feasible {} vs golden {}",
                k + 1,
                a.feasible,
                b.feasible
            ));
        } else if !close(a.cost, b.cost, GOLDEN_TOLERANCE) {
            out.push(format!("row {}: J = {} vs golden {}", k + 1, a.cost, b.cost));
        }
    }
    out
}

/// Evaluates the lattice at the first sampling instant and writes `landscape.csv`.
pub fn oracle(cfg: &RunConfig, grid: (usize, usize), check: Option<&Path>) -> Result<OracleOutcome, CliError> {
    let dir = cfg.out_dir().to_path_buf();
    create_dir(&dir)?;
    let spec = oracle_grid(cfg, grid.0, grid.1);
    let ctx = FeasibilityContext::new(0.0, cfg.mpfc.horizon(), cfg.outer());
    let predictor = cfg.mpfc.predictor();
    let y0 = &cfg.mpfc.y0;
    let ceiling = oracle_ceiling(&ctx, y0, &predictor)?;
    let rows = grid_landscape(&ctx, y0, &predictor, &spec, ceiling);
    let all_infeasible = rows.iter().all(|e| !e.feasible());
    if all_infeasible {
        log::warn!("every lattice point is infeasible at the initial state");
    }
    let best = rows
        .iter()
        .filter(|e| e.evaluated())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .copied();
    let written = dir.join(LANDSCAPE_FILE);
    records::write_landscape(&written, &rows)?;
    let mismatches = match check {
        Some(golden) => {
            let golden = records::read_landscape(golden)?;
            let found = records::read_landscape(&written)?;
            Some(compare_landscape(&found, &golden))
        }
        None => None,
    };
    Ok(OracleOutcome {
        grid: spec,
        rows,
        best,
        all_infeasible,
        mismatches,
        written,
    })
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub audits: AuditSet,
    pub written: PathBuf,
}

/// Re-audits emitted files without simulating and writes `audit.txt` into `out_dir`.
pub fn audit_files(
    trajectory: &Path,
    steps: &Path,
    outer: &OuterFunnel,
    out_dir: &Path,
) -> Result<AuditOutcome, CliError> {
    let nodes = records::read_trajectory(trajectory)?;
    let steps = records::read_steps(steps)?;
    let audits = AuditSet::run(&steps, &nodes, outer);
    create_dir(out_dir)?;
    let written = out_dir.join(AUDIT_FILE);
    write_text(&written, &audits.render())?;
    Ok(AuditOutcome { audits, written })
}
