//! End-to-end runs of the `mpfc` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpfc_cli::load_config;
use mpfc_cli::records::{read_landscape, read_steps, read_trajectory};
use mpfc_core::{is_feasible, FeasibilityContext, FunnelParams};

fn mpfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpfc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn config(name: &str) -> String {
    workspace_file(&format!("configs/{name}.toml")).display().to_string()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demo_paper_writes_twelve_steps_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpfc(&["demo-paper", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));
    let steps = read_steps(&dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.len(), 12);
    let audit = std::fs::read_to_string(dir.path().join("audit.txt")).unwrap();
    assert!(audit.ends_with("PASS all audits\n"), "{audit}");
}

#[test]
fn offline_audit_reproduces_online_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = mpfc(&["simulate", "--config", &config("affine-outer"), "--out", s(&run)]);
    assert!(o.status.success(), "{}", text(&o));
    let online = std::fs::read(run.join("audit.txt")).unwrap();

    let again = dir.path().join("again");
    let o = mpfc(&[
        "audit",
        "--out",
        s(&again),
        "--trajectory",
        s(&run.join("trajectory.csv")),
        "--steps",
        s(&run.join("steps.csv")),
        "--config",
        &config("affine-outer"),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert_eq!(std::fs::read(again.join("audit.txt")).unwrap(), online);
}

#[test]
fn tampered_trajectory_fails_containment() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpfc(&["simulate", "--config", &config("scalar"), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));

    // push the state of the node at row 5 onto the boundary
    let path = dir.path().join("trajectory.csv");
    let src = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = src.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let (phi, norm_y) = (
        header.iter().position(|&c| c == "phi").unwrap(),
        header.iter().position(|&c| c == "norm_y").unwrap(),
    );
    let mut cells: Vec<String> = lines[5].split(',').map(String::from).collect();
    cells[norm_y] = cells[phi].clone();
    let t = cells[0].clone();
    lines[5] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = mpfc(&["audit", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let report = std::fs::read_to_string(dir.path().join("audit.txt")).unwrap();
    assert!(report.contains("FAIL containment"), "{report}");
    let t: f64 = t.parse().unwrap();
    assert!(
        report.contains(&format!("t = {t:.9e}")),
        "report does not name t = {t}:\n{report}"
    );
}

#[test]
fn missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpfc(&["simulate", "--config", &config("scalar"), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));
    let path = dir.path().join("steps.csv");
    let src = std::fs::read_to_string(&path).unwrap();
    let stripped: String = src
        .lines()
        // drop the J_H column
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells.remove(4);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&path, stripped + "\n").unwrap();
    let o = mpfc(&["audit", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("J_H"), "{}", text(&o));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = mpfc(&["demo-paper", "--out", s(&blocker.join("out"))]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(text(&o).starts_with("error:") || text(&o).contains("error:"));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        r#"
[system]
dimension = 1
plant = { builtin = "scalar-neg-u" }
y0 = [0.5]

[mpfc]
step = 0.25
horizon = 0.3
t_end = -1.0

[cost]
q = [[1.0]]
r = [[0.1]]
"#,
    )
    .unwrap();
    let o = mpfc(&["simulate", "--config", s(&path)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = text(&o);
    assert!(msg.contains("horizon") && msg.contains("t_end"), "{msg}");
}

#[test]
fn zero_state_costs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpfc(&["simulate", "--config", &config("zero-state"), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", text(&o));
    let steps = read_steps(&dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.iter().map(|s| s.increment).sum::<f64>(), 0.0);
    let nodes = read_trajectory(&dir.path().join("trajectory.csv")).unwrap();
    assert!(nodes.iter().all(|n| n.norm_y == 0.0 && n.u.iter().all(|&u| u == 0.0)));
}

#[test]
fn oracle_lattice_matches_golden_and_membership() {
    let dir = tempfile::tempdir().unwrap();
    let golden = workspace_file("crates/cli/tests/data/paper-step0-30x30.csv");
    let o = mpfc(&[
        "oracle",
        "--config",
        &config("paper-example"),
        "--grid",
        "30x30",
        "--check",
        s(&golden),
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("PASS golden comparison"));

    let rows = read_landscape(&dir.path().join("landscape.csv")).unwrap();
    assert_eq!(rows.len(), 900);
    let cfg = load_config(Path::new(&config("paper-example"))).unwrap();
    let ctx = FeasibilityContext::new(0.0, cfg.mpfc.horizon(), cfg.outer());
    for r in &rows {
        let member = is_feasible(&FunnelParams::new(r.c, r.t_final), &ctx, &cfg.mpfc.y0).is_feasible();
        assert_eq!(member, r.feasible, "({}, {})", r.c, r.t_final);
        if !r.feasible {
            assert!(r.cost.is_infinite());
        }
    }
}

#[test]
fn oracle_check_reports_drift() {
    let dir = tempfile::tempdir().unwrap();
    let golden = workspace_file("crates/cli/tests/data/paper-step0-30x30.csv");
    let src = std::fs::read_to_string(golden).unwrap();
    // perturb the first finite cost by one percent
    let mut lines: Vec<String> = src.lines().map(String::from).collect();
    let k = lines
        .iter()
        .position(|l| l.ends_with(",true") && !l.contains(",inf,"))
        .unwrap();
    let mut cells: Vec<String> = lines[k].split(',').map(String::from).collect();
    let j: f64 = cells[2].parse().unwrap();
    cells[2] = format!("{:.16e}", j * 1.01);
    lines[k] = cells.join(",");
    let tampered = dir.path().join("golden.csv");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();

    let o = mpfc(&[
        "oracle",
        "--config",
        &config("paper-example"),
        "--grid",
        "30x30",
        "--check",
        s(&tampered),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains(&format!("FAIL row {k}")), "{}", text(&o));
}
