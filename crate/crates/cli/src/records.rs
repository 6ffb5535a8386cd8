//! CSV schemas of the emitted records. Floats are written with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::io::{Read, Write};
use std::path::Path;

use mpfc_core::optimizer::{AcceptedFrom, Evaluation};
use mpfc_core::{NodeRecord, StepSummary};

use crate::error::CliError;

pub const STEPS_COLUMNS: [&str; 8] = [
    "i",
    "t_i",
    "c_star",
    "T_star",
    "J_H",
    "stage_increment",
    "opt_evals",
    "accepted_from",
];

pub const LANDSCAPE_COLUMNS: [&str; 4] = ["c", "T", "J", "feasible"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t, y_1..y_m, u_1..u_m, phi, norm_y, step_index`.
pub fn trajectory_columns(m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=m).map(|k| format!("y_{k}")));
    cols.extend((1..=m).map(|k| format!("u_{k}")));
    cols.extend(["phi", "norm_y", "step_index"].map(String::from));
    cols
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::schema(path, e.to_string())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::create(path).map_err(|e| io_error(path, e))
}

fn open(path: &Path) -> Result<std::fs::File, CliError> {
    std::fs::File::open(path).map_err(|e| io_error(path, e))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_trajectory_to<W: Write>(out: W, nodes: &[NodeRecord], path: &Path) -> Result<(), CliError> {
    let m = nodes.first().map_or(0, |n| n.y.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_columns(m)).map_err(|e| csv_error(path, e))?;
    for n in nodes {
        let mut row = vec![fmt_f64(n.t)];
        row.extend(n.y.iter().map(|&v| fmt_f64(v)));
        row.extend(n.u.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(n.phi));
        row.push(fmt_f64(n.norm_y));
        row.push(n.step_index.to_string());
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    finish(w, path)
}

pub fn write_trajectory(path: &Path, nodes: &[NodeRecord]) -> Result<(), CliError> {
    write_trajectory_to(create(path)?, nodes, path)
}

pub fn write_steps_to<W: Write>(out: W, steps: &[StepSummary], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEPS_COLUMNS).map_err(|e| csv_error(path, e))?;
    for s in steps {
        w.write_record([
            s.index.to_string(),
            fmt_f64(s.time),
            fmt_f64(s.c),
            fmt_f64(s.t_final),
            fmt_f64(s.cost),
            fmt_f64(s.increment),
            s.evaluations.to_string(),
            s.accepted_from.as_str().to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w, path)
}

pub fn write_steps(path: &Path, steps: &[StepSummary]) -> Result<(), CliError> {
    write_steps_to(create(path)?, steps, path)
}

pub fn write_landscape_to<W: Write>(out: W, rows: &[Evaluation], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LANDSCAPE_COLUMNS).map_err(|e| csv_error(path, e))?;
    for e in rows {
        w.write_record([
            fmt_f64(e.params.c),
            fmt_f64(e.params.t_final),
            fmt_f64(e.cost),
            e.feasible().to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(w, path)
}

pub fn write_landscape(path: &Path, rows: &[Evaluation]) -> Result<(), CliError> {
    write_landscape_to(create(path)?, rows, path)
}

/// Checks the header against `expected`, naming the first missing column.
fn check_header(path: &Path, found: &csv::StringRecord, expected: &[String]) -> Result<(), CliError> {
    for name in expected {
        if !found.iter().any(|h| h == name) {
            return Err(CliError::schema(path, format!("missing column `{name}`")));
        }
    }
    if found.len() != expected.len() || found.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(CliError::schema(
            path,
            format!("columns must be exactly `{}`", expected.join(",")),
        ));
    }
    Ok(())
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    record: csv::StringRecord,
    header: &'a csv::StringRecord,
}

impl Row<'_> {
    fn field(&self, k: usize) -> &str {
        self.record.get(k).unwrap_or("")
    }

    fn error(&self, k: usize, what: &str) -> CliError {
        CliError::schema(
            self.path,
            format!(
                "line {}: column `{}` holds `{}`, expected {what}",
                self.line,
                self.header.get(k).unwrap_or("?"),
                self.field(k)
            ),
        )
    }

    fn f64(&self, k: usize) -> Result<f64, CliError> {
        self.field(k).trim().parse().map_err(|_| self.error(k, "a number"))
    }

    fn usize(&self, k: usize) -> Result<usize, CliError> {
        self.field(k)
            .trim()
            .parse()
            .map_err(|_| self.error(k, "a non-negative integer"))
    }
}

fn rows<'a, R: Read>(
    reader: &'a mut csv::Reader<R>,
    path: &'a Path,
    header: &'a csv::StringRecord,
) -> impl Iterator<Item = Result<Row<'a>, CliError>> + 'a {
    reader.records().enumerate().map(move |(k, r)| {
        let record = r.map_err(|e| csv_error(path, e))?;
        Ok(Row {
            path,
            line: k + 2,
            record,
            header,
        })
    })
}

pub fn read_trajectory_from<R: Read>(input: R, path: &Path) -> Result<Vec<NodeRecord>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let m = header.iter().filter(|h| h.starts_with("y_")).count();
    check_header(path, &header, &trajectory_columns(m))?;
    let mut nodes = Vec::new();
    for row in rows(&mut reader, path, &header) {
        let row = row?;
        let y = (1..=m).map(|k| row.f64(k)).collect::<Result<Vec<_>, _>>()?;
        let u = (m + 1..=2 * m).map(|k| row.f64(k)).collect::<Result<Vec<_>, _>>()?;
        nodes.push(NodeRecord {
            t: row.f64(0)?,
            y,
            u,
            phi: row.f64(2 * m + 1)?,
            norm_y: row.f64(2 * m + 2)?,
            step_index: row.usize(2 * m + 3)?,
        });
    }
    Ok(nodes)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<NodeRecord>, CliError> {
    read_trajectory_from(open(path)?, path)
}

pub fn read_steps_from<R: Read>(input: R, path: &Path) -> Result<Vec<StepSummary>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &STEPS_COLUMNS.map(String::from))?;
    let mut steps = Vec::new();
    for row in rows(&mut reader, path, &header) {
        let row = row?;
        let accepted_from = AcceptedFrom::parse(row.field(7).trim())
            .ok_or_else(|| row.error(7, "search, shifted-candidate or fresh-candidate"))?;
        steps.push(StepSummary {
            index: row.usize(0)?,
            time: row.f64(1)?,
            c: row.f64(2)?,
            t_final: row.f64(3)?,
            cost: row.f64(4)?,
            increment: row.f64(5)?,
            evaluations: row.usize(6)?,
            accepted_from,
        });
    }
    Ok(steps)
}

pub fn read_steps(path: &Path) -> Result<Vec<StepSummary>, CliError> {
    read_steps_from(open(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeRow {
    pub c: f64,
    pub t_final: f64,
    pub cost: f64,
    pub feasible: bool,
}

impl From<&Evaluation> for LandscapeRow {
    fn from(e: &Evaluation) -> Self {
        Self {
            c: e.params.c,
            t_final: e.params.t_final,
            cost: e.cost,
            feasible: e.feasible(),
        }
    }
}

pub fn read_landscape_from<R: Read>(input: R, path: &Path) -> Result<Vec<LandscapeRow>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    check_header(path, &header, &LANDSCAPE_COLUMNS.map(String::from))?;
    let mut out = Vec::new();
    for row in rows(&mut reader, path, &header) {
        let row = row?;
        let feasible = match row.field(3).trim() {
            "true" => true,
            "false" => false,
            _ => return Err(row.error(3, "true or false")),
        };
        out.push(LandscapeRow {
            c: row.f64(0)?,
            t_final: row.f64(1)?,
            cost: row.f64(2)?,
            feasible,
        });
    }
    Ok(out)
}

pub fn read_landscape(path: &Path) -> Result<Vec<LandscapeRow>, CliError> {
    read_landscape_from(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn float_round_trip_is_exact() {
        for x in [
            0.1,
            1.0 / 3.0,
            5e-324,
            1.7976931348623157e308,
            -2.5e-17,
            0.0,
            f64::INFINITY,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn steps_round_trip() {
        let steps = vec![StepSummary {
            index: 3,
            time: 0.75,
            c: 1.0 / 7.0,
            t_final: 4.2,
            cost: 0.123_456_789_012_345_68,
            increment: 1e-300,
            evaluations: 200,
            accepted_from: AcceptedFrom::ShiftedCandidate,
        }];
        let mut buf = Vec::new();
        write_steps_to(&mut buf, &steps, p()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,t_i,c_star,T_star,J_H,stage_increment,opt_evals,accepted_from\n"));
        assert_eq!(read_steps_from(buf.as_slice(), p()).unwrap(), steps);
    }

    #[test]
    fn trajectory_round_trip() {
        let nodes = vec![NodeRecord {
            t: 0.1,
            y: vec![3.0, -1.0 / 3.0],
            u: vec![0.7, 2e-9],
            phi: 4.5,
            norm_y: 3.0185,
            step_index: 0,
        }];
        let mut buf = Vec::new();
        write_trajectory_to(&mut buf, &nodes, p()).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("t,y_1,y_2,u_1,u_2,phi,norm_y,step_index\n"));
        assert_eq!(read_trajectory_from(buf.as_slice(), p()).unwrap(), nodes);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "t,y_1,u_1,phi,step_index\n0,1,1,2,0\n";
        let err = read_trajectory_from(text.as_bytes(), p()).unwrap_err();
        assert!(err.to_string().contains("missing column `norm_y`"), "{err}");
        let text = "i,t_i,c_star,J_H,stage_increment,opt_evals,accepted_from\n";
        let err = read_steps_from(text.as_bytes(), p()).unwrap_err();
        assert!(err.to_string().contains("`T_star`"), "{err}");
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let text = "c,T,J,feasible\n1,2,3,true\n1,x,3,true\n";
        let err = read_landscape_from(text.as_bytes(), p()).unwrap_err();
        assert!(err.to_string().contains("line 3: column `T`"), "{err}");
    }
}
