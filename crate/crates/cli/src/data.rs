//! Dataset and table files.
//!
//! A dataset is a single CSV `t,node_index,u,f` paired with a point-cloud
//! file; stationary data has one time level.

use crate::CliError;
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::path::Path;
use surfpde::geometry::fmt_f64;
use surfpde::{PointCloud, Snapshots, SparseModel};

const HEADER: &str = "t,node_index,u,f";
const DT_TOL: f64 = 1e-12;

/// Samples `u(X, t_j)` and forcing `f(X, t_j)`, column `j` per time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
    pub forcing: DMatrix<f64>,
}

impl Dataset {
    pub fn stationary(values: &DVector<f64>, forcing: &DVector<f64>) -> Dataset {
        Dataset {
            times: vec![0.0],
            values: DMatrix::from_column_slice(values.len(), 1, values.as_slice()),
            forcing: DMatrix::from_column_slice(forcing.len(), 1, forcing.as_slice()),
        }
    }

    pub fn from_snapshots(snaps: &Snapshots) -> Dataset {
        Dataset {
            times: (0..=snaps.steps()).map(|j| snaps.time(j)).collect(),
            values: snaps.values().clone(),
            forcing: snaps.forcing().clone(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn column(&self, j: usize) -> (DVector<f64>, DVector<f64>) {
        (self.values.column(j).into_owned(), self.forcing.column(j).into_owned())
    }

    /// The single time level of stationary data.
    pub fn single(&self) -> Result<(DVector<f64>, DVector<f64>), CliError> {
        if self.levels() != 1 {
            return Err(CliError::Usage(format!("expected one time level, dataset has {}", self.levels())));
        }
        Ok(self.column(0))
    }

    /// Uniform step `t_1 - t_0`, checked across all levels.
    pub fn dt(&self) -> Result<f64, CliError> {
        if self.levels() < 2 {
            return Err(CliError::Usage("time-dependent data needs at least two time levels".into()));
        }
        let dt = self.times[1] - self.times[0];
        for (j, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > DT_TOL.max(DT_TOL * dt.abs()) {
                return Err(CliError::Usage(format!("non-uniform time step between levels {j} and {}", j + 1)));
            }
        }
        if !(dt > 0.0) {
            return Err(CliError::Usage(format!("time step must be positive, got {dt}")));
        }
        Ok(dt)
    }

    pub fn snapshots(&self, cloud: PointCloud) -> Result<Snapshots, CliError> {
        let dt = self.dt()?;
        Ok(Snapshots::new(cloud, dt, self.values.clone(), self.forcing.clone())?)
    }
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = format!("{HEADER}\n");
    for (j, &t) in data.times.iter().enumerate() {
        let t = fmt_f64(t);
        for i in 0..data.nodes() {
            let _ = writeln!(out, "{t},{i},{},{}", fmt_f64(data.values[(i, j)]), fmt_f64(data.forcing[(i, j)]));
        }
    }
    out
}

/// Rows must come grouped by time with node indices `0..N` in order.
pub fn parse_dataset(text: &str) -> Result<Dataset, CliError> {
    let parse_err = |line: usize, message: String| CliError::Core(surfpde::Error::Parse { line, message });
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((_, h)) => return Err(parse_err(1, format!("unexpected header '{}', want {HEADER}", h.trim()))),
        None => return Err(parse_err(1, "empty dataset".into())),
    }
    let mut times: Vec<f64> = Vec::new();
    let mut u = Vec::new();
    let mut f = Vec::new();
    let mut n: Option<usize> = None;
    let mut next_node = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(line_no, format!("'{s}': {e}")));
        let t = num(fields[0])?;
        let node: usize =
            fields[1].parse().map_err(|e| parse_err(line_no, format!("node index '{}': {e}", fields[1])))?;
        let (uv, fv) = (num(fields[2])?, num(fields[3])?);
        if !(t.is_finite() && uv.is_finite() && fv.is_finite()) {
            return Err(parse_err(line_no, "non-finite value".into()));
        }
        if node == 0 && !times.is_empty() {
            match n {
                None => n = Some(next_node),
                Some(m) if m != next_node => {
                    return Err(parse_err(line_no, format!("time level ended after {next_node} nodes, expected {m}")));
                }
                Some(_) => {}
            }
            next_node = 0;
        }
        if node != next_node || n.is_some_and(|m| node >= m) {
            return Err(parse_err(line_no, format!("expected node index {next_node}, found {node}")));
        }
        if node == 0 {
            if times.last().is_some_and(|&last| t <= last) {
                return Err(parse_err(line_no, format!("time {t} does not increase")));
            }
            times.push(t);
        } else if t != *times.last().unwrap_or(&f64::NAN) {
            return Err(parse_err(line_no, format!("time {t} changes inside a time level")));
        }
        u.push(uv);
        f.push(fv);
        next_node += 1;
    }
    let n = n.unwrap_or(next_node);
    if n == 0 || next_node != n {
        return Err(parse_err(text.lines().count(), format!("last time level has {next_node} nodes, expected {n}")));
    }
    let levels = times.len();
    Ok(Dataset {
        times,
        values: DMatrix::from_column_slice(n, levels, &u),
        forcing: DMatrix::from_column_slice(n, levels, &f),
    })
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    std::fs::write(path, format_dataset(data)).map_err(|e| io_error(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    parse_dataset(&std::fs::read_to_string(path).map_err(|e| io_error(path, e))?)
}

/// `label,coefficient,selected`, one row per library term.
pub fn format_coefficients(model: &SparseModel) -> String {
    let mut out = String::from("label,coefficient,selected\n");
    for (term, &c) in model.terms.iter().zip(model.coefficients.iter()) {
        let _ = writeln!(out, "\"{}\",{},{}", term.label, fmt_f64(c), c != 0.0);
    }
    out
}

/// `t,relative_l2`.
pub fn format_errors(times: &[f64], errors: &[f64]) -> String {
    let mut out = String::from("t,relative_l2\n");
    for (t, e) in times.iter().zip(errors) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*e));
    }
    out
}

/// `t,node_index,abs_error`.
pub fn format_node_errors(times: &[f64], predicted: &DMatrix<f64>, reference: &DMatrix<f64>) -> String {
    let mut out = String::from("t,node_index,abs_error\n");
    for (j, t) in times.iter().enumerate() {
        let t = fmt_f64(*t);
        for i in 0..predicted.nrows() {
            let _ = writeln!(out, "{t},{i},{}", fmt_f64((predicted[(i, j)] - reference[(i, j)]).abs()));
        }
    }
    out
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
