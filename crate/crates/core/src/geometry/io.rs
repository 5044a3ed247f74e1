//! Point-cloud CSV: header `x,y[,z][,nx,ny[,nz]]`, one node per row.

use super::PointCloud;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Shortest decimal that reads back to the same double; never fewer than
/// 17 significant digits of information.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_point_cloud(cloud: &PointCloud) -> String {
    let d = cloud.dim();
    let mut header: Vec<String> = AXES[..d].iter().map(|s| s.to_string()).collect();
    if cloud.has_normals() {
        header.extend(AXES[..d].iter().map(|s| format!("n{s}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..cloud.len() {
        let mut fields: Vec<String> = cloud.node(i).iter().map(|&v| fmt_f64(v)).collect();
        if let Some(n) = cloud.normal(i) {
            fields.extend(n.iter().map(|&v| fmt_f64(v)));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (dim, with_normals) = match cols.as_slice() {
        ["x", "y"] => (2, false),
        ["x", "y", "z"] => (3, false),
        ["x", "y", "nx", "ny"] => (2, true),
        ["x", "y", "z", "nx", "ny", "nz"] => (3, true),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header '{header}', want x,y[,z][,nx,ny[,nz]]"),
            })
        }
    };
    let width = if with_normals { 2 * dim } else { dim };
    let mut coords = Vec::new();
    let mut normals = Vec::new();
    for (idx, line) in lines {
        let values = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        if values.len() != width {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {width} fields, found {}", values.len()),
            });
        }
        coords.extend_from_slice(&values[..dim]);
        normals.extend_from_slice(&values[dim..]);
    }
    let cloud = PointCloud::new(dim, coords)?;
    if with_normals {
        cloud.with_normals(normals)
    } else {
        Ok(cloud)
    }
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, format_point_cloud(cloud))?;
    Ok(())
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    parse_point_cloud(&std::fs::read_to_string(path)?)
}
