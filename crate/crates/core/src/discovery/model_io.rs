//! Plain-text model files: `[section]` headers with `key = value` lines, and
//! `label | multi-index | coefficient` rows under `[terms]`.

use super::model::{Diagnostics, ModelKind, RegressionSummary, SourceTerm, SparseModel};
use crate::error::{Error, Result};
use crate::features::{Channel, FeatureMap, FeatureTerm};
use crate::geometry::fmt_f64;
use crate::kernels::{GaussianExponent, KernelFamily, KernelSpec};
use crate::regression::Method;
use nalgebra::DVector;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

fn kernel_lines(out: &mut String, section: &str, k: &KernelSpec) {
    let _ = writeln!(out, "[{section}]");
    match k.family {
        KernelFamily::MaternSobolev { m, codim } => {
            let _ =
                writeln!(out, "family = matern\nambient_dim = {}\nm = {}\ncodim = {codim}", k.ambient_dim, fmt_f64(m));
        }
        KernelFamily::Gaussian { sigma2, exponent } => {
            let e = match exponent {
                GaussianExponent::SquaredNorm => "squared_norm",
                GaussianExponent::Norm => "norm",
            };
            let _ = writeln!(
                out,
                "family = gaussian\nambient_dim = {}\nsigma2 = {}\nexponent = {e}",
                k.ambient_dim,
                fmt_f64(sigma2)
            );
        }
    }
    out.push('\n');
}

pub fn format_model(model: &SparseModel) -> String {
    let mut out = String::new();
    let channels: Vec<String> = model.map.components().iter().map(Channel::label).collect();
    let _ = writeln!(out, "[model]");
    let _ = writeln!(out, "kind = {}", model.kind);
    let _ = writeln!(out, "ell = {}", model.ell);
    let _ = writeln!(out, "channels = {}", channels.join(" ; "));
    let _ = writeln!(out, "equation = {}\n", model.equation());

    kernel_lines(&mut out, "kernel", &model.kernel);

    let r = &model.regression;
    let _ = writeln!(out, "[regression]");
    let _ = writeln!(out, "method = {}", r.method);
    let _ = writeln!(out, "mu = {}", fmt_f64(r.mu));
    let _ = writeln!(out, "effective_mu = {}", fmt_f64(r.effective_mu));
    let _ = writeln!(out, "tol = {}", fmt_f64(r.tol));
    let _ = writeln!(out, "rel_tol = {}", fmt_f64(r.rel_tol));
    let _ = writeln!(out, "normalize_columns = {}\n", r.normalize_columns);

    let _ = writeln!(out, "[terms]");
    for (t, c) in model.terms.iter().zip(model.coefficients.iter()) {
        let alpha: Vec<String> = t.multi_index.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{} | {} | {}", t.label, alpha.join(","), fmt_f64(*c));
    }
    out.push('\n');

    if let Some(k) = &model.source_kernel {
        kernel_lines(&mut out, "source_kernel", k);
        let _ = writeln!(out, "[sources]");
        for s in &model.sources {
            let x: Vec<String> = s.coordinates.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{} | {} | {}", s.node, x.join(","), fmt_f64(s.amplitude));
        }
        out.push('\n');
    }

    let d = &model.diagnostics;
    let _ = writeln!(out, "[diagnostics]");
    let _ = writeln!(out, "rows = {}", d.rows);
    let _ = writeln!(out, "kkt_residual = {}", fmt_f64(d.kkt_residual));
    let _ = writeln!(out, "jitter = {}", fmt_f64(d.jitter));
    let _ = writeln!(out, "condition_estimate = {}", fmt_f64(d.condition_estimate));
    let _ = writeln!(out, "interpolation_residual = {}", fmt_f64(d.interpolation_residual));
    let _ = writeln!(out, "iterations = {}", d.iterations);
    let _ = writeln!(out, "runtime_seconds = {}", fmt_f64(d.runtime_seconds));
    if let Some(ratio) = d.source_fit_ratio {
        let _ = writeln!(out, "source_fit_ratio = {}", fmt_f64(ratio));
    }
    for w in &d.warnings {
        let _ = writeln!(out, "warning = {}", w.replace('\n', " "));
    }
    out
}

#[derive(Default)]
struct Section {
    keys: HashMap<String, (usize, String)>,
    rows: Vec<(usize, String)>,
    warnings: Vec<String>,
    line: usize,
}

impl Section {
    fn get(&self, key: &str) -> Result<(usize, &str)> {
        self.keys
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| Error::Parse { line: self.line, message: format!("missing key `{key}`") })
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (line, v) = self.get(key)?;
        v.parse().map_err(|_| Error::Parse { line, message: format!("bad value for `{key}`: {v}") })
    }
}

fn split_sections(text: &str) -> Result<HashMap<String, Section>> {
    let mut sections: HashMap<String, Section> = HashMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if name.contains('|') {
                // a term label, not a header
            } else {
                if sections.contains_key(name) {
                    return Err(Error::Parse { line: line_no, message: format!("duplicate section [{name}]") });
                }
                sections.insert(name.to_string(), Section { line: line_no, ..Default::default() });
                current = Some(name.to_string());
                continue;
            }
        }
        let name = current
            .as_ref()
            .ok_or_else(|| Error::Parse { line: line_no, message: "content before the first section".into() })?;
        let section = sections.get_mut(name).expect("section inserted");
        if name == "terms" || name == "sources" {
            section.rows.push((line_no, line.to_string()));
        } else if let Some((k, v)) = line.split_once('=') {
            let (k, v) = (k.trim(), v.trim());
            if k == "warning" {
                section.warnings.push(v.to_string());
            } else {
                section.keys.insert(k.to_string(), (line_no, v.to_string()));
            }
        } else {
            return Err(Error::Parse { line: line_no, message: format!("expected `key = value`, got `{line}`") });
        }
    }
    Ok(sections)
}

fn section<'a>(sections: &'a HashMap<String, Section>, name: &str) -> Result<&'a Section> {
    sections.get(name).ok_or_else(|| Error::Parse { line: 0, message: format!("missing section [{name}]") })
}

fn parse_kernel(s: &Section) -> Result<KernelSpec> {
    let d: usize = s.parse("ambient_dim")?;
    let (line, family) = s.get("family")?;
    let spec = match family {
        "matern" => KernelSpec::matern(d, s.parse("codim")?, s.parse("m")?),
        "gaussian" => {
            let (eline, e) = s.get("exponent")?;
            let exponent = match e {
                "squared_norm" => GaussianExponent::SquaredNorm,
                "norm" => GaussianExponent::Norm,
                _ => return Err(Error::Parse { line: eline, message: format!("unknown exponent `{e}`") }),
            };
            KernelSpec::gaussian_with(d, s.parse("sigma2")?, exponent)
        }
        _ => return Err(Error::Parse { line, message: format!("unknown kernel family `{family}`") }),
    };
    spec.map_err(|e| Error::Parse { line, message: e.to_string() })
}

fn fields(line: usize, row: &str) -> Result<[&str; 3]> {
    let parts: Vec<&str> = row.rsplitn(3, '|').map(str::trim).collect();
    match parts.as_slice() {
        [c, b, a] => Ok([a, b, c]),
        _ => Err(Error::Parse { line, message: format!("expected `a | b | c`, got `{row}`") }),
    }
}

fn number(line: usize, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Parse { line, message: format!("bad number `{v}`") })
}

pub fn parse_model(text: &str) -> Result<SparseModel> {
    let sections = split_sections(text)?;
    let m = section(&sections, "model")?;
    let (kline, kind) = m.get("kind")?;
    let kind = ModelKind::from_name(kind)
        .ok_or_else(|| Error::Parse { line: kline, message: format!("unknown model kind `{kind}`") })?;
    let ell: u32 = m.parse("ell")?;
    let (cline, chans) = m.get("channels")?;
    let components = chans
        .split(';')
        .map(|l| {
            Channel::from_label(l.trim())
                .ok_or_else(|| Error::Parse { line: cline, message: format!("unknown channel `{}`", l.trim()) })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = FeatureMap::new(components).map_err(|e| Error::Parse { line: cline, message: e.to_string() })?;

    let kernel = parse_kernel(section(&sections, "kernel")?)?;

    let r = section(&sections, "regression")?;
    let (mline, method) = r.get("method")?;
    let method = [Method::LassoCd, Method::Qp, Method::SqrtLasso]
        .into_iter()
        .find(|x| x.name() == method)
        .ok_or_else(|| Error::Parse { line: mline, message: format!("unknown method `{method}`") })?;
    let regression = RegressionSummary {
        method,
        mu: r.parse("mu")?,
        effective_mu: r.parse("effective_mu")?,
        tol: r.parse("tol")?,
        rel_tol: r.parse("rel_tol")?,
        normalize_columns: r.parse("normalize_columns")?,
    };

    let t = section(&sections, "terms")?;
    let mut terms = Vec::with_capacity(t.rows.len());
    let mut coefficients = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        let [label, alpha, coef] = fields(*line, row)?;
        let alpha = alpha
            .split(',')
            .map(|a| a.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse { line: *line, message: format!("bad multi-index `{alpha}`") })?;
        let term = FeatureTerm::new(&map, alpha).map_err(|e| Error::Parse { line: *line, message: e.to_string() })?;
        if term.label != label {
            return Err(Error::Parse {
                line: *line,
                message: format!("label `{label}` does not match its multi-index (`{}`)", term.label),
            });
        }
        terms.push(term);
        coefficients.push(number(*line, coef)?);
    }
    if terms.is_empty() {
        return Err(Error::Parse { line: t.line, message: "no terms".into() });
    }

    let source_kernel = sections.get("source_kernel").map(parse_kernel).transpose()?;
    let mut sources = Vec::new();
    if let Some(s) = sections.get("sources") {
        for (line, row) in &s.rows {
            let [node, coords, amp] = fields(*line, row)?;
            let node = node.parse().map_err(|_| Error::Parse { line: *line, message: format!("bad node `{node}`") })?;
            let coordinates = coords.split(',').map(|v| number(*line, v.trim())).collect::<Result<Vec<_>>>()?;
            sources.push(SourceTerm { node, coordinates, amplitude: number(*line, amp)? });
        }
    }

    let d = section(&sections, "diagnostics")?;
    let diagnostics = Diagnostics {
        rows: d.parse("rows")?,
        kkt_residual: d.parse("kkt_residual")?,
        jitter: d.parse("jitter")?,
        condition_estimate: d.parse("condition_estimate")?,
        interpolation_residual: d.parse("interpolation_residual")?,
        iterations: d.parse("iterations")?,
        runtime_seconds: d.parse("runtime_seconds")?,
        source_fit_ratio: if d.keys.contains_key("source_fit_ratio") {
            Some(d.parse("source_fit_ratio")?)
        } else {
            None
        },
        warnings: d.warnings.clone(),
    };

    Ok(SparseModel {
        kind,
        map,
        ell,
        terms,
        coefficients: DVector::from_vec(coefficients),
        kernel,
        regression,
        diagnostics,
        sources,
        source_kernel,
    })
}

pub fn write_model(path: impl AsRef<Path>, model: &SparseModel) -> Result<()> {
    std::fs::write(path, format_model(model))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SparseModel> {
    parse_model(&std::fs::read_to_string(path)?)
}
