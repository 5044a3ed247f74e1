//! Polynomial feature libraries over the channels `z = (u, grad_S u, Delta_S u, ...)`.

use crate::discovery::Snapshots;
use crate::error::{Error, Result};
use crate::operators::{DiscreteOperators, Interpolant};
use nalgebra::{DMatrix, DVector};
use std::fmt;

/// One channel of the feature map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Channel {
    U,
    /// Cartesian component `k` (zero-based) of the surface gradient.
    Grad(usize),
    Laplacian,
    /// Component `k` of `grad_S(Delta_S u)`.
    GradLaplacian(usize),
    Bilaplacian,
    PLaplacian(f64),
}

impl Channel {
    pub fn label(&self) -> String {
        match self {
            Channel::U => "u".into(),
            Channel::Grad(k) => format!("[∇_S u]_{}", k + 1),
            Channel::Laplacian => "Δ_S u".into(),
            Channel::GradLaplacian(k) => format!("[∇_S(Δ_S u)]_{}", k + 1),
            Channel::Bilaplacian => "Δ²_S u".into(),
            Channel::PLaplacian(p) if *p == 2.0 => "Δ_S u".into(),
            Channel::PLaplacian(p) => format!("Δ^{p}_S u"),
        }
    }

    /// Parses a label produced by [`Channel::label`]. `Δ_S u` reads back as
    /// the Laplacian channel.
    pub fn from_label(label: &str) -> Option<Channel> {
        let index = |s: &str| s.parse::<usize>().ok().filter(|&k| k >= 1).map(|k| k - 1);
        match label {
            "u" => Some(Channel::U),
            "Δ_S u" => Some(Channel::Laplacian),
            "Δ²_S u" => Some(Channel::Bilaplacian),
            _ => {
                if let Some(k) = label.strip_prefix("[∇_S u]_") {
                    index(k).map(Channel::Grad)
                } else if let Some(k) = label.strip_prefix("[∇_S(Δ_S u)]_") {
                    index(k).map(Channel::GradLaplacian)
                } else {
                    let p = label.strip_prefix("Δ^")?.strip_suffix("_S u")?;
                    p.parse::<f64>().ok().filter(|p| *p >= 2.0).map(Channel::PLaplacian)
                }
            }
        }
    }

    fn is_fourth_order(&self) -> bool {
        matches!(self, Channel::GradLaplacian(_) | Channel::Bilaplacian)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Ordered, duplicate-free list of channels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    components: Vec<Channel>,
}

impl FeatureMap {
    pub fn new(components: Vec<Channel>) -> Result<FeatureMap> {
        if components.is_empty() {
            return Err(Error::invalid("feature map needs at least one channel"));
        }
        let labels: Vec<String> = components.iter().map(Channel::label).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::invalid(format!("duplicate channel '{l}' in feature map")));
            }
        }
        Ok(FeatureMap { components })
    }

    /// `(u, [grad_S u]_1..d, Delta_S u)`.
    pub fn standard(d: usize) -> FeatureMap {
        let mut c = vec![Channel::U];
        c.extend((0..d).map(Channel::Grad));
        c.push(Channel::Laplacian);
        FeatureMap { components: c }
    }

    /// Standard map followed by `[grad_S(Delta_S u)]_1..d` and `Delta_S^2 u`.
    pub fn extended(d: usize) -> FeatureMap {
        let mut c = FeatureMap::standard(d).components;
        c.extend((0..d).map(Channel::GradLaplacian));
        c.push(Channel::Bilaplacian);
        FeatureMap { components: c }
    }

    /// `(u, Delta^{p_1}_S u, ..., Delta^{p_m}_S u)`.
    pub fn eikonal(p_values: &[f64]) -> Result<FeatureMap> {
        if p_values.is_empty() {
            return Err(Error::invalid("eikonal library needs at least one p"));
        }
        if let Some(p) = p_values.iter().find(|p| !(**p >= 2.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("p-Laplacian needs p >= 2, got {p}")));
        }
        let mut c = vec![Channel::U];
        c.extend(p_values.iter().map(|&p| Channel::PLaplacian(p)));
        FeatureMap::new(c)
    }

    pub fn components(&self) -> &[Channel] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn position(&self, channel: Channel) -> Option<usize> {
        self.components.iter().position(|c| *c == channel)
    }

    pub fn needs_fourth_order(&self) -> bool {
        self.components.iter().any(Channel::is_fourth_order)
    }
}

/// Monomial `z^alpha` over a feature map.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureTerm {
    pub multi_index: Vec<u32>,
    pub label: String,
}

impl FeatureTerm {
    pub fn new(map: &FeatureMap, multi_index: Vec<u32>) -> Result<FeatureTerm> {
        if multi_index.len() != map.dim() {
            return Err(Error::invalid(format!(
                "multi-index has {} entries, feature map has {} channels",
                multi_index.len(),
                map.dim()
            )));
        }
        let label = term_label(map, &multi_index);
        Ok(FeatureTerm { multi_index, label })
    }

    pub fn degree(&self) -> u32 {
        self.multi_index.iter().sum()
    }

    /// The channel index when this term is a single channel to the first power.
    pub fn linear_channel(&self) -> Option<usize> {
        if self.degree() == 1 {
            self.multi_index.iter().position(|&a| a == 1)
        } else {
            None
        }
    }
}

fn superscript(n: u32) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap() as usize]).collect()
}

fn term_label(map: &FeatureMap, alpha: &[u32]) -> String {
    let factors: Vec<String> = map
        .components
        .iter()
        .zip(alpha)
        .filter(|(_, &a)| a > 0)
        .map(|(c, &a)| {
            let l = c.label();
            match a {
                1 => l,
                _ if l.contains(' ') => format!("({l}){}", superscript(a)),
                _ => format!("{l}{}", superscript(a)),
            }
        })
        .collect();
    if factors.is_empty() {
        "1".into()
    } else {
        factors.join("·")
    }
}

/// All multi-indices with `|alpha| <= ell`, by degree and then in descending
/// lexicographic order within a degree (so `u` precedes the gradient terms).
pub fn multi_indices(dim: usize, ell: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for degree in 0..=ell {
        let mut current = vec![0u32; dim];
        push_compositions(&mut out, &mut current, 0, degree);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        push_compositions(out, current, pos + 1, remaining - a);
    }
    current[pos] = 0;
}

pub fn enumerate_terms(map: &FeatureMap, ell: u32) -> Vec<FeatureTerm> {
    multi_indices(map.dim(), ell)
        .into_iter()
        .map(|alpha| FeatureTerm { label: term_label(map, &alpha), multi_index: alpha })
        .collect()
}

/// Degree-one terms, one per channel, without a constant.
pub fn linear_terms(map: &FeatureMap) -> Vec<FeatureTerm> {
    (0..map.dim())
        .map(|c| {
            let mut alpha = vec![0; map.dim()];
            alpha[c] = 1;
            FeatureTerm { label: term_label(map, &alpha), multi_index: alpha }
        })
        .collect()
}

/// Feature matrix `Lambda(X)` with one column per term.
#[derive(Clone, Debug)]
pub struct FeatureLibrary {
    pub map: FeatureMap,
    pub terms: Vec<FeatureTerm>,
    pub matrix: DMatrix<f64>,
}

impl FeatureLibrary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.label.clone()).collect()
    }
}

/// Channel values for each column of `values` (one `N x M` block per channel).
pub fn channel_values(ops: &DiscreteOperators, values: &DMatrix<f64>, map: &FeatureMap) -> Result<Vec<DMatrix<f64>>> {
    if values.nrows() != ops.len() {
        return Err(Error::invalid(format!("expected {} rows of nodal values, got {}", ops.len(), values.nrows())));
    }
    if map.needs_fourth_order() {
        ops.require_fourth_order()?;
    }
    let needs = |f: fn(&Channel) -> bool| map.components.iter().any(f);
    let grads = if needs(|c| matches!(c, Channel::Grad(_) | Channel::PLaplacian(_) | Channel::Laplacian))
        || map.needs_fourth_order()
    {
        Some(ops.gradient_batch(values))
    } else {
        None
    };
    let lap = if needs(|c| matches!(c, Channel::Laplacian)) || map.needs_fourth_order() {
        Some(ops.divergence_batch(grads.as_ref().expect("gradient computed")))
    } else {
        None
    };
    let grad_lap = if needs(|c| c.is_fourth_order()) {
        Some(ops.gradient_batch(lap.as_ref().expect("laplacian computed")))
    } else {
        None
    };
    check_axis(map, ops.dim())?;
    map.components
        .iter()
        .map(|c| {
            Ok(match c {
                Channel::U => values.clone(),
                Channel::Grad(k) => grads.as_ref().expect("gradient computed")[*k].clone(),
                Channel::Laplacian => lap.clone().expect("laplacian computed"),
                Channel::GradLaplacian(k) => grad_lap.as_ref().expect("computed")[*k].clone(),
                Channel::Bilaplacian => ops.divergence_batch(grad_lap.as_ref().expect("computed")),
                Channel::PLaplacian(p) => {
                    ops.p_laplacian_from_gradient(grads.as_ref().expect("gradient computed"), *p)?
                }
            })
        })
        .collect()
}

fn check_axis(map: &FeatureMap, d: usize) -> Result<()> {
    for c in &map.components {
        if let Channel::Grad(k) | Channel::GradLaplacian(k) = c {
            if *k >= d {
                return Err(Error::invalid(format!("channel {c} exceeds ambient dimension {d}")));
            }
        }
    }
    Ok(())
}

/// `N x dim` channel matrix for the interpolated samples.
pub fn evaluate_channels(ops: &DiscreteOperators, interp: &Interpolant<'_>, map: &FeatureMap) -> Result<DMatrix<f64>> {
    let u = DMatrix::from_column_slice(ops.len(), 1, interp.samples().as_slice());
    let blocks = channel_values(ops, &u, map)?;
    let mut out = DMatrix::zeros(ops.len(), map.dim());
    for (c, b) in blocks.iter().enumerate() {
        out.set_column(c, &b.column(0));
    }
    Ok(out)
}

/// `Lambda[i, j] = prod_c channels[i, c]^{alpha_{j, c}}`.
pub fn assemble_library(map: &FeatureMap, channels: &DMatrix<f64>, terms: &[FeatureTerm]) -> Result<FeatureLibrary> {
    if channels.ncols() != map.dim() {
        return Err(Error::invalid(format!(
            "channel matrix has {} columns, feature map has {}",
            channels.ncols(),
            map.dim()
        )));
    }
    for (row, values) in channels.row_iter().enumerate() {
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, channel: map.components[c].label() });
        }
    }
    let n = channels.nrows();
    let mut matrix = DMatrix::from_element(n, terms.len(), 1.0);
    for (j, term) in terms.iter().enumerate() {
        if term.multi_index.len() != map.dim() {
            return Err(Error::invalid(format!("term '{}' does not match the feature map", term.label)));
        }
        for (c, &a) in term.multi_index.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for i in 0..n {
                matrix[(i, j)] *= channels[(i, c)].powi(a as i32);
            }
        }
    }
    Ok(FeatureLibrary { map: map.clone(), terms: terms.to_vec(), matrix })
}

/// Per-snapshot channels under the SBDF2 rule, computed once for all time
/// levels.
///
/// Row block `j` (for `1 <= j <= M - 1`) uses `2 z^j - z^{j-1}` for the
/// value and gradient channels, `Delta_S u^{j+1}` for the Laplacian, the
/// left side `(3u^{j+1} - 4u^j + u^{j-1}) / (2 dt)` and forcing `2f^j - f^{j-1}`.
pub struct Sbdf2Channels<'a> {
    map: FeatureMap,
    snaps: &'a Snapshots,
    grads: Option<Vec<DMatrix<f64>>>,
    lap: Option<DMatrix<f64>>,
}

impl<'a> Sbdf2Channels<'a> {
    pub fn new(ops: &DiscreteOperators, snaps: &'a Snapshots, map: &FeatureMap) -> Result<Self> {
        if snaps.cloud().len() != ops.len() {
            return Err(Error::invalid("snapshots and operators use different clouds"));
        }
        if let Some(c) =
            map.components.iter().find(|c| !matches!(c, Channel::U | Channel::Grad(_) | Channel::Laplacian))
        {
            return Err(Error::invalid(format!("channel {c} is not supported for time-dependent discovery")));
        }
        check_axis(map, ops.dim())?;
        let needs_grad = map.components.iter().any(|c| matches!(c, Channel::Grad(_)));
        let needs_lap = map.position(Channel::Laplacian).is_some();
        let grads = (needs_grad || needs_lap).then(|| ops.gradient_batch(snaps.values()));
        let lap = if needs_lap { Some(ops.divergence_batch(grads.as_ref().expect("gradient computed"))) } else { None };
        Ok(Sbdf2Channels { map: map.clone(), snaps, grads, lap })
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    /// `(channels, lhs, forcing)` for row block `j`.
    pub fn rows(&self, j: usize) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        let m = self.snaps.steps();
        if j == 0 || j + 1 > m {
            return Err(Error::invalid(format!("SBDF2 index j = {j} outside 1..={}", m.saturating_sub(1))));
        }
        let n = self.snaps.cloud().len();
        let extrapolate = |block: &DMatrix<f64>| 2.0 * block.column(j) - block.column(j - 1);
        let mut channels = DMatrix::zeros(n, self.map.dim());
        for (c, ch) in self.map.components.iter().enumerate() {
            let col = match ch {
                Channel::U => extrapolate(self.snaps.values()),
                Channel::Grad(k) => extrapolate(&self.grads.as_ref().expect("gradient computed")[*k]),
                Channel::Laplacian => self.lap.as_ref().expect("laplacian computed").column(j + 1).into_owned(),
                _ => unreachable!("checked in new"),
            };
            channels.set_column(c, &col);
        }
        let u = self.snaps.values();
        let lhs = (3.0 * u.column(j + 1) - 4.0 * u.column(j) + u.column(j - 1)) / (2.0 * self.snaps.dt());
        let forcing = extrapolate(self.snaps.forcing());
        Ok((channels, lhs, forcing))
    }
}

/// SBDF2 rows for a single index `j` with the standard feature map.
pub fn sbdf2_channels(
    ops: &DiscreteOperators,
    snaps: &Snapshots,
    j: usize,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    Sbdf2Channels::new(ops, snaps, &FeatureMap::standard(ops.dim()))?.rows(j)
}

/// Degree-one library `[u, Delta^{p_1}_S u, ...]` without constant term.
pub fn eikonal_library(ops: &DiscreteOperators, interp: &Interpolant<'_>, p_values: &[f64]) -> Result<FeatureLibrary> {
    let map = FeatureMap::eikonal(p_values)?;
    let channels = evaluate_channels(ops, interp, &map)?;
    assemble_library(&map, &channels, &linear_terms(&map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle_nodes, sphere_nodes};
    use crate::kernels::KernelSpec;
    use crate::operators::{build_operators, interpolate, laplace_beltrami_nodal};

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    /// Brute force: every vector in [0, ell]^dim with sum <= ell.
    fn brute_count(dim: usize, ell: u32) -> usize {
        let mut count = 0;
        let total = (ell as usize + 1).pow(dim as u32);
        for code in 0..total {
            let mut c = code;
            let mut s = 0;
            for _ in 0..dim {
                s += c % (ell as usize + 1);
                c /= ell as usize + 1;
            }
            if s <= ell as usize {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn term_counts() {
        assert_eq!(enumerate_terms(&FeatureMap::standard(3), 2).len(), 21);
        assert_eq!(enumerate_terms(&FeatureMap::standard(2), 2).len(), 15);
        assert_eq!(enumerate_terms(&FeatureMap::extended(3), 2).len(), 55);
        for dim in 1..=8 {
            for ell in 1..=4 {
                let n = multi_indices(dim, ell).len();
                assert_eq!(n, brute_count(dim, ell));
                assert_eq!(n as u64, binomial(dim as u64 + ell as u64, ell as u64));
            }
        }
    }

    #[test]
    fn single_channel_powers() {
        let map = FeatureMap::new(vec![Channel::U]).unwrap();
        let labels: Vec<String> = enumerate_terms(&map, 3).into_iter().map(|t| t.label).collect();
        assert_eq!(labels, ["1", "u", "u²", "u³"]);
    }

    #[test]
    fn ordering_and_labels() {
        let terms = enumerate_terms(&FeatureMap::standard(3), 2);
        let labels: Vec<&str> = terms.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(&labels[..6], ["1", "u", "[∇_S u]_1", "[∇_S u]_2", "[∇_S u]_3", "Δ_S u"]);
        assert_eq!(labels[6], "u²");
        assert!(labels.contains(&"u·Δ_S u"));
        assert!(labels.contains(&"(Δ_S u)²"));
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), labels.len());
        for w in terms.windows(2) {
            assert!(w[0].degree() <= w[1].degree());
        }
    }

    #[test]
    fn channel_labels_round_trip() {
        let all = [
            Channel::U,
            Channel::Grad(2),
            Channel::Laplacian,
            Channel::GradLaplacian(0),
            Channel::Bilaplacian,
            Channel::PLaplacian(1000.0),
            Channel::PLaplacian(2.5),
        ];
        for c in all {
            assert_eq!(Channel::from_label(&c.label()), Some(c), "{c}");
        }
        assert_eq!(Channel::from_label("[∇_S u]_0"), None);
        assert!(FeatureMap::new(vec![Channel::Laplacian, Channel::PLaplacian(2.0)]).is_err());
    }

    #[test]
    fn library_columns_are_products() {
        let map = FeatureMap::standard(2);
        let channels = DMatrix::from_fn(30, 4, |i, c| (i as f64 + 1.0) * 0.1 + c as f64);
        let terms = enumerate_terms(&map, 2);
        let lib = assemble_library(&map, &channels, &terms).unwrap();
        assert_eq!(lib.matrix.shape(), (30, 15));
        assert!(lib.matrix.column(0).iter().all(|&v| v == 1.0));
        for (j, t) in terms.iter().enumerate() {
            if let Some(c) = t.linear_channel() {
                assert_eq!(lib.matrix.column(j), channels.column(c));
            }
        }
        let j = terms.iter().position(|t| t.label == "u·Δ_S u").unwrap();
        for i in 0..30 {
            assert_eq!(lib.matrix[(i, j)], channels[(i, 0)] * channels[(i, 3)]);
        }
        let mut bad = channels.clone();
        bad[(4, 3)] = f64::INFINITY;
        match assemble_library(&map, &bad, &terms) {
            Err(Error::NonFiniteFeature { row, channel }) => {
                assert_eq!(row, 4);
                assert_eq!(channel, "Δ_S u");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn channels_on_sphere() {
        let cloud = sphere_nodes(300).unwrap();
        let ops = build_operators(&cloud, &KernelSpec::matern(3, 1, 4.0).unwrap()).unwrap();
        let z = DVector::from_iterator(300, cloud.nodes().map(|x| x[2]));
        let interp = interpolate(&ops, &z).unwrap();
        let map = FeatureMap::standard(3);
        let ch = evaluate_channels(&ops, &interp, &map).unwrap();
        assert_eq!(ch.ncols(), map.dim());
        assert_eq!(ch.column(4).into_owned(), laplace_beltrami_nodal(&ops, &z).unwrap());
        let err = (ch.column(4) + 2.0 * &z).norm() / (2.0 * z.norm());
        assert!(err < 2e-3, "{err}");
        let zero = interpolate(&ops, &DVector::zeros(300)).unwrap();
        let ext = evaluate_channels(&ops, &zero, &FeatureMap::extended(3)).unwrap();
        assert!(ext.iter().all(|&v| v == 0.0));
    }

    fn circle_ops(n: usize) -> crate::operators::DiscreteOperators {
        build_operators(&circle_nodes(n).unwrap(), &KernelSpec::matern(2, 1, 6.0).unwrap()).unwrap()
    }

    #[test]
    fn sbdf2_left_side_exact_on_quadratics() {
        let ops = circle_ops(20);
        let cloud = ops.cloud().clone();
        let dt = 0.05;
        let u = |x: &[f64], t: f64| x[0] + 0.3 * t * x[1] - 2.0 * t * t;
        let snaps = Snapshots::sample(cloud.clone(), dt, 4, u, |_, _| 0.0).unwrap();
        for j in 1..4 {
            let (_, lhs, _) = sbdf2_channels(&ops, &snaps, j).unwrap();
            // SBDF2 differentiates at t_{j+1}
            let t = (j + 1) as f64 * dt;
            for (i, x) in cloud.nodes().enumerate() {
                assert!((lhs[i] - (0.3 * x[1] - 4.0 * t)).abs() < 1e-12);
            }
        }
        assert!(sbdf2_channels(&ops, &snaps, 0).is_err());
        assert!(sbdf2_channels(&ops, &snaps, 4).is_err());
    }

    #[test]
    fn sbdf2_constant_snapshots() {
        let ops = circle_ops(16);
        let snaps = Snapshots::sample(ops.cloud().clone(), 0.1, 3, |x, _| x[0] * x[1], |x, t| t * x[0]).unwrap();
        let (ch, lhs, forcing) = sbdf2_channels(&ops, &snaps, 1).unwrap();
        assert!(lhs.amax() < 1e-12);
        for (i, x) in ops.cloud().nodes().enumerate() {
            assert!((ch[(i, 0)] - x[0] * x[1]).abs() < 1e-12);
            assert!((forcing[i] - (2.0 * 0.1 - 0.0) * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn sbdf2_time_derivative_of_decaying_exponential() {
        let cloud = sphere_nodes(100).unwrap();
        let ops = build_operators(&cloud, &KernelSpec::matern(3, 1, 4.0).unwrap()).unwrap();
        let u = |x: &[f64], t: f64| (x[0] + x[1] + x[2]).exp() * (-t).exp();
        let snaps = Snapshots::sample(cloud.clone(), 0.01, 3, u, |_, _| 0.0).unwrap();
        let (_, lhs, _) = sbdf2_channels(&ops, &snaps, 1).unwrap();
        let dev = cloud.nodes().enumerate().map(|(i, x)| (lhs[i] + u(x, 0.02)).abs()).fold(0.0, f64::max);
        assert!(dev < 5e-4, "{dev}");
    }

    #[test]
    fn eikonal_library_shapes() {
        let ops = circle_ops(40);
        let u = DVector::from_iterator(40, ops.cloud().nodes().map(|x| 1.0 - x[1]));
        let interp = interpolate(&ops, &u).unwrap();
        let lib = eikonal_library(&ops, &interp, &[2.0]).unwrap();
        assert_eq!(lib.labels(), ["u", "Δ_S u"]);
        assert_eq!(lib.matrix.column(1).into_owned(), laplace_beltrami_nodal(&ops, &u).unwrap());
        let mut ps = vec![2.0, 5.0, 50.0];
        ps.extend((1..=10).map(|k| 100.0 * k as f64));
        let zero = interpolate(&ops, &DVector::zeros(40)).unwrap();
        let lib = eikonal_library(&ops, &zero, &ps).unwrap();
        assert_eq!(lib.len(), 14);
        assert!(lib.matrix.iter().all(|&v| v == 0.0));
        assert!(eikonal_library(&ops, &zero, &[]).is_err());
        assert!(eikonal_library(&ops, &zero, &[1.0]).is_err());
    }
}
