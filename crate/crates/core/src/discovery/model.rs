use crate::error::{Error, Result};
use crate::features::{enumerate_terms, FeatureMap, FeatureTerm};
use crate::kernels::{GaussianExponent, KernelFamily, KernelSpec};
use crate::regression::Method;
use nalgebra::DVector;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `Lambda xi = f`.
    Stationary,
    /// `du/dt = Lambda xi - f`.
    Evolution,
    /// `Lambda xi - 1 = sum_i eta_i Psi(x - x_i)`.
    Eikonal,
    /// `Lambda xi = u`.
    Biharmonic,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Stationary => "stationary",
            ModelKind::Evolution => "evolution",
            ModelKind::Eikonal => "eikonal",
            ModelKind::Biharmonic => "biharmonic",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelKind> {
        [ModelKind::Stationary, ModelKind::Evolution, ModelKind::Eikonal, ModelKind::Biharmonic]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSummary {
    pub method: Method,
    /// Penalty in the problem's own convention.
    pub mu: f64,
    /// Penalty of the final inner LASSO solve.
    pub effective_mu: f64,
    pub tol: f64,
    pub rel_tol: f64,
    pub normalize_columns: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub rows: usize,
    pub kkt_residual: f64,
    pub jitter: f64,
    pub condition_estimate: f64,
    /// Largest relative interpolation residual over the interpolated samples.
    pub interpolation_residual: f64,
    pub iterations: usize,
    pub runtime_seconds: f64,
    /// Eikonal models: `||Psi eta - r|| / ||r||` of the source fit.
    pub source_fit_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

/// An identified point source of an eikonal model.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTerm {
    pub node: usize,
    pub coordinates: Vec<f64>,
    pub amplitude: f64,
}

/// A learned equation: every library term with its coefficient (zero when
/// pruned), plus how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseModel {
    pub kind: ModelKind,
    pub map: FeatureMap,
    /// Library degree (1 for eikonal libraries).
    pub ell: u32,
    pub terms: Vec<FeatureTerm>,
    pub coefficients: DVector<f64>,
    pub kernel: KernelSpec,
    pub regression: RegressionSummary,
    pub diagnostics: Diagnostics,
    /// Eikonal models only, strongest first.
    pub sources: Vec<SourceTerm>,
    pub source_kernel: Option<KernelSpec>,
}

impl Default for RegressionSummary {
    fn default() -> Self {
        RegressionSummary {
            method: Method::LassoCd,
            mu: 0.0,
            effective_mu: 0.0,
            tol: crate::regression::DEFAULT_TOL,
            rel_tol: crate::regression::DEFAULT_REL_TOL,
            normalize_columns: false,
        }
    }
}

impl SparseModel {
    /// A hand-written model over the degree-`ell` library of `map`; every
    /// term not listed in `coefficients` is zero.
    pub fn with_coefficients(
        kind: ModelKind,
        map: FeatureMap,
        ell: u32,
        kernel: KernelSpec,
        coefficients: &[(&str, f64)],
    ) -> Result<SparseModel> {
        let terms = enumerate_terms(&map, ell);
        let mut xi = DVector::zeros(terms.len());
        for (label, c) in coefficients {
            let j = terms
                .iter()
                .position(|t| t.label == *label)
                .ok_or_else(|| Error::invalid(format!("no term `{label}` in the degree-{ell} library")))?;
            xi[j] = *c;
        }
        Ok(SparseModel {
            kind,
            map,
            ell,
            terms,
            coefficients: xi,
            kernel,
            regression: RegressionSummary::default(),
            diagnostics: Diagnostics::default(),
            sources: Vec::new(),
            source_kernel: None,
        })
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.terms.len()).filter(|&j| self.coefficients[j] != 0.0).collect()
    }

    pub fn support_labels(&self) -> Vec<&str> {
        self.support().into_iter().map(|j| self.terms[j].label.as_str()).collect()
    }

    /// Coefficient of the term with this label (0 if absent or pruned).
    pub fn coefficient(&self, label: &str) -> f64 {
        self.terms.iter().position(|t| t.label == label).map_or(0.0, |j| self.coefficients[j])
    }

    /// Selected terms ordered by decreasing magnitude.
    pub fn ranked_terms(&self) -> Vec<(&FeatureTerm, f64)> {
        let mut out: Vec<(&FeatureTerm, f64)> =
            self.support().into_iter().map(|j| (&self.terms[j], self.coefficients[j])).collect();
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        out
    }

    /// One-line equation with 4-decimal coefficients, largest terms first.
    pub fn equation(&self) -> String {
        self.equation_abbreviated(usize::MAX)
    }

    /// [`SparseModel::equation`] listing at most `max_sources` source terms.
    pub fn equation_abbreviated(&self, max_sources: usize) -> String {
        let mut lhs = String::new();
        for (k, (term, c)) in self.ranked_terms().into_iter().enumerate() {
            let sign = if c < 0.0 { "−" } else { "+" };
            let body =
                if term.label == "1" { format!("{:.4}", c.abs()) } else { format!("{:.4}·{}", c.abs(), term.label) };
            if k == 0 {
                lhs.push_str(&format!("{}{body}", if c < 0.0 { "−" } else { "" }));
            } else {
                lhs.push_str(&format!(" {sign} {body}"));
            }
        }
        if lhs.is_empty() {
            lhs.push('0');
        }
        match self.kind {
            ModelKind::Stationary => format!("{lhs} = f"),
            ModelKind::Evolution => format!("∂u/∂t = {lhs} − f"),
            ModelKind::Biharmonic => format!("{lhs} = u"),
            ModelKind::Eikonal => {
                let (norm, scale) = match self.source_kernel.map(|k| k.family) {
                    Some(KernelFamily::Gaussian { sigma2, exponent: GaussianExponent::Norm }) => ("‖", sigma2),
                    Some(KernelFamily::Gaussian { sigma2, .. }) => ("‖²", sigma2),
                    _ => ("‖²", 1.0),
                };
                let scale = if scale == 1.0 { String::new() } else { format!("/{scale}") };
                let mut rhs = String::new();
                for (k, s) in self.sources.iter().take(max_sources).enumerate() {
                    let body = format!("{:.4}·e^(−‖x−x_{}{norm}{scale})", s.amplitude.abs(), s.node);
                    match (k, s.amplitude < 0.0) {
                        (0, neg) => rhs.push_str(&format!("{}{body}", if neg { "−" } else { "" })),
                        (_, true) => rhs.push_str(&format!(" − {body}")),
                        (_, false) => rhs.push_str(&format!(" + {body}")),
                    }
                }
                if rhs.is_empty() {
                    rhs.push('0');
                }
                if self.sources.len() > max_sources {
                    rhs.push_str(&format!(" ± … ({} more)", self.sources.len() - max_sources));
                }
                format!("{lhs} − 1 = {rhs}")
            }
        }
    }
}
