//! Aggregation matrices, the two-step disaggregation formula and the
//! residual distribution matrix.
//!
//! A high-frequency estimate is built as `z = z̄ + D (y − C z̄)` where
//! `z̄ = X β` is the preliminary series, `C` aggregates high-frequency
//! periods into low-frequency ones and `D = V Cᵀ Σ⁻¹` spreads the
//! low-frequency residuals so that `C z = y` holds exactly.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::covariance::{aggregate_covariance, ar1_covariance, Ar1Model};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

/// How high-frequency values combine into one low-frequency observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    /// Flow data: low-frequency value is the sum of its sub-periods.
    #[default]
    Sum,
    Average,
    First,
    Last,
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AggregationKind::Sum => "sum",
            AggregationKind::Average => "average",
            AggregationKind::First => "first",
            AggregationKind::Last => "last",
        };
        f.write_str(s)
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(AggregationKind::Sum),
            "average" | "mean" => Ok(AggregationKind::Average),
            "first" => Ok(AggregationKind::First),
            "last" => Ok(AggregationKind::Last),
            other => Err(Error::InvalidInput(format!(
                "unknown aggregation scheme '{other}' (expected sum, average, first or last)"
            ))),
        }
    }
}

/// Aggregation kind together with the ratio `s` and low-frequency length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationScheme {
    pub kind: AggregationKind,
    pub ratio: usize,
    pub n: usize,
}

impl AggregationScheme {
    pub fn new(kind: AggregationKind, ratio: usize, n: usize) -> Result<Self> {
        if ratio == 0 || n == 0 {
            return Err(Error::InvalidInput(format!(
                "aggregation needs ratio > 0 and n > 0, got ratio = {ratio}, n = {n}"
            )));
        }
        Ok(AggregationScheme { kind, ratio, n })
    }

    pub fn sum(ratio: usize, n: usize) -> Result<Self> {
        Self::new(AggregationKind::Sum, ratio, n)
    }

    /// Implied high-frequency length `m = n·s`.
    pub fn m(&self) -> usize {
        self.n * self.ratio
    }

    /// Same kind and ratio, different low-frequency length.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.kind, self.ratio, n)
    }

    /// Value `c` such that aggregating a constant series `c` gives 1, i.e.
    /// the reciprocal of a row sum of `C`.
    pub fn row_weight_sum(&self) -> f64 {
        match self.kind {
            AggregationKind::Sum => self.ratio as f64,
            _ => 1.0,
        }
    }
}

/// Sparse n×m aggregation matrix; each row holds the weights of one
/// low-frequency period.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationMatrix {
    n: usize,
    m: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl AggregationMatrix {
    /// Builds from explicit row weights, checking column bounds.
    pub fn from_rows(m: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for row in &rows {
            if let Some(&(j, _)) = row.iter().find(|(j, _)| *j >= m) {
                return Err(Error::DimensionMismatch(format!(
                    "aggregation weight at column {j} but m = {m}"
                )));
            }
        }
        Ok(AggregationMatrix {
            n: rows.len(),
            m,
            rows,
        })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut c = Array2::zeros((self.n, self.m));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                c[[i, j]] += w;
            }
        }
        c
    }

    /// `C z`.
    pub fn apply(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        if z.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "aggregating a series of length {} with a {}x{} matrix",
                z.len(),
                self.n,
                self.m
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * z[j]).sum())
            .collect())
    }

    /// `C X`.
    pub fn apply_mat(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "aggregating a panel with {} rows with a {}x{} matrix",
                x.nrows(),
                self.n,
                self.m
            )));
        }
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut target = out.row_mut(i);
            for &(j, w) in row {
                target.scaled_add(w, &x.row(j));
            }
        }
        Ok(out)
    }

    /// `A Cᵀ` for an `k×m` matrix `A`.
    pub fn right_apply_transpose(&self, a: ArrayView2<f64>) -> Result<Array2<f64>> {
        if a.ncols() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "right-multiplying a {}x{} matrix by Cᵀ ({}x{})",
                a.nrows(),
                a.ncols(),
                self.m,
                self.n
            )));
        }
        let mut out = Array2::zeros((a.nrows(), self.n));
        for (i, row) in self.rows.iter().enumerate() {
            let mut col = out.column_mut(i);
            for &(j, w) in row {
                col.scaled_add(w, &a.column(j));
            }
        }
        Ok(out)
    }
}

/// Builds `C` for a scheme: `sum` is `I_n ⊗ 1_s`, `average` is
/// `I_n ⊗ 1_s/s`, `first`/`last` select one sub-period per row.
pub fn build_aggregation_matrix(scheme: &AggregationScheme) -> Result<AggregationMatrix> {
    let AggregationScheme { kind, ratio: s, n } = *scheme;
    if s == 0 || n == 0 {
        return Err(Error::InvalidInput(format!(
            "aggregation needs ratio > 0 and n > 0, got ratio = {s}, n = {n}"
        )));
    }
    let rows = (0..n)
        .map(|i| {
            let start = i * s;
            match kind {
                AggregationKind::Sum => (start..start + s).map(|j| (j, 1.0)).collect(),
                AggregationKind::Average => {
                    let w = 1.0 / s as f64;
                    (start..start + s).map(|j| (j, w)).collect()
                }
                AggregationKind::First => vec![(start, 1.0)],
                AggregationKind::Last => vec![(start + s - 1, 1.0)],
            }
        })
        .collect();
    AggregationMatrix::from_rows(n * s, rows)
}

/// Observed low-frequency series.
#[derive(Debug, Clone, PartialEq)]
pub struct LowFreqSeries {
    pub values: Array1<f64>,
    pub label: String,
}

impl LowFreqSeries {
    pub fn new(values: Array1<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "low-frequency series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "low-frequency value at position {i} is not finite"
            )));
        }
        Ok(LowFreqSeries {
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// High-frequency indicator matrix (m rows, one named column per indicator).
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPanel {
    pub values: Array2<f64>,
    pub names: Vec<String>,
}

impl IndicatorPanel {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} indicator names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate indicator name '{name}'")));
            }
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "indicator '{}' has a non-finite value at row {i}",
                names[j]
            )));
        }
        Ok(IndicatorPanel { values, names })
    }

    /// Panel with generated names `x1, x2, …`.
    pub fn unnamed(values: Array2<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Checks that `y`, `X` and the aggregation ratio describe the same span.
///
/// High-frequency rows beyond the last low-frequency observation are
/// rejected: estimates are only produced up to the latest benchmark.
pub fn check_dimensions(y: &LowFreqSeries, x: &IndicatorPanel, scheme: &AggregationScheme) -> Result<()> {
    let n = y.len();
    if scheme.n != n {
        return Err(Error::DimensionMismatch(format!(
            "scheme expects n = {} low-frequency values, series has {n}",
            scheme.n
        )));
    }
    let m = x.nrows();
    let want = scheme.m();
    if m > want {
        return Err(Error::DimensionMismatch(format!(
            "indicator panel has {m} rows but {n} low-frequency values at ratio {} cover only {want}; \
             periods beyond the last low-frequency observation are not supported",
            scheme.ratio
        )));
    }
    if m < want {
        return Err(Error::DimensionMismatch(format!(
            "indicator panel has {m} rows, expected n·s = {want}"
        )));
    }
    Ok(())
}

/// Distribution matrix `D = V Cᵀ Σ⁻¹` (m×n), computed by solving against Σ.
pub fn distribution_matrix(
    v: ArrayView2<f64>,
    c: &AggregationMatrix,
    sigma: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let m = c.ncols();
    let n = c.nrows();
    if v.dim() != (m, m) || sigma.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "distribution matrix: V is {:?}, Σ is {:?}, C is {n}x{m}",
            v.dim(),
            sigma.dim()
        )));
    }
    let chol = Cholesky::new(sigma)?;
    // C V is n×m; Σ Dᵀ = C V since both V and Σ are symmetric.
    let cv = c.apply_mat(v)?;
    let dt = chol.solve_mat(cv.view());
    Ok(dt.reversed_axes())
}

/// Preliminary and final high-frequency series.
#[derive(Debug, Clone, PartialEq)]
pub struct Disaggregation {
    pub zbar: Array1<f64>,
    pub z: Array1<f64>,
}

/// Two-step estimate: `z̄ = Xβ`, `z = z̄ + V Cᵀ Σ⁻¹ (y − C z̄)`.
pub fn disaggregate(
    y: ArrayView1<f64>,
    x: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    model: &Ar1Model,
    scheme: &AggregationScheme,
) -> Result<Disaggregation> {
    let n = y.len();
    if scheme.n != n || x.nrows() != scheme.m() || x.ncols() != beta.len() || model.m != scheme.m() {
        return Err(Error::DimensionMismatch(format!(
            "disaggregate: y has {n} values, X is {}x{}, beta has {}, model m = {}, scheme n·s = {}",
            x.nrows(),
            x.ncols(),
            beta.len(),
            model.m,
            scheme.m()
        )));
    }
    let c = build_aggregation_matrix(scheme)?;
    let pair = ar1_covariance(model)?;
    let sigma = aggregate_covariance(&pair, &c)?;
    let chol = Cholesky::new(sigma.view())?;
    let zbar = x.dot(&beta);
    let resid = &y - &c.apply(zbar.view())?;
    let w = chol.solve(resid.view());
    // V Cᵀ w without forming V Cᵀ.
    let mut ctw = Array1::zeros(scheme.m());
    for (i, row) in c.rows().iter().enumerate() {
        for &(j, wt) in row {
            ctw[j] += wt * w[i];
        }
    }
    let z = &zbar + &pair.v.dot(&ctw);
    Ok(Disaggregation { zbar, z })
}

/// `‖C z − y‖_∞`.
pub fn consistency_gap(c: &AggregationMatrix, z: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let cz = c.apply(z)?;
    Ok(cz
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "chowlin", alias = "chow-lin")]
    ChowLin,
    Sptd,
    #[serde(alias = "sptd_rf")]
    SptdRf,
    Adaptive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::ChowLin => "chowlin",
            Method::Sptd => "sptd",
            Method::SptdRf => "sptd-rf",
            Method::Adaptive => "adaptive",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "chowlin" | "chow-lin" | "cl" => Ok(Method::ChowLin),
            "sptd" => Ok(Method::Sptd),
            "sptd-rf" => Ok(Method::SptdRf),
            "adaptive" => Ok(Method::Adaptive),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected chowlin, sptd, sptd-rf or adaptive)"
            ))),
        }
    }
}

/// One point of a ρ search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoRecord {
    pub rho: f64,
    /// BIC for sparse fits; −2·log-likelihood + log(n)·p for Chow-Lin.
    pub bic: f64,
    pub log_likelihood: f64,
    pub sigma2_hat: f64,
    pub lambda_hat: f64,
    pub k: usize,
    pub beta: Vec<f64>,
}

/// Per-ρ outcomes of a grid search, in grid order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RhoProfile {
    pub records: Vec<RhoRecord>,
}

/// Output of any of the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct DisaggResult {
    pub method: Method,
    pub beta: Array1<f64>,
    pub rho_hat: f64,
    pub sigma2_hat: f64,
    /// Selected breakpoint on the correlation scale, `max_j |x̃ⱼᵀ r|`.
    pub lambda_hat: f64,
    /// The same breakpoint on the penalty scale of `‖ỹ − X̃β‖² + λ‖β‖₁`.
    pub lambda_penalty: f64,
    pub bic: f64,
    pub log_likelihood: f64,
    pub zbar: Array1<f64>,
    pub z: Array1<f64>,
    pub active_set: Vec<usize>,
    pub profile: RhoProfile,
    pub warnings: Vec<String>,
}

pub(crate) fn nonzero_indices(beta: ArrayView1<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}
