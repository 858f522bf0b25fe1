//! Generalized least squares on whitened data.
//!
//! The aggregated regression `y = C X β + C u` is rotated by `Σ^{-1/2}`
//! (here `L⁻¹` from a Cholesky factor of `Σ = C S Cᵀ`, with unit innovation
//! variance) into an ordinary least-squares problem `ỹ ≈ X̃ β`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::covariance::{aggregated_ar1_covariance, Ar1Model, Whitener};
use crate::disagg::{build_aggregation_matrix, AggregationScheme};
use crate::error::{Error, Result};
use crate::linalg::ordered_least_squares;

/// Rotated regression problem for one value of ρ.
#[derive(Debug, Clone)]
pub struct WhitenedProblem {
    pub y_tilde: Array1<f64>,
    pub x_tilde: Array2<f64>,
    /// `log |S|` where `Σ = σ² S`.
    pub log_det_s: f64,
    pub rho: f64,
}

impl WhitenedProblem {
    /// Aggregates and rotates `(y, X)` under AR(1) errors with coefficient
    /// `rho` and unit innovation variance.
    pub fn new(
        y: ArrayView1<f64>,
        x: ArrayView2<f64>,
        rho: f64,
        scheme: &AggregationScheme,
    ) -> Result<Self> {
        if y.len() != scheme.n || x.nrows() != scheme.m() {
            return Err(Error::DimensionMismatch(format!(
                "whitening: y has {} values and X has {} rows, scheme expects {} and {}",
                y.len(),
                x.nrows(),
                scheme.n,
                scheme.m()
            )));
        }
        let c = build_aggregation_matrix(scheme)?;
        let model = Ar1Model::unit(rho, scheme.m())?;
        let sigma = aggregated_ar1_covariance(&model, &c)?;
        let whitener = Whitener::new(sigma.view())?;
        let xl = c.apply_mat(x)?;
        Ok(WhitenedProblem {
            y_tilde: whitener.apply(y),
            x_tilde: whitener.apply_mat(xl.view()),
            log_det_s: whitener.log_det(),
            rho,
        })
    }

    /// Wraps already-rotated data.
    pub fn from_parts(y_tilde: Array1<f64>, x_tilde: Array2<f64>, log_det_s: f64) -> Result<Self> {
        if y_tilde.len() != x_tilde.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "whitened response has {} rows, design has {}",
                y_tilde.len(),
                x_tilde.nrows()
            )));
        }
        Ok(WhitenedProblem {
            y_tilde,
            x_tilde,
            log_det_s,
            rho: f64::NAN,
        })
    }

    pub fn n(&self) -> usize {
        self.y_tilde.len()
    }

    pub fn p(&self) -> usize {
        self.x_tilde.ncols()
    }

    pub fn residuals(&self, beta: ArrayView1<f64>) -> Result<Array1<f64>> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has {} entries, design has {} columns",
                beta.len(),
                self.p()
            )));
        }
        Ok(&self.y_tilde - &self.x_tilde.dot(&beta))
    }

    pub fn residual_ss(&self, beta: ArrayView1<f64>) -> Result<f64> {
        Ok(self.residuals(beta)?.iter().map(|r| r * r).sum())
    }
}

/// What to do when a supported column is linearly dependent on earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Fail with a not-identifiable error.
    #[default]
    Strict,
    /// Drop the later column, keep going, and record a warning.
    DropDependent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlsFit {
    pub beta: Array1<f64>,
    pub residual_ss: f64,
    /// Columns removed as dependent (original indices).
    pub dropped: Vec<usize>,
    /// Ratio of largest to smallest R pivot of the kept design.
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Least squares `min ‖ỹ − X̃β‖²` restricted to `support` (all columns when
/// `None`); coefficients outside the support are zero. Columns are
/// processed in the order given, so with `DropDependent` the
/// later-entering of two collinear columns is the one removed.
pub fn gls_fit(problem: &WhitenedProblem, support: Option<&[usize]>, policy: RankPolicy) -> Result<GlsFit> {
    let n = problem.n();
    let p = problem.p();
    let all: Vec<usize>;
    let support = match support {
        Some(s) => s,
        None => {
            all = (0..p).collect();
            &all
        }
    };
    if let Some(&j) = support.iter().find(|&&j| j >= p) {
        return Err(Error::DimensionMismatch(format!("support index {j} but p = {p}")));
    }
    if support.len() >= n {
        return Err(Error::NotIdentifiable(format!(
            "{} columns for {n} observations",
            support.len()
        )));
    }
    let mut beta = Array1::zeros(p);
    if support.is_empty() {
        let rss = problem.y_tilde.iter().map(|v| v * v).sum();
        return Ok(GlsFit {
            beta,
            residual_ss: rss,
            dropped: Vec::new(),
            condition: 1.0,
            warnings: Vec::new(),
        });
    }
    let design = problem.x_tilde.select(ndarray::Axis(1), support);
    let ls = ordered_least_squares(design.view(), problem.y_tilde.view());
    let dropped: Vec<usize> = ls.dropped.iter().map(|&k| support[k]).collect();
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        match policy {
            RankPolicy::Strict => {
                return Err(Error::NotIdentifiable(format!(
                    "columns {dropped:?} are linearly dependent on earlier columns"
                )))
            }
            RankPolicy::DropDependent => warnings.push(format!(
                "refit dropped collinear columns {dropped:?} (dependent on earlier-entering columns)"
            )),
        }
    }
    for (coef, &k) in ls.coef.iter().zip(ls.kept.iter()) {
        beta[support[k]] = *coef;
    }
    Ok(GlsFit {
        beta,
        residual_ss: ls.rss,
        dropped,
        condition: ls.condition_estimate(),
        warnings,
    })
}

/// `(ỹ − X̃β)ᵀ(ỹ − X̃β) / (n − k)`.
pub fn sigma2_hat(problem: &WhitenedProblem, beta: ArrayView1<f64>, k: usize) -> Result<f64> {
    let n = problem.n();
    if k >= n {
        return Err(Error::NotIdentifiable(format!(
            "degrees of freedom k = {k} leave no residual degrees of freedom (n = {n})"
        )));
    }
    Ok(problem.residual_ss(beta)? / (n - k) as f64)
}

/// Gaussian log-likelihood of the rotated regression:
/// `−(n/2)log 2π − (n/2)log σ² − ½log|S| − RSS/(2σ²)`.
pub fn log_likelihood(problem: &WhitenedProblem, beta: ArrayView1<f64>, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Numerical(format!(
            "log-likelihood needs a positive finite variance, got {sigma2}"
        )));
    }
    let rss = problem.residual_ss(beta)?;
    log_likelihood_from_rss(problem.n(), problem.log_det_s, rss, sigma2)
}

pub(crate) fn log_likelihood_from_rss(n: usize, log_det_s: f64, rss: f64, sigma2: f64) -> Result<f64> {
    let nf = n as f64;
    let ll = -0.5 * nf * (2.0 * PI).ln() - 0.5 * nf * sigma2.ln() - 0.5 * log_det_s - rss / (2.0 * sigma2);
    if !ll.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite log-likelihood (rss = {rss}, sigma2 = {sigma2}, log|S| = {log_det_s})"
        )));
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(resid: Array1<f64>) -> WhitenedProblem {
        let n = resid.len();
        WhitenedProblem::from_parts(resid, Array2::zeros((n, 1)), 0.0).unwrap()
    }

    #[test]
    fn sigma2_hat_examples() {
        let zero = toy(array![0.0, 0.0, 0.0]);
        assert_eq!(sigma2_hat(&zero, array![0.0].view(), 0).unwrap(), 0.0);
        let ones = toy(array![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(sigma2_hat(&ones, array![0.0].view(), 0).unwrap(), 1.0);
        let spike = toy(array![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(sigma2_hat(&spike, array![0.0].view(), 2).unwrap(), 2.0);
        assert!(sigma2_hat(&spike, array![0.0].view(), 4).is_err());
    }

    #[test]
    fn single_observation_likelihood() {
        let p = toy(array![0.0]);
        let ll = log_likelihood(&p, array![0.0].view(), 1.0).unwrap();
        assert!((ll + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn likelihood_rejects_bad_variance() {
        let p = toy(array![1.0, 2.0]);
        assert!(log_likelihood(&p, array![0.0].view(), 0.0).is_err());
        assert!(log_likelihood(&p, array![0.0].view(), f64::NAN).is_err());
    }

    #[test]
    fn too_many_columns_not_identifiable() {
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i + 2 * j) % 3) as f64 + i as f64);
        let p = WhitenedProblem::from_parts(array![1.0, 2.0, 3.0, 4.0], x, 0.0).unwrap();
        let err = gls_fit(&p, None, RankPolicy::Strict).unwrap_err();
        assert!(err.to_string().contains("GLS not identifiable"));
    }

    #[test]
    fn collinear_policy() {
        let x = array![[1.0, 2.0, 0.0], [2.0, 4.0, 1.0], [0.0, 0.0, 1.0], [1.0, 2.0, 3.0], [1.0, 2.0, 0.5]];
        let y = array![1.0, 0.0, 2.0, 1.0, -1.0];
        let p = WhitenedProblem::from_parts(y, x, 0.0).unwrap();
        assert!(matches!(gls_fit(&p, None, RankPolicy::Strict), Err(Error::NotIdentifiable(_))));
        let fit = gls_fit(&p, Some(&[1, 2, 0]), RankPolicy::DropDependent).unwrap();
        assert_eq!(fit.dropped, vec![0]);
        assert_eq!(fit.beta[0], 0.0);
        assert!(fit.beta[1] != 0.0);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn empty_support_is_null_model() {
        let p = WhitenedProblem::from_parts(array![3.0, 4.0], Array2::ones((2, 1)), 0.0).unwrap();
        let fit = gls_fit(&p, Some(&[]), RankPolicy::Strict).unwrap();
        assert_eq!(fit.residual_ss, 25.0);
        assert_eq!(fit.beta, array![0.0]);
    }
}
