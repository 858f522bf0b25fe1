//! AR(1) Toeplitz covariance, its aggregated form, and whitening.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::disagg::AggregationMatrix;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

/// Largest |ρ| accepted. The grid search never goes near the unit root.
pub const MAX_ABS_RHO: f64 = 0.999;

/// AR(1) error process `u_j = ρ u_{j−1} + ε_j`, `ε_j ~ N(0, σ²)`, over
/// `m` high-frequency periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Model {
    pub rho: f64,
    pub sigma2: f64,
    pub m: usize,
}

impl Ar1Model {
    pub fn new(rho: f64, sigma2: f64, m: usize) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "AR(1) coefficient must satisfy |rho| < 1, got {rho}"
            )));
        }
        if rho.abs() > MAX_ABS_RHO {
            return Err(Error::InvalidInput(format!(
                "AR(1) coefficient {rho} is too close to a unit root (|rho| > {MAX_ABS_RHO})"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "innovation variance must be positive, got {sigma2}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidInput("AR(1) model needs m > 0".into()));
        }
        Ok(Ar1Model { rho, sigma2, m })
    }

    /// Unit innovation variance, the scale used while rotating.
    pub fn unit(rho: f64, m: usize) -> Result<Self> {
        Self::new(rho, 1.0, m)
    }
}

/// Full covariance `V` and its scale-free form `S = V / σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub v: Array2<f64>,
    pub s: Array2<f64>,
    pub sigma2: f64,
}

/// `V[i][j] = σ² ρ^|i−j| / (1 − ρ²)`.
pub fn ar1_covariance(model: &Ar1Model) -> Result<CovariancePair> {
    let Ar1Model { rho, sigma2, m } = Ar1Model::new(model.rho, model.sigma2, model.m)?;
    let scale = 1.0 / (1.0 - rho * rho);
    // ρ^k by repeated multiplication; exact zeros for ρ = 0 beyond the diagonal.
    let mut powers = Vec::with_capacity(m);
    let mut acc = 1.0;
    for _ in 0..m {
        powers.push(acc * scale);
        acc *= rho;
    }
    let s = Array2::from_shape_fn((m, m), |(i, j)| powers[i.abs_diff(j)]);
    let v = s.mapv(|x| x * sigma2);
    Ok(CovariancePair { v, s, sigma2 })
}

/// `Σ = C V Cᵀ` using the sparsity of `C`.
pub fn aggregate_covariance(pair: &CovariancePair, c: &AggregationMatrix) -> Result<Array2<f64>> {
    let m = pair.v.nrows();
    if c.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "aggregation matrix has {} columns, covariance is {m}x{m}",
            c.ncols()
        )));
    }
    let n = c.nrows();
    let rows = c.rows();
    let mut sigma = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..=a {
            let mut acc = 0.0;
            for &(i, wi) in &rows[a] {
                for &(j, wj) in &rows[b] {
                    acc += wi * wj * pair.v[[i, j]];
                }
            }
            sigma[[a, b]] = acc;
            sigma[[b, a]] = acc;
        }
    }
    Ok(sigma)
}

/// `Σ = C V Cᵀ` for an AR(1) model straight from the Toeplitz entries,
/// without materialising `V`.
pub fn aggregated_ar1_covariance(model: &Ar1Model, c: &AggregationMatrix) -> Result<Array2<f64>> {
    let Ar1Model { rho, sigma2, m } = Ar1Model::new(model.rho, model.sigma2, model.m)?;
    if c.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "aggregation matrix has {} columns, model has m = {m}",
            c.ncols()
        )));
    }
    let scale = sigma2 / (1.0 - rho * rho);
    let mut powers = Vec::with_capacity(m);
    let mut acc = 1.0;
    for _ in 0..m {
        powers.push(acc * scale);
        acc *= rho;
    }
    let n = c.nrows();
    let rows = c.rows();
    let mut sigma = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..=a {
            let mut acc = 0.0;
            for &(i, wi) in &rows[a] {
                for &(j, wj) in &rows[b] {
                    acc += wi * wj * powers[i.abs_diff(j)];
                }
            }
            sigma[[a, b]] = acc;
            sigma[[b, a]] = acc;
        }
    }
    Ok(sigma)
}

/// Returns `W = L⁻¹` where `Σ = L Lᵀ`, so that `Wᵀ W = Σ⁻¹`.
pub fn whitening_transform(sigma: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(Whitener::new(sigma)?.matrix())
}

/// Applies `Σ^{-1/2}` (as `L⁻¹`) without forming it explicitly.
#[derive(Debug, Clone)]
pub struct Whitener {
    chol: Cholesky,
}

impl Whitener {
    pub fn new(sigma: ArrayView2<f64>) -> Result<Self> {
        Ok(Whitener {
            chol: Cholesky::new(sigma)?,
        })
    }

    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        self.chol.solve_lower(v)
    }

    pub fn apply_mat(&self, m: ArrayView2<f64>) -> Array2<f64> {
        self.chol.solve_lower_mat(m)
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }

    pub fn matrix(&self) -> Array2<f64> {
        self.chol.inverse_factor()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }
}
