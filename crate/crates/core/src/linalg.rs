//! Dense kernels: Cholesky factorization, triangular solves and an
//! ordered Householder least-squares solver.
//!
//! Everything here works on row-major `ndarray` storage and is sized for
//! the problems this crate meets (a few hundred rows at most).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric positive-definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut buf = vec![0.0; n * n];
        for j in 0..n {
            let (done, rest) = buf.split_at_mut(j * n);
            let row_j = &mut rest[..n];
            // Row j of L, left of the diagonal.
            for k in 0..j {
                let row_k = &done[k * n..k * n + k];
                let dot: f64 = row_j[..k].iter().zip(row_k).map(|(a, b)| a * b).sum();
                row_j[k] = (a[[j, k]] - dot) / done[k * n + k];
            }
            let d = a[[j, j]] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: d, index: j });
            }
            row_j[j] = d.sqrt();
        }
        let l = Array2::from_shape_vec((n, n), buf).expect("square buffer");
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor(&self) -> &Array2<f64> {
        &self.l
    }

    /// `log |A| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn min_pivot(&self) -> f64 {
        self.l.diag().iter().fold(f64::INFINITY, |a, &d| a.min(d * d))
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: ArrayView1<f64>) -> Array1<f64> {
        forward_substitute(self.l.view(), b)
    }

    /// Solves `L X = B`.
    pub fn solve_lower_mat(&self, b: ArrayView2<f64>) -> Array2<f64> {
        let n = self.dim();
        let c = b.ncols();
        let mut x = b.as_standard_layout().into_owned();
        let l = self.l.as_slice().expect("factor is contiguous");
        let xs = x.as_slice_mut().expect("owned standard layout");
        for i in 0..n {
            let (head, tail) = xs.split_at_mut(i * c);
            let row = &mut tail[..c];
            for k in 0..i {
                let lik = l[i * n + k];
                if lik != 0.0 {
                    for (t, s) in row.iter_mut().zip(&head[k * c..(k + 1) * c]) {
                        *t -= lik * s;
                    }
                }
            }
            let lii = l[i * n + i];
            row.iter_mut().for_each(|v| *v /= lii);
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let w = self.solve_lower(b);
        backward_substitute_transposed(self.l.view(), w.view())
    }

    /// Solves `A X = B`.
    pub fn solve_mat(&self, b: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.axis_iter(Axis(1)).enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }

    /// Explicit `L⁻¹`.
    pub fn inverse_factor(&self) -> Array2<f64> {
        let n = self.dim();
        self.solve_lower_mat(Array2::eye(n).view())
    }
}

/// Solves a lower-triangular system.
pub fn forward_substitute(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn backward_substitute_transposed(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn backward_substitute(r: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = r.nrows();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= r[[i, k]] * x[k];
        }
        x[i] = s / r[[i, i]];
    }
    x
}

/// Relative pivot threshold below which a column is treated as dependent.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Result of an ordered least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Coefficients for the kept columns, in the order they were kept.
    pub coef: Array1<f64>,
    /// Positions (into the supplied column list) that were kept.
    pub kept: Vec<usize>,
    /// Positions that were found linearly dependent on earlier columns.
    pub dropped: Vec<usize>,
    /// Residual sum of squares.
    pub rss: f64,
    /// Absolute diagonal of `R` for the kept columns.
    pub pivots: Vec<f64>,
}

impl LeastSquares {
    pub fn condition_estimate(&self) -> f64 {
        let max = self.pivots.iter().cloned().fold(0.0, f64::max);
        let min = self.pivots.iter().cloned().fold(f64::INFINITY, f64::min);
        if self.pivots.is_empty() {
            1.0
        } else {
            max / min
        }
    }
}

/// Householder QR least squares, processing columns strictly in the given
/// order. A column whose pivot falls below `COLLINEARITY_TOL` times the
/// largest pivot seen so far is skipped, so the earlier of two dependent
/// columns always survives.
pub fn ordered_least_squares(x: ArrayView2<f64>, y: ArrayView1<f64>) -> LeastSquares {
    let n = x.nrows();
    let k = x.ncols();
    // Column-major scratch: one Vec per column.
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| x.column(j).to_vec()).collect();
    let mut rhs = y.to_vec();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut pivots = Vec::new();
    let mut max_pivot = 0.0f64;

    for j in 0..k {
        let r = kept.len();
        if r >= n {
            dropped.push(j);
            continue;
        }
        let norm = cols[j][r..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = max_pivot.max(norm);
        if norm == 0.0 || norm <= COLLINEARITY_TOL * scale && max_pivot > 0.0 {
            dropped.push(j);
            continue;
        }
        // Householder vector for cols[j][r..].
        let alpha = if cols[j][r] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[j][r..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 > 0.0 {
            let apply = |target: &mut [f64]| {
                let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (t, a) in target.iter_mut().zip(v.iter()) {
                    *t -= f * a;
                }
            };
            for col in cols.iter_mut().skip(j + 1) {
                apply(&mut col[r..]);
            }
            apply(&mut rhs[r..]);
        }
        cols[j][r] = alpha;
        for v in cols[j][(r + 1)..].iter_mut() {
            *v = 0.0;
        }
        max_pivot = max_pivot.max(norm);
        pivots.push(norm);
        kept.push(j);
    }

    let r = kept.len();
    let mut rmat = Array2::<f64>::zeros((r, r));
    for (a, &ja) in kept.iter().enumerate() {
        for b in 0..=a {
            // R[b, a] = entry of column ja at row b.
            rmat[[b, a]] = cols[ja][b];
        }
    }
    let qty = Array1::from(rhs[..r].to_vec());
    let coef = backward_substitute(rmat.view(), qty.view());
    let rss = rhs[r..].iter().map(|v| v * v).sum();
    LeastSquares {
        coef,
        kept,
        dropped,
        rss,
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let c = Cholesky::new(a.view()).unwrap();
        let l = c.factor();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        let b = array![1.0, -2.0, 0.5];
        let x = c.solve(b.view());
        let ax = a.dot(&x);
        for (p, q) in ax.iter().zip(b.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        match Cholesky::new(a.view()) {
            Err(Error::NotPositiveDefinite { pivot, index }) => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn least_squares_drops_later_duplicate() {
        let x = array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 2.0]];
        let y = array![1.0, 2.0, 3.0, 2.0];
        let ls = ordered_least_squares(x.view(), y.view());
        assert_eq!(ls.kept, vec![0, 1]);
        assert_eq!(ls.dropped, vec![2]);
    }

    #[test]
    fn least_squares_exact_fit() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [0.5, -1.0], [2.0, 2.0]];
        let beta = array![0.7, -1.3];
        let y = x.dot(&beta);
        let ls = ordered_least_squares(x.view(), y.view());
        assert!((ls.coef[0] - 0.7).abs() < 1e-12);
        assert!((ls.coef[1] + 1.3).abs() < 1e-12);
        assert!(ls.rss < 1e-24);
    }
}
