#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha20Rng, len: usize) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.sample(StandardNormal))
}

pub fn max_abs_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff_mat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = b.clone();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[[i, k]].abs().total_cmp(&m[[j, k]].abs())).unwrap();
        if piv != k {
            for c in 0..n {
                m.swap([k, c], [piv, c]);
            }
            v.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[[i, k]] / m[[k, k]];
            for c in k..n {
                m[[i, c]] -= f * m[[k, c]];
            }
            v[i] -= f * v[k];
        }
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|c| m[[i, c]] * x[c]).sum();
        x[i] = (v[i] - s) / m[[i, i]];
    }
    x
}

/// Inverse by column-wise dense solves.
pub fn inverse_dense(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut inv = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        inv.column_mut(j).assign(&solve_dense(a, &e));
    }
    inv
}

/// `(XᵀX)⁻¹ Xᵀy`.
pub fn ols_normal_equations(y: ArrayView1<f64>, x: ArrayView2<f64>) -> Array1<f64> {
    let xtx = x.t().dot(&x);
    let xty = x.t().dot(&y);
    solve_dense(&xtx, &xty)
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Cyclic coordinate descent for `½‖y − Xβ‖² + λ‖β‖₁`, run until no
/// coordinate moves by more than `tol`.
pub fn lasso_cd(y: ArrayView1<f64>, x: ArrayView2<f64>, lambda: f64, tol: f64) -> Array1<f64> {
    let p = x.ncols();
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).dot(&x.column(j))).collect();
    let mut beta = Array1::<f64>::zeros(p);
    let mut r = y.to_owned();
    for _ in 0..2_000_000 {
        let mut max_step = 0.0f64;
        for j in 0..p {
            let xj = x.column(j);
            let rho = xj.dot(&r) + norms[j] * beta[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            let d = new - beta[j];
            if d != 0.0 {
                r.scaled_add(-d, &xj);
                beta[j] = new;
                max_step = max_step.max(d.abs());
            }
        }
        if max_step <= tol {
            return beta;
        }
    }
    panic!("coordinate descent did not converge");
}

/// Orthonormal columns by modified Gram-Schmidt.
pub fn orthonormal_columns(rng: &mut ChaCha20Rng, n: usize, p: usize) -> Array2<f64> {
    let mut q = normal_matrix(rng, n, p);
    for j in 0..p {
        for k in 0..j {
            let d = q.column(k).dot(&q.column(j));
            let qk = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-d, &qk);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q
}

/// Dense `C` for sum aggregation of `n` blocks of length `s`.
pub fn dense_sum_aggregation(s: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n * s), |(i, j)| if j / s == i { 1.0 } else { 0.0 })
}

/// Dense `V = σ² ρ^|i−j| / (1 − ρ²)`.
pub fn dense_ar1(rho: f64, sigma2: f64, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, m), |(i, j)| sigma2 * rho.powi((i as i32 - j as i32).abs()) / (1.0 - rho * rho))
}

pub fn rmse(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let k = a.len() as f64;
    (a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / k).sqrt()
}
