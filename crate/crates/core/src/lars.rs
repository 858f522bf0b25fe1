//! Least-angle regression with the lasso modification.
//!
//! The path starts at `β = 0` with `λ₀ = max_j |x_jᵀ y|` and moves the
//! active coefficients along the equiangular direction, so that every
//! active variable keeps the same absolute correlation `λ` with the
//! residual. A breakpoint is recorded whenever a variable enters, a
//! coefficient crosses zero and leaves, or `λ` reaches zero.
//!
//! Convention: `λ` is reported on the correlation scale. At each breakpoint
//! `β` solves `min ½‖y − Xβ‖² + λ‖β‖₁`, equivalently
//! `min ‖y − Xβ‖² + 2λ‖β‖₁`.
//!
//! Columns are used exactly as supplied; no centering or scaling.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative tolerance for treating two entry times as simultaneous.
const TIE_TOL: f64 = 1e-12;
/// Crossings of a just-dropped variable closer than this (relative to `λ₀`)
/// are the drop point itself.
const REENTRY_TOL: f64 = 1e-9;

/// Correlations are updated incrementally and recomputed from the
/// residual every this many segments.
const REFRESH_EVERY: usize = 8;

/// Event that ended a segment of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathAction {
    /// The null model at `λ₀`.
    Start,
    Add(usize),
    Drop(usize),
    /// `λ` reached zero; the active set is fully fitted.
    Saturate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub lambda: f64,
    pub beta: Array1<f64>,
    /// Active variables in entry order.
    pub active_set: Vec<usize>,
    pub action: PathAction,
}

impl PathStep {
    pub fn nonzero(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub steps: Vec<PathStep>,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn initial_lambda(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.lambda)
    }

    pub fn last(&self) -> &PathStep {
        self.steps.last().expect("a path always has its starting step")
    }
}

/// Default step budget: `8·min(n, p)`.
pub fn default_max_steps(n: usize, p: usize) -> usize {
    8 * n.min(p).max(1)
}

/// Cholesky factor of the active Gram matrix, updated as variables come
/// and go. Row `i` stores `L[i][0..=i]`.
struct GramFactor {
    rows: Vec<Vec<f64>>,
}

impl GramFactor {
    fn new() -> Self {
        GramFactor { rows: Vec::new() }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// Appends a variable with cross-products `g` against the current
    /// active set and squared norm `d`. Returns false if it is numerically
    /// dependent on the active columns.
    fn push(&mut self, g: &[f64], d: f64) -> bool {
        let k = self.len();
        let mut w = vec![0.0; k + 1];
        for i in 0..k {
            let row = &self.rows[i];
            let mut s = g[i];
            for t in 0..i {
                s -= row[t] * w[t];
            }
            w[i] = s / row[i];
        }
        let rem = d - w[..k].iter().map(|v| v * v).sum::<f64>();
        if !(rem > 1e-12 * d) {
            return false;
        }
        w[k] = rem.sqrt();
        self.rows.push(w);
        true
    }

    /// Removes the variable at position `q`, restoring the triangular
    /// shape with Givens rotations.
    fn remove(&mut self, q: usize) {
        self.rows.remove(q);
        let k = self.rows.len();
        for i in q..k {
            let a = self.rows[i][i];
            let b = self.rows[i][i + 1];
            let r = a.hypot(b);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for t in i..k {
                let x = self.rows[t][i];
                let y = self.rows[t][i + 1];
                self.rows[t][i] = c * x + s * y;
                self.rows[t][i + 1] = -s * x + c * y;
            }
            self.rows[i][i] = r;
            self.rows[i].truncate(i + 1);
        }
    }

    /// Solves `L Lᵀ x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut w = vec![0.0; k];
        for i in 0..k {
            let row = &self.rows[i];
            let mut s = b[i];
            for t in 0..i {
                s -= row[t] * w[t];
            }
            w[i] = s / row[i];
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = w[i];
            for t in (i + 1)..k {
                s -= self.rows[t][i] * x[t];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }
}

/// Computes the lasso solution path by LARS.
///
/// Ties between simultaneously entering variables go to the lowest column
/// index. Exact duplicates of an active column never enter.
pub fn lars_path(y: ArrayView1<f64>, x: ArrayView2<f64>, max_steps: usize) -> Result<SolutionPath> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "LARS: response has {} rows, design has {n}",
            y.len()
        )));
    }
    if max_steps == 0 {
        return Err(Error::InvalidInput("LARS needs max_steps ≥ 1".into()));
    }
    // Columns of X as contiguous rows.
    let xt: Array2<f64> = x.t().to_owned();
    let norms2: Vec<f64> = xt.rows().into_iter().map(|r| r.dot(&r)).collect();
    if let Some(j) = norms2.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput(format!("column {j} has zero variance")));
    }

    let mut beta = Array1::<f64>::zeros(p);
    let mut corr = xt.dot(&y);
    let lambda0 = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut steps = vec![PathStep {
        lambda: lambda0,
        beta: beta.clone(),
        active_set: Vec::new(),
        action: PathAction::Start,
    }];
    if lambda0 == 0.0 || p == 0 {
        return Ok(SolutionPath { steps });
    }
    let zero_tol = 1e-14 * lambda0;
    let kmax = n.min(p);

    let mut lambda = lambda0;
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; p];
    let mut excluded = vec![false; p];
    let mut gram = GramFactor::new();
    let mut pending_add = Some(first_max(&corr, &is_active, &excluded, lambda0));
    let mut last_dropped: Option<usize> = None;
    let mut gram_cols: Vec<Array1<f64>> = Vec::new();
    let mut segments = 0usize;

    loop {
        if let Some(j) = pending_add.take() {
            let g: Vec<f64> = gram_cols.iter().map(|col| col[j]).collect();
            if gram.push(&g, norms2[j]) {
                active.push(j);
                is_active[j] = true;
                gram_cols.push(xt.dot(&xt.row(j)));
            } else {
                excluded[j] = true;
            }
        }
        if active.is_empty() {
            // Every candidate was numerically degenerate.
            break;
        }

        let signs: Vec<f64> = active.iter().map(|&j| corr[j].signum()).collect();
        let delta = gram.solve(&signs);
        // a = Xᵀ X_A δ from the cached Gram columns.
        let mut a = Array1::<f64>::zeros(p);
        for (col, &d) in gram_cols.iter().zip(delta.iter()) {
            a.scaled_add(d, col);
        }

        // Candidate events; the segment ends at the earliest one.
        let mut gamma = lambda;
        let mut event = PathAction::Saturate;

        if active.len() < kmax {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..p {
                if is_active[j] || excluded[j] {
                    continue;
                }
                // A just-dropped variable sits on the boundary; only its
                // second crossing counts.
                let floor = if Some(j) == last_dropped { REENTRY_TOL * lambda0 } else { f64::NEG_INFINITY };
                let mut g = f64::INFINITY;
                let den1 = 1.0 - a[j];
                if den1 > 1e-12 {
                    let r = (lambda - corr[j]) / den1;
                    if r > floor {
                        g = g.min(r);
                    }
                }
                let den2 = 1.0 + a[j];
                if den2 > 1e-12 {
                    let r = (lambda + corr[j]) / den2;
                    if r > floor {
                        g = g.min(r);
                    }
                }
                if !g.is_finite() {
                    continue;
                }
                let g = g.max(0.0);
                match best {
                    Some((bg, _)) if g >= bg - TIE_TOL * lambda0 => {}
                    _ => best = Some((g, j)),
                }
            }
            if let Some((g, j)) = best {
                if g < gamma {
                    gamma = g;
                    event = PathAction::Add(j);
                }
            }
        }

        for (pos, &j) in active.iter().enumerate() {
            let d = delta[pos];
            if d == 0.0 {
                continue;
            }
            let g = -beta[j] / d;
            if g > zero_tol && g <= gamma {
                gamma = g;
                event = PathAction::Drop(j);
            }
        }

        if steps.len() > max_steps {
            return Err(Error::StepBudget(max_steps));
        }

        for (&j, &d) in active.iter().zip(delta.iter()) {
            beta[j] += gamma * d;
        }
        lambda -= gamma;
        last_dropped = None;
        match event {
            PathAction::Drop(j) => {
                beta[j] = 0.0;
                let q = active.iter().position(|&v| v == j).expect("dropped variable is active");
                active.remove(q);
                gram_cols.remove(q);
                is_active[j] = false;
                gram.remove(q);
                last_dropped = Some(j);
            }
            PathAction::Add(j) => pending_add = Some(j),
            PathAction::Saturate => {
                lambda = 0.0;
            }
            PathAction::Start => unreachable!(),
        }
        segments += 1;
        if segments % REFRESH_EVERY == 0 {
            corr = xt.dot(&(&y - &x.dot(&beta)));
        } else {
            corr.scaled_add(-gamma, &a);
        }

        let mut recorded_active = active.clone();
        if let PathAction::Add(j) = event {
            recorded_active.push(j);
        }
        if gamma <= zero_tol && !matches!(event, PathAction::Saturate) {
            // Simultaneous event: fold into the previous breakpoint.
            let prev = steps.last_mut().expect("path has a start step");
            prev.active_set = recorded_active;
            prev.beta = beta.clone();
        } else {
            steps.push(PathStep {
                lambda: lambda.max(0.0),
                beta: beta.clone(),
                active_set: recorded_active,
                action: event,
            });
        }

        if matches!(event, PathAction::Saturate) || lambda <= zero_tol {
            if let Some(last) = steps.last_mut() {
                last.lambda = last.lambda.max(0.0);
            }
            break;
        }
    }
    Ok(SolutionPath { steps })
}

fn first_max(corr: &Array1<f64>, is_active: &[bool], excluded: &[bool], scale: f64) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, c) in corr.iter().enumerate() {
        if is_active[j] || excluded[j] {
            continue;
        }
        if c.abs() > best_val + TIE_TOL * scale {
            best_val = c.abs();
            best = j;
        }
    }
    best
}

/// Coefficients at an arbitrary `λ` by linear interpolation between the
/// bracketing breakpoints. Values outside `[0, λ₀]` are clamped and a
/// warning is returned alongside.
pub fn coefficients_at(path: &SolutionPath, lambda: f64) -> (Array1<f64>, Option<String>) {
    let lambda0 = path.initial_lambda();
    let mut warning = None;
    let mut l = lambda;
    if !(l >= 0.0) || l > lambda0 {
        let clamped = if l > lambda0 { lambda0 } else { 0.0 };
        warning = Some(format!("lambda {lambda} outside [0, {lambda0}], clamped to {clamped}"));
        l = clamped;
    }
    let steps = &path.steps;
    for w in steps.windows(2) {
        let (hi, lo) = (&w[0], &w[1]);
        if l == hi.lambda {
            return (hi.beta.clone(), warning);
        }
        if l >= lo.lambda && l < hi.lambda {
            if l == lo.lambda {
                return (lo.beta.clone(), warning);
            }
            let t = (hi.lambda - l) / (hi.lambda - lo.lambda);
            let beta = &hi.beta * (1.0 - t) + &lo.beta * t;
            return (beta, warning);
        }
    }
    // Below the last breakpoint (path stopped early) or a single-step path.
    (path.last().beta.clone(), warning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_predictor_path() {
        let x = array![[1.0], [2.0], [-1.0], [0.5]];
        let y = array![1.0, 2.5, -0.5, 1.0];
        let path = lars_path(y.view(), x.view(), 10).unwrap();
        assert_eq!(path.len(), 2);
        let xty: f64 = x.column(0).dot(&y);
        let xtx: f64 = x.column(0).dot(&x.column(0));
        assert!((path.steps[0].lambda - xty.abs()).abs() < 1e-14);
        assert_eq!(path.steps[1].lambda, 0.0);
        assert!((path.steps[1].beta[0] - xty / xtx).abs() < 1e-12);
    }

    #[test]
    fn zero_response_single_step() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let path = lars_path(array![0.0, 0.0, 0.0].view(), x.view(), 10).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.steps[0].beta, array![0.0, 0.0]);
    }

    #[test]
    fn zero_column_rejected() {
        let x = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let err = lars_path(array![1.0, 2.0, 2.0].view(), x.view(), 10).unwrap_err();
        assert!(err.to_string().contains("column 1"));
    }

    #[test]
    fn duplicate_column_lowest_index_wins() {
        let x = array![[1.0, 0.3, 1.0], [2.0, -0.1, 2.0], [0.0, 1.0, 0.0], [1.0, 0.2, 1.0]];
        let y = array![2.0, 3.0, 0.5, 1.0];
        let path = lars_path(y.view(), x.view(), 20).unwrap();
        assert_eq!(path.steps[1].active_set[0], 0);
        assert!(path.steps.iter().all(|s| s.beta[2] == 0.0));
    }

    #[test]
    fn step_budget_enforced() {
        let x = array![[1.0, 0.2], [0.1, 1.0], [0.5, 0.5]];
        let y = array![1.0, 2.0, 0.3];
        assert!(matches!(lars_path(y.view(), x.view(), 1), Err(Error::StepBudget(1))));
    }

    #[test]
    fn gram_factor_remove_matches_fresh() {
        let cols = [
            array![1.0, 0.2, 0.0, 0.3],
            array![0.1, 1.0, 0.4, 0.0],
            array![0.0, 0.3, 1.0, 0.2],
            array![0.5, 0.0, 0.1, 1.0],
        ];
        let mut f = GramFactor::new();
        for (k, c) in cols.iter().enumerate() {
            let g: Vec<f64> = cols[..k].iter().map(|o| o.dot(c)).collect();
            assert!(f.push(&g, c.dot(c)));
        }
        f.remove(1);
        let keep = [0usize, 2, 3];
        let mut fresh = GramFactor::new();
        for (k, &i) in keep.iter().enumerate() {
            let g: Vec<f64> = keep[..k].iter().map(|&o| cols[o].dot(&cols[i])).collect();
            assert!(fresh.push(&g, cols[i].dot(&cols[i])));
        }
        for (r1, r2) in f.rows.iter().zip(fresh.rows.iter()) {
            for (a, b) in r1.iter().zip(r2.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let y = array![3.0, 1.0];
        let path = lars_path(y.view(), x.view(), 10).unwrap();
        let (b, w) = coefficients_at(&path, path.initial_lambda());
        assert!(w.is_none());
        assert_eq!(b, array![0.0, 0.0]);
        let (b, _) = coefficients_at(&path, 0.0);
        assert_eq!(b, path.last().beta);
        let mid = 0.5 * (path.steps[1].lambda + path.steps[2].lambda);
        let (b, _) = coefficients_at(&path, mid);
        let avg = (&path.steps[1].beta + &path.steps[2].beta) / 2.0;
        for (p, q) in b.iter().zip(avg.iter()) {
            assert!((p - q).abs() < 1e-14);
        }
        let (_, w) = coefficients_at(&path, 10.0);
        assert!(w.is_some());
    }
}
