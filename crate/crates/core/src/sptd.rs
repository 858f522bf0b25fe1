//! Sparse temporal disaggregation.
//!
//! For every ρ on a grid the aggregated regression is rotated by
//! `Σ^{-1/2}` (unit innovation variance), the lasso path of the rotated
//! problem is traced by LARS, optionally each breakpoint's support is
//! refitted by least squares, and the breakpoint with the lowest BIC among
//! those with fewer than `⌊cutoff·n⌋` nonzero coefficients is kept. The ρ
//! with the lowest BIC overall wins and the final series is built with the
//! Chow-Lin distribution matrix at that ρ.
//!
//! The adaptive variant reruns the selection on the ρ̂-rotated design with
//! columns rescaled by `|β̂_init|`.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::covariance::Ar1Model;
use crate::disagg::{
    check_dimensions, disaggregate, nonzero_indices, AggregationScheme, DisaggResult, IndicatorPanel,
    LowFreqSeries, Method, RhoProfile, RhoRecord,
};
use crate::error::{Error, Result};
use crate::gls::{gls_fit, log_likelihood_from_rss, RankPolicy, WhitenedProblem};
use crate::lars::{default_max_steps, lars_path};

/// Relative floor on the variance used inside the likelihood, so that an
/// exact fit (zero residuals) yields a finite BIC.
const SIGMA2_FLOOR_REL: f64 = 1e-20;

/// Relative tolerance under which two BIC values count as tied.
const BIC_TIE_TOL: f64 = 1e-10;

/// Ordered set of candidate AR(1) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid(Vec<f64>);

impl RhoGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("rho grid is empty".into()));
        }
        if let Some(r) = values.iter().find(|r| !(r.abs() < 1.0)) {
            return Err(Error::InvalidInput(format!("rho grid value {r} outside (-1, 1)")));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("rho grid must be strictly increasing".into()));
        }
        Ok(RhoGrid(values))
    }

    /// `min, min+step, …` up to and including `max` (within rounding).
    pub fn from_bounds(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) {
            return Err(Error::InvalidInput(format!(
                "invalid rho grid bounds: min = {min}, max = {max}, step = {step}"
            )));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        // Round to 12 decimals so 0.07 is 0.07 and not 0.07000000000000001.
        let values = (0..count)
            .map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Self::new(values)
    }

    /// {0.01, 0.02, …, 0.99}.
    pub fn positive() -> Self {
        Self::from_bounds(0.01, 0.99, 0.01).expect("static grid is valid")
    }

    /// {−0.99, −0.98, …, 0.99}.
    pub fn full() -> Self {
        Self::from_bounds(-0.99, 0.99, 0.01).expect("static grid is valid")
    }

    pub fn single(rho: f64) -> Result<Self> {
        Self::new(vec![rho])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for RhoGrid {
    fn default() -> Self {
        Self::positive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SptdConfig {
    pub rho_grid: RhoGrid,
    /// Refit each breakpoint's support by least squares before scoring.
    pub refit: bool,
    /// Breakpoints with `K ≥ ⌊cutoff_fraction·n⌋` are not scored.
    pub cutoff_fraction: f64,
    pub adaptive: bool,
    pub scheme: AggregationScheme,
    /// LARS step budget; `8·min(n, p)` when unset.
    pub max_steps: Option<usize>,
    /// Evaluate grid points on the rayon pool.
    pub parallel: bool,
}

impl SptdConfig {
    /// Refitted variant with the default grid and cut-off.
    pub fn new(scheme: AggregationScheme) -> Self {
        SptdConfig {
            rho_grid: RhoGrid::positive(),
            refit: true,
            cutoff_fraction: 0.5,
            adaptive: false,
            scheme,
            max_steps: None,
            parallel: true,
        }
    }

    pub fn with_refit(mut self, refit: bool) -> Self {
        self.refit = refit;
        self
    }

    pub fn with_grid(mut self, grid: RhoGrid) -> Self {
        self.rho_grid = grid;
        self
    }

    pub fn with_cutoff(mut self, cutoff_fraction: f64) -> Self {
        self.cutoff_fraction = cutoff_fraction;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "cutoff fraction must lie in (0, 1], got {}",
                self.cutoff_fraction
            )));
        }
        RhoGrid::new(self.rho_grid.values().to_vec())?;
        Ok(())
    }

    fn method(&self) -> Method {
        match (self.adaptive, self.refit) {
            (true, _) => Method::Adaptive,
            (false, true) => Method::SptdRf,
            (false, false) => Method::Sptd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicScore {
    pub bic: f64,
    pub k: usize,
    /// `RSS / (n − k)`.
    pub sigma2: f64,
    pub log_likelihood: f64,
}

/// `BIC = −2 L(β, σ̂²) + log(n)·K` with `K = #nonzero(β)` and
/// `σ̂² = RSS/(n − K)`.
pub fn bic_score(problem: &WhitenedProblem, beta: ArrayView1<f64>) -> Result<BicScore> {
    let n = problem.n();
    let k = beta.iter().filter(|b| **b != 0.0).count();
    if k >= n {
        return Err(Error::NotIdentifiable(format!(
            "BIC needs fewer nonzero coefficients than observations (K = {k}, n = {n})"
        )));
    }
    let rss = problem.residual_ss(beta)?;
    Ok(bic_from_rss(problem, rss, k))
}

fn bic_from_rss(problem: &WhitenedProblem, rss: f64, k: usize) -> BicScore {
    let n = problem.n();
    let sigma2 = rss / (n - k) as f64;
    let scale = problem.y_tilde.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let floor = (SIGMA2_FLOOR_REL * scale).max(f64::MIN_POSITIVE);
    let ll = log_likelihood_from_rss(n, problem.log_det_s, rss, sigma2.max(floor))
        .unwrap_or(f64::NEG_INFINITY);
    BicScore {
        bic: -2.0 * ll + (n as f64).ln() * k as f64,
        k,
        sigma2,
        log_likelihood: ll,
    }
}

/// Outcome of the path search at one ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoFit {
    pub rho: f64,
    pub beta: Array1<f64>,
    /// Breakpoint λ on the correlation scale.
    pub lambda: f64,
    pub bic: f64,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub k: usize,
    /// Index of the chosen breakpoint on the path.
    pub step: usize,
    pub warnings: Vec<String>,
}

impl RhoFit {
    pub fn lambda_penalty(&self) -> f64 {
        2.0 * self.lambda
    }
}

fn better(cand: (f64, usize), best: (f64, usize)) -> bool {
    let (b1, k1) = cand;
    let (b0, k0) = best;
    let tol = BIC_TIE_TOL * b0.abs().max(1.0);
    if b1 < b0 - tol {
        true
    } else if b1 <= b0 + tol {
        k1 < k0
    } else {
        false
    }
}

/// Least squares on LARS supports. Solves the normal equations with a
/// lazily filled Gram matrix; a support whose Cholesky shows a nearly
/// dependent column goes through the pivoted QR path instead.
struct Refitter<'a> {
    problem: &'a WhitenedProblem,
    xt: Array2<f64>,
    xty: Array1<f64>,
    gram: Vec<f64>,
}

/// Cholesky pivots below this fraction of the column's squared norm send
/// the support to the QR solver.
const GRAM_FALLBACK_TOL: f64 = 1e-8;

impl<'a> Refitter<'a> {
    fn new(problem: &'a WhitenedProblem) -> Self {
        let p = problem.p();
        let xt = problem.x_tilde.t().to_owned();
        let xty = xt.dot(&problem.y_tilde);
        Refitter {
            problem,
            xt,
            xty,
            gram: vec![f64::NAN; p * p],
        }
    }

    fn g(&mut self, i: usize, j: usize) -> f64 {
        let p = self.problem.p();
        let v = self.gram[i * p + j];
        if !v.is_nan() {
            return v;
        }
        let v = self.xt.row(i).dot(&self.xt.row(j));
        self.gram[i * p + j] = v;
        self.gram[j * p + i] = v;
        v
    }

    fn fit(&mut self, support: &[usize], warnings: &mut Vec<String>) -> Result<(Array1<f64>, f64)> {
        let k = support.len();
        if k >= self.problem.n() {
            return Err(Error::NotIdentifiable(format!(
                "{k} columns for {} observations",
                self.problem.n()
            )));
        }
        let mut l = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..=a {
                let mut s = self.g(support[a], support[b]);
                for t in 0..b {
                    s -= l[a * k + t] * l[b * k + t];
                }
                if a == b {
                    let d = self.g(support[a], support[a]);
                    if !(s > GRAM_FALLBACK_TOL * d) {
                        let fit = gls_fit(self.problem, Some(support), RankPolicy::DropDependent)?;
                        warnings.extend(fit.warnings);
                        return Ok((fit.beta, fit.residual_ss));
                    }
                    l[a * k + a] = s.sqrt();
                } else {
                    l[a * k + b] = s / l[b * k + b];
                }
            }
        }
        let mut w = vec![0.0; k];
        for a in 0..k {
            let mut s = self.xty[support[a]];
            for t in 0..a {
                s -= l[a * k + t] * w[t];
            }
            w[a] = s / l[a * k + a];
        }
        let mut coef = vec![0.0; k];
        for a in (0..k).rev() {
            let mut s = w[a];
            for t in (a + 1)..k {
                s -= l[t * k + a] * coef[t];
            }
            coef[a] = s / l[a * k + a];
        }
        let mut beta = Array1::zeros(self.problem.p());
        let mut resid = self.problem.y_tilde.clone();
        for (&j, &c) in support.iter().zip(coef.iter()) {
            beta[j] = c;
            resid.scaled_add(-c, &self.xt.row(j));
        }
        Ok((beta, resid.dot(&resid)))
    }
}

/// LARS + optional refit + BIC selection on an already rotated problem.
pub fn select_on_path(
    problem: &WhitenedProblem,
    refit: bool,
    cutoff_fraction: f64,
    max_steps: Option<usize>,
) -> Result<RhoFit> {
    let n = problem.n();
    let p = problem.p();
    let budget = max_steps.unwrap_or_else(|| default_max_steps(n, p));
    let path = lars_path(problem.y_tilde.view(), problem.x_tilde.view(), budget)?;
    let cutoff = (cutoff_fraction * n as f64).floor() as usize;

    let mut refitter = refit.then(|| Refitter::new(problem));
    let mut best: Option<RhoFit> = None;
    for (idx, step) in path.steps.iter().enumerate() {
        let k_path = step.nonzero();
        if k_path >= cutoff {
            continue;
        }
        let mut warnings = Vec::new();
        let (beta, rss) = match refitter.as_mut() {
            Some(r) if k_path > 0 => {
                let support: Vec<usize> = step
                    .active_set
                    .iter()
                    .copied()
                    .filter(|&j| step.beta[j] != 0.0)
                    .collect();
                r.fit(&support, &mut warnings)?
            }
            _ => {
                let rss = problem.residual_ss(step.beta.view())?;
                (step.beta.clone(), rss)
            }
        };
        let k = beta.iter().filter(|b| **b != 0.0).count();
        let score = bic_from_rss(problem, rss, k);
        let replace = match &best {
            None => true,
            Some(b) => better((score.bic, k), (b.bic, b.k)),
        };
        if replace {
            best = Some(RhoFit {
                rho: problem.rho,
                beta,
                lambda: step.lambda,
                bic: score.bic,
                sigma2: score.sigma2,
                log_likelihood: score.log_likelihood,
                k,
                step: idx,
                warnings,
            });
        }
    }

    match best {
        Some(fit) => Ok(fit),
        None => {
            let beta = Array1::zeros(p);
            let rss = problem.residual_ss(beta.view())?;
            let score = bic_from_rss(problem, rss, 0);
            Ok(RhoFit {
                rho: problem.rho,
                beta,
                lambda: path.initial_lambda(),
                bic: score.bic,
                sigma2: score.sigma2,
                log_likelihood: score.log_likelihood,
                k: 0,
                step: 0,
                warnings: vec![format!(
                    "no breakpoint below the cut-off ({cutoff} nonzero coefficients); returning the null model"
                )],
            })
        }
    }
}

/// Path search at a single ρ.
pub fn fit_for_rho(y: &LowFreqSeries, x: &IndicatorPanel, rho: f64, config: &SptdConfig) -> Result<RhoFit> {
    config.validate()?;
    check_dimensions(y, x, &config.scheme)?;
    let problem = WhitenedProblem::new(y.values.view(), x.values.view(), rho, &config.scheme)?;
    select_on_path(&problem, config.refit, config.cutoff_fraction, config.max_steps)
}

fn run_grid(y: &LowFreqSeries, x: &IndicatorPanel, config: &SptdConfig) -> Result<Vec<RhoFit>> {
    let fit = |&rho: &f64| -> Result<RhoFit> {
        let problem = WhitenedProblem::new(y.values.view(), x.values.view(), rho, &config.scheme)?;
        select_on_path(&problem, config.refit, config.cutoff_fraction, config.max_steps)
    };
    let grid = config.rho_grid.values();
    if config.parallel {
        grid.par_iter().map(fit).collect()
    } else {
        grid.iter().map(fit).collect()
    }
}

/// Lowest BIC; ties go to the sparser model, then the earlier grid point.
fn pick_rho(fits: &[RhoFit]) -> usize {
    let mut best = 0;
    for (i, f) in fits.iter().enumerate().skip(1) {
        if better((f.bic, f.k), (fits[best].bic, fits[best].k)) {
            best = i;
        }
    }
    best
}

fn profile_of(fits: &[RhoFit]) -> RhoProfile {
    RhoProfile {
        records: fits
            .iter()
            .map(|f| RhoRecord {
                rho: f.rho,
                bic: f.bic,
                log_likelihood: f.log_likelihood,
                sigma2_hat: f.sigma2,
                lambda_hat: f.lambda,
                k: f.k,
                beta: f.beta.to_vec(),
            })
            .collect(),
    }
}

fn check_inputs(y: &LowFreqSeries, x: &IndicatorPanel, config: &SptdConfig) -> Result<()> {
    config.validate()?;
    if y.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "sparse disaggregation needs n ≥ 4 low-frequency observations, got {}",
            y.len()
        )));
    }
    check_dimensions(y, x, &config.scheme)?;
    if let Some(j) = (0..x.ncols()).find(|&j| x.values.column(j).iter().all(|v| *v == 0.0)) {
        return Err(Error::InvalidInput(format!(
            "indicator '{}' is identically zero",
            x.names[j]
        )));
    }
    Ok(())
}

fn finish(
    y: &LowFreqSeries,
    x: &IndicatorPanel,
    scheme: &AggregationScheme,
    method: Method,
    fit: &RhoFit,
    profile: RhoProfile,
    mut warnings: Vec<String>,
) -> Result<DisaggResult> {
    let model = Ar1Model::unit(fit.rho, scheme.m())?;
    let series = disaggregate(y.values.view(), x.values.view(), fit.beta.view(), &model, scheme)?;
    warnings.extend(fit.warnings.iter().cloned());
    Ok(DisaggResult {
        method,
        active_set: nonzero_indices(fit.beta.view()),
        beta: fit.beta.clone(),
        rho_hat: fit.rho,
        sigma2_hat: fit.sigma2,
        lambda_hat: fit.lambda,
        lambda_penalty: fit.lambda_penalty(),
        bic: fit.bic,
        log_likelihood: fit.log_likelihood,
        zbar: series.zbar,
        z: series.z,
        profile,
        warnings,
    })
}

/// Full grid search; `config.adaptive` is ignored here (see [`adaptive_fit`]).
pub fn sptd_fit(y: &LowFreqSeries, x: &IndicatorPanel, config: &SptdConfig) -> Result<DisaggResult> {
    check_inputs(y, x, config)?;
    let fits = run_grid(y, x, config)?;
    let best = pick_rho(&fits);
    let method = if config.refit { Method::SptdRf } else { Method::Sptd };
    finish(y, x, &config.scheme, method, &fits[best], profile_of(&fits), Vec::new())
}

/// Two-stage adaptive lasso: stage one is [`sptd_fit`]; stage two reruns
/// LARS + BIC at ρ̂ on the surviving columns scaled by `|β̂_init|`, and the
/// stage-two coefficients are scaled back by the same weights.
pub fn adaptive_fit(y: &LowFreqSeries, x: &IndicatorPanel, config: &SptdConfig) -> Result<DisaggResult> {
    let stage1 = sptd_fit(y, x, config)?;
    let support = nonzero_indices(stage1.beta.view());
    if support.is_empty() {
        let mut out = stage1;
        out.method = Method::Adaptive;
        out.warnings
            .push("initial estimate selected no indicators; adaptive stage skipped".into());
        return Ok(out);
    }
    let rho = stage1.rho_hat;
    let problem = WhitenedProblem::new(y.values.view(), x.values.view(), rho, &config.scheme)?;
    let weights: Vec<f64> = support.iter().map(|&j| stage1.beta[j].abs()).collect();
    let n = problem.n();
    let mut scaled = Array2::zeros((n, support.len()));
    for (k, (&j, &w)) in support.iter().zip(weights.iter()).enumerate() {
        scaled
            .column_mut(k)
            .assign(&problem.x_tilde.column(j).mapv(|v| v * w));
    }
    let reduced = WhitenedProblem {
        y_tilde: problem.y_tilde.clone(),
        x_tilde: scaled,
        log_det_s: problem.log_det_s,
        rho,
    };
    let stage2 = select_on_path(&reduced, config.refit, config.cutoff_fraction, config.max_steps)?;
    let mut beta = Array1::zeros(x.ncols());
    for (k, (&j, &w)) in support.iter().zip(weights.iter()).enumerate() {
        beta[j] = stage2.beta[k] * w;
    }
    let fit = RhoFit {
        beta,
        ..stage2
    };
    finish(
        y,
        x,
        &config.scheme,
        Method::Adaptive,
        &fit,
        stage1.profile,
        stage1.warnings,
    )
}

/// Dispatches on the configured variant.
pub fn fit(y: &LowFreqSeries, x: &IndicatorPanel, config: &SptdConfig) -> Result<DisaggResult> {
    match config.method() {
        Method::Adaptive => adaptive_fit(y, x, config),
        _ => sptd_fit(y, x, config),
    }
}
