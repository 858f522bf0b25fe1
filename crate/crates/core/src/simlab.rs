//! Monte-Carlo harness: synthetic instances, estimator arms, metrics and a
//! deterministic text report.
//!
//! Every replicate draws from its own ChaCha20 stream (key = scenario seed,
//! stream = replicate index), so results do not depend on scheduling.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chowlin::{chowlin_fit, ChowLinConfig};
use crate::disagg::{
    build_aggregation_matrix, consistency_gap, AggregationScheme, DisaggResult, IndicatorPanel, LowFreqSeries,
    Method,
};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::sptd::{adaptive_fit, sptd_fit, RhoGrid, SptdConfig};

/// How indicator columns are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// i.i.d. standard normal entries.
    IidNormal,
    /// Cumulative sums of standard normal steps, per column.
    RandomWalk,
    /// Blocks of `block_size` columns with unit variance and pairwise
    /// correlation `theta`; independent across blocks.
    BlockEquicorr {
        theta: f64,
        #[serde(default = "default_block_size")]
        block_size: usize,
    },
    /// Rows drawn from `N(0, R)` where `R` is a correlation matrix built
    /// once from `seed`: a `p × factor_dim` Gaussian factor `F`, `A = F Fᵀ`,
    /// scaled to unit diagonal.
    RandomCov {
        seed: u64,
        #[serde(default)]
        factor_dim: Option<usize>,
    },
}

fn default_block_size() -> usize {
    10
}

impl Design {
    fn label(&self) -> String {
        match self {
            Design::IidNormal => "iid_normal".into(),
            Design::RandomWalk => "random_walk".into(),
            Design::BlockEquicorr { theta, block_size } => {
                format!("block_equicorr(theta={theta}, block_size={block_size})")
            }
            Design::RandomCov { seed, factor_dim } => match factor_dim {
                Some(q) => format!("random_cov(seed={seed}, factor_dim={q})"),
                None => format!("random_cov(seed={seed})"),
            },
        }
    }
}

/// Pattern of the true coefficient vector; entries past the pattern are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    /// Ten 5's.
    TenFives,
    /// −2, 2, −2, … ten entries.
    AlternatingSigns,
    /// Five 5's then five 0's, repeated for three blocks of ten.
    BlockPattern,
}

impl BetaSpec {
    pub fn pattern(&self) -> Vec<f64> {
        match self {
            BetaSpec::TenFives => vec![5.0; 10],
            BetaSpec::AlternatingSigns => (0..10).map(|i| if i % 2 == 0 { -2.0 } else { 2.0 }).collect(),
            BetaSpec::BlockPattern => (0..30).map(|i| if i % 10 < 5 { 5.0 } else { 0.0 }).collect(),
        }
    }

    /// Full length-`p` vector.
    pub fn build(&self, p: usize) -> Result<Array1<f64>> {
        let pat = self.pattern();
        if pat.len() > p {
            return Err(Error::InvalidInput(format!(
                "coefficient pattern {} needs p ≥ {}, got {p}",
                self.label(),
                pat.len()
            )));
        }
        let mut beta = Array1::zeros(p);
        for (b, v) in beta.iter_mut().zip(pat) {
            *b = v;
        }
        Ok(beta)
    }

    fn label(&self) -> &'static str {
        match self {
            BetaSpec::TenFives => "ten_fives",
            BetaSpec::AlternatingSigns => "alternating_signs",
            BetaSpec::BlockPattern => "block_pattern",
        }
    }
}

/// One cell of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    #[serde(default = "default_ratio")]
    pub s: usize,
    pub p: usize,
    pub rho_true: f64,
    pub design: Design,
    #[serde(rename = "beta")]
    pub beta_spec: BetaSpec,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_arms")]
    pub arms: Vec<Method>,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_rho_step")]
    pub rho_step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_ratio() -> usize {
    4
}
fn default_arms() -> Vec<Method> {
    vec![Method::ChowLin, Method::Sptd, Method::SptdRf]
}
fn default_rho_min() -> f64 {
    0.01
}
fn default_rho_max() -> f64 {
    0.99
}
fn default_rho_step() -> f64 {
    0.01
}
fn default_cutoff() -> f64 {
    0.5
}

impl Scenario {
    /// Stationary-style cell with the default grid and the three main arms.
    pub fn new(n: usize, p: usize, rho_true: f64, design: Design, beta_spec: BetaSpec, replicates: usize, seed: u64) -> Self {
        Scenario {
            name: default_name(),
            n,
            s: default_ratio(),
            p,
            rho_true,
            design,
            beta_spec,
            replicates,
            seed,
            arms: default_arms(),
            rho_min: default_rho_min(),
            rho_max: default_rho_max(),
            rho_step: default_rho_step(),
            cutoff: default_cutoff(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario file: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.p == 0 || self.s == 0 || self.replicates == 0 {
            return Err(Error::InvalidInput(format!(
                "scenario needs n ≥ 4 and p, s, replicates ≥ 1 (n = {}, p = {}, s = {}, replicates = {})",
                self.n, self.p, self.s, self.replicates
            )));
        }
        if !(self.rho_true.abs() < 1.0) {
            return Err(Error::InvalidInput(format!("rho_true must satisfy |rho| < 1, got {}", self.rho_true)));
        }
        match self.design {
            Design::BlockEquicorr { theta, block_size } => {
                if !(0.0..1.0).contains(&theta) || block_size == 0 {
                    return Err(Error::InvalidInput(format!(
                        "block design needs theta in [0, 1) and block_size ≥ 1 (theta = {theta}, block_size = {block_size})"
                    )));
                }
            }
            Design::RandomCov { factor_dim: Some(q), .. } if q < self.p => {
                return Err(Error::InvalidInput(format!(
                    "random covariance factor dimension {q} must be at least p = {}",
                    self.p
                )));
            }
            _ => {}
        }
        self.beta_spec.build(self.p)?;
        self.rho_grid()?;
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(Error::InvalidInput(format!("cutoff must lie in (0, 1], got {}", self.cutoff)));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.n * self.s
    }

    pub fn scheme(&self) -> Result<AggregationScheme> {
        AggregationScheme::sum(self.s, self.n)
    }

    pub fn rho_grid(&self) -> Result<RhoGrid> {
        RhoGrid::from_bounds(self.rho_min, self.rho_max, self.rho_step)
    }
}

/// Correlation matrix of the random-covariance design.
pub fn random_correlation(seed: u64, p: usize, factor_dim: usize) -> Array2<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let f = Array2::from_shape_simple_fn((p, factor_dim), || StandardNormal.sample(&mut rng));
    let a: Array2<f64> = f.dot(&f.t());
    let d: Vec<f64> = (0..p).map(|i| a[[i, i]].sqrt()).collect();
    Array2::from_shape_fn((p, p), |(i, j)| if i == j { 1.0 } else { a[[i, j]] / (d[i] * d[j]) })
}

/// Population correlation matrix of a design, when it is stationary.
pub fn design_correlation(design: &Design, p: usize) -> Option<Array2<f64>> {
    match *design {
        Design::IidNormal => Some(Array2::eye(p)),
        Design::RandomWalk => None,
        Design::BlockEquicorr { theta, block_size } => Some(Array2::from_shape_fn((p, p), |(i, j)| {
            if i == j {
                1.0
            } else if i / block_size == j / block_size {
                theta
            } else {
                0.0
            }
        })),
        Design::RandomCov { seed, factor_dim } => Some(random_correlation(seed, p, factor_dim.unwrap_or(p))),
    }
}

/// `max_{j ∉ S} |R_{jS} R_{SS}⁻¹ sign(β_S)|`; the irrepresentable
/// condition holds when this is below 1.
pub fn irrepresentable_statistic(r: &Array2<f64>, beta: &Array1<f64>) -> Result<f64> {
    let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let rest: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] == 0.0).collect();
    if support.is_empty() || rest.is_empty() {
        return Ok(0.0);
    }
    let rss = r.select(ndarray::Axis(0), &support).select(ndarray::Axis(1), &support);
    let signs = Array1::from_iter(support.iter().map(|&j| beta[j].signum()));
    let w = Cholesky::new(rss.view())?.solve(signs.view());
    let rns = r.select(ndarray::Axis(0), &rest).select(ndarray::Axis(1), &support);
    Ok(rns.dot(&w).iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// One synthetic data set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub y: LowFreqSeries,
    pub x: IndicatorPanel,
    pub z_true: Array1<f64>,
    pub beta_true: Array1<f64>,
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws replicate `replicate` of `scenario`: indicators per the design,
/// AR(1) errors started from the stationary law, `z = Xβ + u`, `y = C z`.
pub fn generate_instance(scenario: &Scenario, replicate: u64) -> Result<Instance> {
    scenario.validate()?;
    let (m, p) = (scenario.m(), scenario.p);
    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    rng.set_stream(replicate);

    let x = match scenario.design {
        Design::IidNormal => Array2::from_shape_simple_fn((m, p), || normal(&mut rng)),
        Design::RandomWalk => {
            let mut x = Array2::from_shape_simple_fn((m, p), || normal(&mut rng));
            for i in 1..m {
                for j in 0..p {
                    x[[i, j]] += x[[i - 1, j]];
                }
            }
            x
        }
        Design::BlockEquicorr { theta, block_size } => {
            let blocks = p.div_ceil(block_size);
            let (a, b) = (theta.sqrt(), (1.0 - theta).sqrt());
            let mut x = Array2::zeros((m, p));
            for i in 0..m {
                let common: Vec<f64> = (0..blocks).map(|_| normal(&mut rng)).collect();
                for j in 0..p {
                    x[[i, j]] = a * common[j / block_size] + b * normal(&mut rng);
                }
            }
            x
        }
        Design::RandomCov { seed, factor_dim } => {
            let r = random_correlation(seed, p, factor_dim.unwrap_or(p));
            let l = Cholesky::new(r.view())?;
            let e = Array2::from_shape_simple_fn((m, p), || normal(&mut rng));
            e.dot(&l.factor().t())
        }
    };

    let beta_true = scenario.beta_spec.build(p)?;
    let rho = scenario.rho_true;
    let mut u = Array1::zeros(m);
    u[0] = normal(&mut rng) / (1.0 - rho * rho).sqrt();
    for j in 1..m {
        u[j] = rho * u[j - 1] + normal(&mut rng);
    }
    let z_true = x.dot(&beta_true) + &u;
    let c = build_aggregation_matrix(&scenario.scheme()?)?;
    let y = c.apply(z_true.view())?;
    Ok(Instance {
        y: LowFreqSeries::new(y, "y")?,
        x: IndicatorPanel::unnamed(x)?,
        z_true,
        beta_true,
    })
}

/// Accuracy of one fit against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub rmse_z: f64,
    pub rmse_beta: f64,
    pub linf_beta: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub rho_hat: f64,
    pub exact_support: bool,
}

fn rmse(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    ((a - b).mapv(|d| d * d).sum() / a.len() as f64).sqrt()
}

pub fn evaluate_fit(result: &DisaggResult, z_true: &Array1<f64>, beta_true: &Array1<f64>) -> Result<MetricsRecord> {
    if result.z.len() != z_true.len() || result.beta.len() != beta_true.len() {
        return Err(Error::DimensionMismatch(format!(
            "metrics: estimate has {} periods and {} coefficients, truth has {} and {}",
            result.z.len(),
            result.beta.len(),
            z_true.len(),
            beta_true.len()
        )));
    }
    let mut fp = 0;
    let mut fn_ = 0;
    for (b, t) in result.beta.iter().zip(beta_true.iter()) {
        match (*b != 0.0, *t != 0.0) {
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let linf = (&result.beta - beta_true).iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(MetricsRecord {
        rmse_z: rmse(&result.z, z_true),
        rmse_beta: rmse(&result.beta, beta_true),
        linf_beta: linf,
        fp,
        fn_,
        rho_hat: result.rho_hat,
        exact_support: fp == 0 && fn_ == 0,
    })
}

/// Runs one estimator on an instance with the scenario's grid and cut-off.
pub fn fit_arm(arm: Method, scenario: &Scenario, inst: &Instance) -> Result<DisaggResult> {
    let scheme = scenario.scheme()?;
    let grid = scenario.rho_grid()?;
    match arm {
        Method::ChowLin => chowlin_fit(&inst.y, &inst.x, &ChowLinConfig::new(scheme).with_grid(grid)),
        Method::Sptd | Method::SptdRf | Method::Adaptive => {
            let mut cfg = SptdConfig::new(scheme)
                .with_grid(grid)
                .with_cutoff(scenario.cutoff)
                .with_refit(arm != Method::Sptd);
            cfg.adaptive = arm == Method::Adaptive;
            if cfg.adaptive {
                adaptive_fit(&inst.y, &inst.x, &cfg)
            } else {
                sptd_fit(&inst.y, &inst.x, &cfg)
            }
        }
    }
}

/// One (replicate, arm) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub arm: Method,
    pub metrics: MetricsRecord,
    pub beta_hat: Vec<f64>,
    /// `‖C ẑ − y‖∞`.
    pub consistency_gap: f64,
    /// Whether the gap is within `CONSISTENCY_TOL·(1 + ‖y‖∞)`.
    pub consistent: bool,
}

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Moments { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let sd = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        Moments { mean, sd }
    }
}

pub const METRIC_NAMES: [&str; 7] = ["rmse_z", "rmse_beta", "linf_beta", "fp", "fn", "rho_hat", "exact_support"];

fn metric_values(m: &MetricsRecord) -> [f64; 7] {
    [
        m.rmse_z,
        m.rmse_beta,
        m.linf_beta,
        m.fp as f64,
        m.fn_ as f64,
        m.rho_hat,
        if m.exact_support { 1.0 } else { 0.0 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: Method,
    pub completed: usize,
    /// In the order of [`METRIC_NAMES`].
    pub metrics: Vec<Moments>,
}

impl ArmSummary {
    pub fn metric(&self, name: &str) -> Option<Moments> {
        METRIC_NAMES.iter().position(|m| *m == name).map(|i| self.metrics[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub rows: Vec<ReplicateRow>,
    pub summaries: Vec<ArmSummary>,
    pub notes: Vec<String>,
}

/// Relative tolerance for the inline consistency check.
pub const CONSISTENCY_TOL: f64 = 1e-8;

impl ExperimentReport {
    pub fn summary(&self, arm: Method) -> Option<&ArmSummary> {
        self.summaries.iter().find(|s| s.arm == arm)
    }

    pub fn rows_for(&self, arm: Method) -> impl Iterator<Item = &ReplicateRow> {
        self.rows.iter().filter(move |r| r.arm == arm)
    }

    /// Header comments, one CSV row per replicate and arm, then a summary
    /// table of mean and standard deviation per arm and metric.
    pub fn to_text(&self) -> String {
        let sc = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(out, "# scenario: {}", sc.name);
        let _ = writeln!(
            out,
            "# n={} s={} p={} rho_true={} design={} beta={} replicates={} seed={}",
            sc.n,
            sc.s,
            sc.p,
            sc.rho_true,
            sc.design.label(),
            sc.beta_spec.label(),
            sc.replicates,
            sc.seed
        );
        let _ = writeln!(
            out,
            "# rho_grid=[{}, {}] step {} cutoff={}",
            sc.rho_min, sc.rho_max, sc.rho_step, sc.cutoff
        );
        for note in &self.notes {
            let _ = writeln!(out, "# note: {note}");
        }
        out.push_str("replicate,arm,rmse_z,rmse_beta,linf_beta,fp,fn,rho_hat,exact_support\n");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.replicate, r.arm, m.rmse_z, m.rmse_beta, m.linf_beta, m.fp, m.fn_, m.rho_hat, m.exact_support
            );
        }
        out.push_str("\n# summary\narm,completed,metric,mean,sd\n");
        for s in &self.summaries {
            for (name, mo) in METRIC_NAMES.iter().zip(s.metrics.iter()) {
                let _ = writeln!(out, "{},{},{},{},{}", s.arm, s.completed, name, mo.mean, mo.sd);
            }
        }
        out
    }
}

/// Runs every arm on every replicate. The Chow-Lin arm is skipped (with a
/// note) when `p ≥ n`; failed fits are listed as notes and left out of the
/// summary.
pub fn run_experiment(scenario: &Scenario, arms: &[Method]) -> Result<ExperimentReport> {
    scenario.validate()?;
    let mut notes = Vec::new();
    let arms: Vec<Method> = arms
        .iter()
        .copied()
        .filter(|&a| {
            if a == Method::ChowLin && scenario.p >= scenario.n {
                notes.push(format!(
                    "chowlin arm skipped: p = {} ≥ n = {}, GLS is not identifiable",
                    scenario.p, scenario.n
                ));
                false
            } else {
                true
            }
        })
        .collect();
    if let Design::RandomCov { seed, factor_dim } = scenario.design {
        let q = factor_dim.unwrap_or(scenario.p);
        let r = random_correlation(seed, scenario.p, q);
        let stat = irrepresentable_statistic(&r, &scenario.beta_spec.build(scenario.p)?)?;
        notes.push(format!(
            "random correlation matrix: seed {seed}, factor dimension {q}, irrepresentable statistic {stat:.4} ({})",
            if stat >= 1.0 { "condition violated" } else { "condition holds" }
        ));
    }
    let c = build_aggregation_matrix(&scenario.scheme()?)?;

    type Outcome = Vec<std::result::Result<ReplicateRow, String>>;
    let per_rep: Vec<Result<Outcome>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|rep| {
            let inst = generate_instance(scenario, rep as u64)?;
            Ok(arms
                .iter()
                .map(|&arm| {
                    let res = fit_arm(arm, scenario, &inst).map_err(|e| format!("replicate {rep} arm {arm}: {e}"))?;
                    let metrics = evaluate_fit(&res, &inst.z_true, &inst.beta_true).map_err(|e| e.to_string())?;
                    let gap = consistency_gap(&c, res.z.view(), inst.y.values.view()).map_err(|e| e.to_string())?;
                    let y_inf = inst.y.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    Ok(ReplicateRow {
                        consistent: gap <= CONSISTENCY_TOL * (1.0 + y_inf),
                        replicate: rep,
                        arm,
                        metrics,
                        beta_hat: res.beta.to_vec(),
                        consistency_gap: gap,
                    })
                })
                .collect())
        })
        .collect();

    let mut rows = Vec::new();
    for outcome in per_rep {
        for item in outcome? {
            match item {
                Ok(row) => {
                    if !row.consistent {
                        notes.push(format!(
                            "replicate {} arm {}: temporal consistency gap {:e}",
                            row.replicate, row.arm, row.consistency_gap
                        ));
                    }
                    rows.push(row);
                }
                Err(msg) => notes.push(format!("fit failed: {msg}")),
            }
        }
    }

    let summaries = arms
        .iter()
        .map(|&arm| {
            let vals: Vec<[f64; 7]> = rows.iter().filter(|r| r.arm == arm).map(|r| metric_values(&r.metrics)).collect();
            let metrics = (0..METRIC_NAMES.len())
                .map(|i| Moments::of(&vals.iter().map(|v| v[i]).collect::<Vec<_>>()))
                .collect();
            ArmSummary {
                arm,
                completed: vals.len(),
                metrics,
            }
        })
        .collect();

    Ok(ExperimentReport {
        scenario: scenario.clone(),
        rows,
        summaries,
        notes,
    })
}
