//! Command-line plumbing: CSV ingestion, standardisation, configuration
//! merging, and the `disaggregate` / `simulate` commands.
//!
//! Files are comma-separated UTF-8 with a mandatory header. The
//! low-frequency file has `period,value`; the indicator file has `period`
//! followed by one column per indicator at high frequency.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::chowlin::{chowlin_fit, ChowLinConfig};
use crate::disagg::{
    build_aggregation_matrix, consistency_gap, AggregationKind, AggregationScheme, DisaggResult, IndicatorPanel,
    LowFreqSeries, Method,
};
use crate::error::{Error, Result};
use crate::simlab::{run_experiment, Scenario};
use crate::sptd::{adaptive_fit, sptd_fit, RhoGrid, SptdConfig};

/// Means and standard deviations removed by [`standardize_panel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub y_mean: f64,
    pub y_sd: f64,
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
    /// Divisor applied to `y_mean` when mapping a high-frequency estimate
    /// back: `s` for sum aggregation, 1 otherwise.
    pub mean_divisor: f64,
}

fn mean_sd(v: ArrayView1<f64>) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.sum() / k;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

/// Centres and scales `y` and every indicator column to mean 0 and sample
/// standard deviation 1.
pub fn standardize_panel(
    y: &LowFreqSeries,
    x: &IndicatorPanel,
    scheme: &AggregationScheme,
) -> Result<(LowFreqSeries, IndicatorPanel, ScalingRecord)> {
    let (y_mean, y_sd) = mean_sd(y.values.view());
    if !(y_sd > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cannot standardize: low-frequency series '{}' is constant",
            y.label
        )));
    }
    let mut xs = x.values.clone();
    let mut x_means = Vec::with_capacity(x.ncols());
    let mut x_sds = Vec::with_capacity(x.ncols());
    for (j, mut col) in xs.columns_mut().into_iter().enumerate() {
        let (m, sd) = mean_sd(col.view());
        if !(sd > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cannot standardize: indicator '{}' is constant",
                x.names[j]
            )));
        }
        col.mapv_inplace(|v| (v - m) / sd);
        x_means.push(m);
        x_sds.push(sd);
    }
    let y_std = LowFreqSeries::new(y.values.mapv(|v| (v - y_mean) / y_sd), y.label.clone())?;
    let x_std = IndicatorPanel::new(xs, x.names.clone())?;
    let record = ScalingRecord {
        y_mean,
        y_sd,
        x_means,
        x_sds,
        mean_divisor: scheme.row_weight_sum(),
    };
    Ok((y_std, x_std, record))
}

/// Inverse of the indicator part of [`standardize_panel`].
pub fn unstandardize_indicators(x_std: &Array2<f64>, record: &ScalingRecord) -> Array2<f64> {
    let mut x = x_std.clone();
    for (j, mut col) in x.columns_mut().into_iter().enumerate() {
        let (m, sd) = (record.x_means[j], record.x_sds[j]);
        col.mapv_inplace(|v| v * sd + m);
    }
    x
}

/// `z = z_std·sd(y) + mean(y)/d` with `d = s` for sum aggregation and 1 for
/// average, first and last.
pub fn rescale_estimate(z_std: ArrayView1<f64>, record: Option<&ScalingRecord>) -> Result<Array1<f64>> {
    let r = record.ok_or_else(|| Error::InvalidInput("rescaling needs a scaling record".into()))?;
    let offset = r.y_mean / r.mean_divisor;
    Ok(z_std.mapv(|v| v * r.y_sd + offset))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

fn parse_cell(cell: &str, row: usize, col: &str, path: &Path) -> Result<f64> {
    if is_missing(cell) {
        return Ok(f64::NAN);
    }
    cell.trim().parse::<f64>().map_err(|_| {
        Error::InvalidInput(format!(
            "{}: row {row}, column '{col}': cannot parse '{cell}' as a number",
            path.display()
        ))
    })
}

/// Table read from a CSV file; missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub periods: Vec<String>,
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

/// Reads `period,col1,col2,…`.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{}: expected a period column followed by at least one value column",
            path.display()
        )));
    }
    let names = header[1..].to_vec();
    let mut periods = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}: row {row} has {} fields, header has {}",
                path.display(),
                rec.len(),
                header.len()
            )));
        }
        periods.push(rec[0].trim().to_string());
        for (k, cell) in rec.iter().skip(1).enumerate() {
            data.push(parse_cell(cell, row, &names[k], path)?);
        }
    }
    if periods.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no data rows", path.display())));
    }
    let values = Array2::from_shape_vec((periods.len(), names.len()), data).expect("rows have equal width");
    Ok(Table { periods, names, values })
}

/// Fills interior gaps of each column by linear interpolation. Gaps at
/// either end are left alone (and rejected later).
pub fn impute_linear(values: &mut Array2<f64>) -> usize {
    let mut filled = 0;
    for mut col in values.columns_mut() {
        let known: Vec<usize> = (0..col.len()).filter(|&i| col[i].is_finite()).collect();
        for w in known.windows(2) {
            let (a, b) = (w[0], w[1]);
            for i in (a + 1)..b {
                let t = (i - a) as f64 / (b - a) as f64;
                col[i] = col[a] + t * (col[b] - col[a]);
                filled += 1;
            }
        }
    }
    filled
}

fn reject_missing(table: &Table, path: &Path) -> Result<()> {
    if let Some(((i, j), _)) = table.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{}: missing value at row {} ('{}'), column '{}'; fill it upstream or pass --impute-linear for interior gaps",
            path.display(),
            i + 1,
            table.periods[i],
            table.names[j]
        )));
    }
    Ok(())
}

/// Writes `period,estimate`.
pub fn write_series(path: &Path, periods: &[String], z: ArrayView1<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["period", "estimate"])?;
    for (p, v) in periods.iter().zip(z.iter()) {
        wtr.write_record([p.as_str(), &v.to_string()])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Options of `disaggregate`, all optional so that a config file and
/// command-line flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DisaggregateOptions {
    pub low_freq: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub method: Option<Method>,
    pub ratio: Option<usize>,
    pub scheme: Option<AggregationKind>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_step: Option<f64>,
    pub cutoff: Option<f64>,
    pub standardize: Option<bool>,
    pub impute_linear: Option<bool>,
    pub out_series: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl DisaggregateOptions {
    /// Values set in `over` win.
    pub fn overlay(self, over: DisaggregateOptions) -> Self {
        DisaggregateOptions {
            low_freq: over.low_freq.or(self.low_freq),
            indicators: over.indicators.or(self.indicators),
            method: over.method.or(self.method),
            ratio: over.ratio.or(self.ratio),
            scheme: over.scheme.or(self.scheme),
            rho_min: over.rho_min.or(self.rho_min),
            rho_max: over.rho_max.or(self.rho_max),
            rho_step: over.rho_step.or(self.rho_step),
            cutoff: over.cutoff.or(self.cutoff),
            standardize: over.standardize.or(self.standardize),
            impute_linear: over.impute_linear.or(self.impute_linear),
            out_series: over.out_series.or(self.out_series),
            out_report: over.out_report.or(self.out_report),
            threads: over.threads.or(self.threads),
            seed: over.seed.or(self.seed),
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    /// Fills defaults and checks required fields.
    pub fn resolve(self) -> Result<DisaggregateConfig> {
        let need = |v: Option<PathBuf>, flag: &str| v.ok_or_else(|| Error::InvalidInput(format!("missing --{flag}")));
        let method = self.method.unwrap_or(Method::SptdRf);
        let ratio = self.ratio.ok_or_else(|| Error::InvalidInput("missing --ratio".into()))?;
        let cfg = DisaggregateConfig {
            low_freq: need(self.low_freq, "low-freq")?,
            indicators: need(self.indicators, "indicators")?,
            method,
            ratio,
            scheme: self.scheme.unwrap_or_default(),
            rho_min: self.rho_min.unwrap_or(0.01),
            rho_max: self.rho_max.unwrap_or(0.99),
            rho_step: self.rho_step.unwrap_or(0.01),
            cutoff: self.cutoff.unwrap_or(0.5),
            standardize: self.standardize.unwrap_or(method != Method::ChowLin),
            impute_linear: self.impute_linear.unwrap_or(false),
            out_series: need(self.out_series, "out-series")?,
            out_report: need(self.out_report, "out-report")?,
            threads: self.threads,
            seed: self.seed.unwrap_or(0),
        };
        cfg.grid()?;
        Ok(cfg)
    }
}

/// Fully resolved `disaggregate` settings; echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisaggregateConfig {
    pub low_freq: PathBuf,
    pub indicators: PathBuf,
    pub method: Method,
    pub ratio: usize,
    pub scheme: AggregationKind,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_step: f64,
    pub cutoff: f64,
    pub standardize: bool,
    pub impute_linear: bool,
    pub out_series: PathBuf,
    pub out_report: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
}

impl DisaggregateConfig {
    pub fn grid(&self) -> Result<RhoGrid> {
        if !(self.rho_min > -1.0 && self.rho_max < 1.0) {
            return Err(Error::InvalidInput(format!(
                "rho grid bounds must lie inside (-1, 1), got [{}, {}]",
                self.rho_min, self.rho_max
            )));
        }
        RhoGrid::from_bounds(self.rho_min, self.rho_max, self.rho_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Replaces the scenario's seed when set.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Disaggregate(DisaggregateConfig),
    Simulate(SimulateConfig),
}

/// One selected indicator in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub indicator: String,
    pub coefficient: f64,
}

/// JSON report written by `disaggregate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisaggReport {
    pub method: Method,
    pub rho_hat: f64,
    pub sigma2_hat: f64,
    pub lambda_hat: f64,
    pub lambda_penalty: f64,
    pub bic: f64,
    pub log_likelihood: f64,
    /// "standardized" or "original".
    pub coefficient_scale: &'static str,
    /// Nonzero coefficients, largest magnitude first.
    pub coefficients: Vec<CoefficientEntry>,
    pub n_low: usize,
    pub n_high: usize,
    pub n_indicators: usize,
    pub consistency_gap: f64,
    pub warnings: Vec<String>,
    pub scaling: Option<ScalingRecord>,
    pub config: DisaggregateConfig,
}

/// Nonzero coefficients sorted by |value| descending; equal magnitudes keep
/// column order.
pub fn sorted_coefficients(beta: ArrayView1<f64>, names: &[String]) -> Vec<CoefficientEntry> {
    let mut idx: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    idx.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    idx.into_iter()
        .map(|j| CoefficientEntry {
            indicator: names[j].clone(),
            coefficient: beta[j],
        })
        .collect()
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Disaggregate(Box<DisaggReport>),
    Simulate { rows: usize, notes: Vec<String> },
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(f)
        }
        None => f(),
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    match config {
        RunConfig::Disaggregate(cfg) => with_threads(cfg.threads, || run_disaggregate(cfg)),
        RunConfig::Simulate(cfg) => with_threads(cfg.threads, || run_simulate(cfg)),
    }
}

fn load_inputs(cfg: &DisaggregateConfig) -> Result<(Table, LowFreqSeries, IndicatorPanel, Vec<String>)> {
    let mut low = read_table(&cfg.low_freq)?;
    let mut ind = read_table(&cfg.indicators)?;
    let mut warnings = Vec::new();
    if low.names.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "{}: expected columns period,value, found {} value columns",
            cfg.low_freq.display(),
            low.names.len()
        )));
    }
    if cfg.impute_linear {
        let a = impute_linear(&mut low.values);
        let b = impute_linear(&mut ind.values);
        if a + b > 0 {
            warnings.push(format!("imputed {a} low-frequency and {b} indicator cells by linear interpolation"));
        }
    }
    reject_missing(&low, &cfg.low_freq)?;
    reject_missing(&ind, &cfg.indicators)?;
    let y = LowFreqSeries::new(low.values.column(0).to_owned(), low.names[0].clone())?;
    let x = IndicatorPanel::new(ind.values.clone(), ind.names.clone())?;
    Ok((ind, y, x, warnings))
}

fn run_disaggregate(cfg: &DisaggregateConfig) -> Result<RunOutcome> {
    let (ind, y, x, mut warnings) = load_inputs(cfg)?;
    let scheme = AggregationScheme::new(cfg.scheme, cfg.ratio, y.len())?;
    if x.nrows() != scheme.m() {
        return Err(Error::DimensionMismatch(format!(
            "indicator file has {} rows but {} low-frequency values × ratio {} = {}",
            x.nrows(),
            y.len(),
            cfg.ratio,
            scheme.m()
        )));
    }
    let (y_fit, x_fit, scaling) = if cfg.standardize {
        let (ys, xs, rec) = standardize_panel(&y, &x, &scheme)?;
        if cfg.ratio != 3 && scheme.kind == AggregationKind::Sum {
            warnings.push(format!(
                "back-transformation adds mean(y)/{} per period (the mean divided by the aggregation ratio)",
                cfg.ratio
            ));
        }
        (ys, xs, Some(rec))
    } else {
        (y.clone(), x.clone(), None)
    };
    let grid = cfg.grid()?;
    let result: DisaggResult = match cfg.method {
        Method::ChowLin => chowlin_fit(&y_fit, &x_fit, &ChowLinConfig::new(scheme).with_grid(grid))?,
        m => {
            let mut sc = SptdConfig::new(scheme)
                .with_grid(grid)
                .with_cutoff(cfg.cutoff)
                .with_refit(m != Method::Sptd);
            sc.adaptive = m == Method::Adaptive;
            if sc.adaptive {
                adaptive_fit(&y_fit, &x_fit, &sc)?
            } else {
                sptd_fit(&y_fit, &x_fit, &sc)?
            }
        }
    };
    let z = match &scaling {
        Some(rec) => rescale_estimate(result.z.view(), Some(rec))?,
        None => result.z.clone(),
    };
    let c = build_aggregation_matrix(&scheme)?;
    let gap = consistency_gap(&c, z.view(), y.values.view())?;
    warnings.extend(result.warnings.iter().cloned());

    write_series(&cfg.out_series, &ind.periods, z.view())?;
    let report = DisaggReport {
        method: result.method,
        rho_hat: result.rho_hat,
        sigma2_hat: result.sigma2_hat,
        lambda_hat: result.lambda_hat,
        lambda_penalty: result.lambda_penalty,
        bic: result.bic,
        log_likelihood: result.log_likelihood,
        coefficient_scale: if scaling.is_some() { "standardized" } else { "original" },
        coefficients: sorted_coefficients(result.beta.view(), &x.names),
        n_low: y.len(),
        n_high: x.nrows(),
        n_indicators: x.ncols(),
        consistency_gap: gap,
        warnings,
        scaling,
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&cfg.out_report, json + "\n").map_err(|e| Error::Io(format!("{}: {e}", cfg.out_report.display())))?;
    Ok(RunOutcome::Disaggregate(Box::new(report)))
}

fn run_simulate(cfg: &SimulateConfig) -> Result<RunOutcome> {
    let text = fs::read_to_string(&cfg.scenario).map_err(|e| Error::Io(format!("{}: {e}", cfg.scenario.display())))?;
    let mut scenario = Scenario::from_toml(&text)?;
    if let Some(seed) = cfg.seed {
        scenario.seed = seed;
    }
    let arms = scenario.arms.clone();
    let report = run_experiment(&scenario, &arms)?;
    fs::write(&cfg.out, report.to_text()).map_err(|e| Error::Io(format!("{}: {e}", cfg.out.display())))?;
    Ok(RunOutcome::Simulate {
        rows: report.rows.len(),
        notes: report.notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scheme(s: usize, n: usize) -> AggregationScheme {
        AggregationScheme::sum(s, n).unwrap()
    }

    #[test]
    fn rescale_examples() {
        let rec = |mean: f64, sd: f64, s: f64| ScalingRecord {
            y_mean: mean,
            y_sd: sd,
            x_means: vec![],
            x_sds: vec![],
            mean_divisor: s,
        };
        let z = rescale_estimate(array![0.0, 0.0, 0.0].view(), Some(&rec(300.0, 5.0, 3.0))).unwrap();
        assert_eq!(z, array![100.0, 100.0, 100.0]);
        let z = rescale_estimate(array![1.5, -2.0].view(), Some(&rec(0.0, 1.0, 4.0))).unwrap();
        assert_eq!(z, array![1.5, -2.0]);
        let z = rescale_estimate(array![1.0].view(), Some(&rec(30.0, 2.0, 3.0))).unwrap();
        assert_eq!(z, array![12.0]);
        assert!(rescale_estimate(array![1.0].view(), None).is_err());
    }

    #[test]
    fn standardize_round_trip() {
        let col: Vec<f64> = vec![8.0, 12.0, 8.0, 12.0, 10.0, 10.0];
        let x = IndicatorPanel::unnamed(Array2::from_shape_vec((6, 1), col).unwrap()).unwrap();
        let y = LowFreqSeries::new(array![1.0, 2.0, 4.0], "y").unwrap();
        let (_, xs, rec) = standardize_panel(&y, &x, &scheme(2, 3)).unwrap();
        let (m, sd) = mean_sd(xs.values.column(0));
        assert!(m.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
        let back = unstandardize_indicators(&xs.values, &rec);
        for (a, b) in back.iter().zip(x.values.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_column_named() {
        let x = IndicatorPanel::new(Array2::from_elem((4, 1), 3.0), vec!["flat".into()]).unwrap();
        let y = LowFreqSeries::new(array![1.0, 2.0], "y").unwrap();
        let err = standardize_panel(&y, &x, &scheme(2, 2)).unwrap_err();
        assert!(err.to_string().contains("'flat'"));
    }

    #[test]
    fn interior_gaps_only() {
        let mut v = array![[f64::NAN, 1.0], [2.0, f64::NAN], [f64::NAN, f64::NAN], [8.0, 7.0]];
        assert_eq!(impute_linear(&mut v), 3);
        assert!(v[[0, 0]].is_nan());
        assert_eq!(v[[2, 0]], 5.0);
        assert_eq!(v[[1, 1]], 3.0);
        assert_eq!(v[[2, 1]], 5.0);
    }

    #[test]
    fn coefficient_order() {
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let got = sorted_coefficients(array![0.5, 0.0, -2.0, 0.5].view(), &names);
        let order: Vec<&str> = got.iter().map(|c| c.indicator.as_str()).collect();
        assert_eq!(order, vec!["c", "a", "d"]);
    }

    #[test]
    fn flags_override_config() {
        let file = DisaggregateOptions {
            ratio: Some(3),
            cutoff: Some(0.4),
            ..Default::default()
        };
        let flags = DisaggregateOptions {
            ratio: Some(4),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.ratio, Some(4));
        assert_eq!(merged.cutoff, Some(0.4));
    }
}
