mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use ndarray::Array1;
use proptest::prelude::*;
use sptd::cli::{rescale_estimate, standardize_panel, unstandardize_indicators};
use sptd::disagg::{AggregationScheme, IndicatorPanel, LowFreqSeries};

fn sptd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sptd")).current_dir(dir).args(args).output().unwrap()
}

/// Writes `low.csv` and `ind.csv` with `z = Xβ` exactly, summed over `s`.
fn write_noiseless(dir: &Path, n: usize, s: usize, p: usize, beta: &[f64]) -> Vec<f64> {
    let mut r = rng(17);
    let x = normal_matrix(&mut r, n * s, p);
    let z = x.dot(&Array1::from(beta.to_vec()));
    let mut ind = String::from("period");
    for j in 0..p {
        write!(ind, ",x{j}").unwrap();
    }
    ind.push('\n');
    for t in 0..n * s {
        write!(ind, "t{t}").unwrap();
        for j in 0..p {
            write!(ind, ",{}", x[[t, j]]).unwrap();
        }
        ind.push('\n');
    }
    let mut low = String::from("period,value\n");
    for i in 0..n {
        let y: f64 = z.slice(ndarray::s![i * s..(i + 1) * s]).sum();
        writeln!(low, "y{i},{y}").unwrap();
    }
    fs::write(dir.join("low.csv"), low).unwrap();
    fs::write(dir.join("ind.csv"), ind).unwrap();
    z.to_vec()
}

fn read_series(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("period,estimate"));
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

const BASE: [&str; 8] = [
    "disaggregate",
    "--low-freq",
    "low.csv",
    "--indicators",
    "ind.csv",
    "--out-series",
    "series.csv",
    "--out-report",
];

#[test]
fn chowlin_high_dimensional_exits_with_rank_error() {
    let dir = tempfile::tempdir().unwrap();
    write_noiseless(dir.path(), 10, 4, 12, &[1.0; 12]);
    let mut args = BASE.to_vec();
    args.extend(["report.json", "--ratio", "4", "--method", "chowlin"]);
    let out = sptd(&args, dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error[rank]"), "{stderr}");
    assert!(stderr.contains("not applicable in high dimensions"), "{stderr}");
}

#[test]
fn noiseless_round_trip_recovers_series() {
    let dir = tempfile::tempdir().unwrap();
    let beta = [2.0, 0.0, -1.5, 0.0, 0.0, 3.0];
    let z = write_noiseless(dir.path(), 40, 4, 6, &beta);
    for method in ["chowlin", "sptd-rf"] {
        let mut args = BASE.to_vec();
        args.extend(["report.json", "--ratio", "4", "--method", method]);
        let out = sptd(&args, dir.path());
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let est = read_series(&dir.path().join("series.csv"));
        let err = est.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{method}: max error {err}");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["method"], method);
        assert!(report["consistency_gap"].as_f64().unwrap() < 1e-8);
        assert_eq!(report["n_low"], 40);
        assert_eq!(report["n_high"], 160);
    }
}

#[test]
fn report_lists_coefficients_by_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    write_noiseless(dir.path(), 40, 4, 6, &[2.0, 0.0, -1.5, 0.0, 0.0, 3.0]);
    let mut args = BASE.to_vec();
    args.extend(["report.json", "--ratio", "4", "--method", "sptd-rf", "--no-standardize"]);
    assert!(sptd(&args, dir.path()).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["indicator"].as_str().unwrap())
        .collect();
    assert_eq!(names, vec!["x5", "x0", "x2"]);
    assert_eq!(report["coefficient_scale"], "original");
    assert!((report["lambda_penalty"].as_f64().unwrap() - 2.0 * report["lambda_hat"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn missing_cell_reported_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    write_noiseless(dir.path(), 10, 2, 2, &[1.0, 1.0]);
    let path = dir.path().join("ind.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[4].split(',').map(String::from).collect();
    cells[2] = "NA".into();
    lines[4] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let mut args = BASE.to_vec();
    args.extend(["report.json", "--ratio", "2"]);
    let out = sptd(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 4") && stderr.contains("'x1'"), "{stderr}");

    args.push("--impute-linear");
    let out = sptd(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    write_noiseless(dir.path(), 30, 3, 4, &[1.0, 0.0, 2.0, 0.0]);
    fs::write(
        dir.path().join("run.toml"),
        "low-freq = \"low.csv\"\nindicators = \"ind.csv\"\nratio = 3\nmethod = \"chowlin\"\n\
         rho-min = 0.2\nrho-max = 0.4\nrho-step = 0.1\nout-series = \"series.csv\"\nout-report = \"report.json\"\n",
    )
    .unwrap();
    let out = sptd(&["disaggregate", "--config", "run.toml", "--method", "sptd"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "sptd");
    assert_eq!(report["config"]["ratio"], 3);
    assert_eq!(report["config"]["rho_max"], 0.4);
    assert_eq!(report["config"]["standardize"], true);
}

#[test]
fn dimension_mismatch_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_noiseless(dir.path(), 10, 4, 2, &[1.0, 1.0]);
    let mut args = BASE.to_vec();
    args.extend(["report.json", "--ratio", "3"]);
    let out = sptd(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[input]"));
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cell.toml"),
        "n = 20\np = 12\nrho_true = 0.4\nreplicates = 3\nseed = 5\ndesign = { kind = \"iid_normal\" }\nbeta = \"ten_fives\"\n",
    )
    .unwrap();
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["simulate", "--scenario", "cell.toml", "--out", out];
        args.extend(extra);
        let o = sptd(&args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("a.txt", &[]);
    let b = run("b.txt", &["--threads", "2"]);
    let c = run("c.txt", &["--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("replicate,arm,rmse_z,rmse_beta,linf_beta,fp,fn,rho_hat,exact_support"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standardization_round_trip(seed in 0u64..10_000, mean in -50.0f64..50.0, sd in 0.1f64..20.0) {
        let mut r = rng(seed);
        let x = normal_matrix(&mut r, 24, 3) * sd + mean;
        let y = normal_vector(&mut r, 6) * sd + mean;
        let scheme = AggregationScheme::sum(4, 6).unwrap();
        let (ys, xs, rec) = standardize_panel(
            &LowFreqSeries::new(y.clone(), "y").unwrap(),
            &IndicatorPanel::unnamed(x.clone()).unwrap(),
            &scheme,
        ).unwrap();
        let back = unstandardize_indicators(&xs.values, &rec);
        prop_assert!(max_abs_diff_mat(back.view(), x.view()) < 1e-9 * (1.0 + mean.abs() + sd));
        prop_assert!(ys.values.sum().abs() < 1e-9);
        // A standardized series at zero maps to the per-period share of the mean.
        let z = rescale_estimate(Array1::zeros(24).view(), Some(&rec)).unwrap();
        prop_assert!((z[0] - rec.y_mean / 4.0).abs() < 1e-12);
    }
}
