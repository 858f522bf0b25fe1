mod common;

use std::f64::consts::PI;

use common::*;
use ndarray::{Array1, Array2};
use sptd::disagg::{AggregationScheme, IndicatorPanel, LowFreqSeries, Method};
use sptd::gls::WhitenedProblem;
use sptd::sptd::{bic_score, select_on_path, sptd_fit, RhoGrid, SptdConfig};
use sptd::ErrorCategory;

#[test]
fn null_model_bic_closed_form() {
    let mut r = rng(1);
    let y = normal_vector(&mut r, 30);
    let x = normal_matrix(&mut r, 30, 4);
    let log_det = 1.7;
    let problem = WhitenedProblem::from_parts(y.clone(), x, log_det).unwrap();
    let score = bic_score(&problem, Array1::zeros(4).view()).unwrap();
    let n = 30.0;
    let s2 = y.dot(&y) / n;
    let expected = n * (2.0 * PI * s2).ln() + log_det + n;
    assert_eq!(score.k, 0);
    assert!((score.sigma2 - s2).abs() < 1e-14);
    assert!((score.bic - expected).abs() < 1e-10 * expected.abs());
}

#[test]
fn bic_uses_degrees_of_freedom_correction() {
    let mut r = rng(2);
    let y = normal_vector(&mut r, 25);
    let x = normal_matrix(&mut r, 25, 5);
    let problem = WhitenedProblem::from_parts(y.clone(), x.clone(), 0.0).unwrap();
    let beta = Array1::from(vec![0.3, 0.0, -0.2, 0.0, 0.0]);
    let resid = &y - &x.dot(&beta);
    let rss = resid.dot(&resid);
    let s2 = rss / 23.0;
    let ll = -12.5 * (2.0 * PI * s2).ln() - rss / (2.0 * s2);
    let score = bic_score(&problem, beta.view()).unwrap();
    assert_eq!(score.k, 2);
    assert!((score.log_likelihood - ll).abs() < 1e-10);
    assert!((score.bic - (-2.0 * ll + 25f64.ln() * 2.0)).abs() < 1e-10);
}

#[test]
fn bic_rejects_saturated_support() {
    let problem = WhitenedProblem::from_parts(Array1::ones(3), Array2::eye(3), 0.0).unwrap();
    let err = bic_score(&problem, Array1::ones(3).view()).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Rank);
}

#[test]
fn refit_recovers_noiseless_sparse_signal() {
    let mut r = rng(3);
    let x = normal_matrix(&mut r, 60, 20);
    let mut beta = Array1::zeros(20);
    beta[2] = 4.0;
    beta[11] = -3.0;
    beta[17] = 2.5;
    let y = x.dot(&beta) + normal_vector(&mut r, 60) * 1e-3;
    let problem = WhitenedProblem::from_parts(y, x, 0.0).unwrap();
    let fit = select_on_path(&problem, true, 0.5, None).unwrap();
    let support: Vec<usize> = (0..20).filter(|&j| fit.beta[j] != 0.0).collect();
    assert!([2, 11, 17].iter().all(|j| support.contains(j)), "{support:?}");
    assert!(support.len() <= 5, "{support:?}");
    assert!(max_abs_diff(fit.beta.view(), beta.view()) < 1e-2);
}

#[test]
fn zero_indicator_named_in_error() {
    let mut r = rng(4);
    let mut x = normal_matrix(&mut r, 40, 3);
    x.column_mut(1).fill(0.0);
    let panel = IndicatorPanel::new(x, vec!["a".into(), "dead".into(), "c".into()]).unwrap();
    let y = LowFreqSeries::new(normal_vector(&mut r, 10), "y").unwrap();
    let err = sptd_fit(&y, &panel, &SptdConfig::new(AggregationScheme::sum(4, 10).unwrap())).unwrap_err();
    assert!(err.to_string().contains("dead"), "{err}");
}

#[test]
fn profile_covers_grid_and_picks_minimum() {
    let mut r = rng(5);
    let x = normal_matrix(&mut r, 120, 8);
    let mut beta = Array1::zeros(8);
    beta[0] = 2.0;
    beta[5] = -1.0;
    let scheme = AggregationScheme::sum(4, 30).unwrap();
    let c = dense_sum_aggregation(4, 30);
    let y = c.dot(&(x.dot(&beta) + normal_vector(&mut r, 120)));
    let grid = RhoGrid::from_bounds(0.1, 0.9, 0.1).unwrap();
    let res = sptd_fit(
        &LowFreqSeries::new(y, "y").unwrap(),
        &IndicatorPanel::unnamed(x).unwrap(),
        &SptdConfig::new(scheme).with_grid(grid.clone()),
    )
    .unwrap();
    assert_eq!(res.method, Method::SptdRf);
    assert_eq!(res.profile.records.len(), grid.len());
    let min = res.profile.records.iter().map(|r| r.bic).fold(f64::INFINITY, f64::min);
    assert_eq!(res.bic, min);
    assert!((res.lambda_penalty - 2.0 * res.lambda_hat).abs() < 1e-12);
}
