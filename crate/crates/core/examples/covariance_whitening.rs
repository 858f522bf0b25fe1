// AR(1) covariance of a high-frequency error, its aggregate, and the
// whitening transform that turns aggregated GLS into ordinary least squares.
//
// ```bash
// cargo run --example covariance_whitening
// ```

use ndarray::Array2;
use sptd::covariance::{aggregate_covariance, ar1_covariance, Ar1Model, Whitener};
use sptd::disagg::{build_aggregation_matrix, AggregationScheme};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scheme = AggregationScheme::sum(3, 4)?;
    let model = Ar1Model::new(0.6, 1.0, scheme.m())?;
    let pair = ar1_covariance(&model)?;
    println!("V[0][0..3] = {:.4}", pair.v.row(0).slice(ndarray::s![..3]));

    let c = build_aggregation_matrix(&scheme)?;
    let sigma = aggregate_covariance(&pair, &c)?;
    println!("aggregated covariance ({}x{}):\n{:.4}", sigma.nrows(), sigma.ncols(), sigma);

    let w = Whitener::new(sigma.view())?;
    let l_inv = w.matrix();
    let white = l_inv.dot(&sigma).dot(&l_inv.t());
    let err = (&white - &Array2::<f64>::eye(sigma.nrows())).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    println!("max |L^-1 Σ L^-T - I| = {err:.2e}, log det Σ = {:.4}", w.log_det());
    assert!(err < 1e-10);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
