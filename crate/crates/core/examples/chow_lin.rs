// Classical Chow-Lin on a low-dimensional problem, and the error it raises
// once indicators outnumber observations.
//
// ```bash
// cargo run --example chow_lin
// ```

use sptd::chowlin::{chowlin_fit, ChowLinConfig};
use sptd::simlab::{generate_instance, BetaSpec, Design, Scenario};
use sptd::ErrorCategory;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::new(100, 10, 0.5, Design::IidNormal, BetaSpec::TenFives, 1, 11);
    let inst = generate_instance(&scenario, 0)?;
    let res = chowlin_fit(&inst.y, &inst.x, &ChowLinConfig::new(scenario.scheme()?))?;
    println!("rho_hat = {:.2}, sigma2_hat = {:.4}", res.rho_hat, res.sigma2_hat);
    println!("beta_hat = {:.3}", res.beta);
    let rmse = ((&res.z - &inst.z_true).mapv(|d| d * d).mean().unwrap_or(0.0)).sqrt();
    println!("rmse(z) = {rmse:.4}");

    let wide = Scenario::new(100, 150, 0.5, Design::IidNormal, BetaSpec::TenFives, 1, 11);
    let inst = generate_instance(&wide, 0)?;
    let err = chowlin_fit(&inst.y, &inst.x, &ChowLinConfig::new(wide.scheme()?)).unwrap_err();
    println!("p = 150: {err}");
    assert_eq!(err.category(), ErrorCategory::Rank);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
