// Two-stage adaptive fit on a correlated design where plain lasso
// selection tends to pick up spurious indicators.
//
// ```bash
// cargo run --release --example adaptive_lasso
// ```

use sptd::simlab::{
    design_correlation, evaluate_fit, generate_instance, irrepresentable_statistic, BetaSpec, Design, Scenario,
};
use sptd::sptd::{adaptive_fit, sptd_fit, SptdConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let design = Design::RandomCov { seed: 3, factor_dim: None };
    let scenario = Scenario::new(100, 90, 0.5, design, BetaSpec::AlternatingSigns, 1, 5);
    let beta = scenario.beta_spec.build(scenario.p)?;
    if let Some(r) = design_correlation(&design, scenario.p) {
        println!("irrepresentable statistic = {:.4}", irrepresentable_statistic(&r, &beta)?);
    }

    let inst = generate_instance(&scenario, 0)?;
    let cfg = SptdConfig::new(scenario.scheme()?);
    for (label, res) in [
        ("sptd-rf", sptd_fit(&inst.y, &inst.x, &cfg)?),
        ("adaptive", adaptive_fit(&inst.y, &inst.x, &cfg)?),
    ] {
        let m = evaluate_fit(&res, &inst.z_true, &inst.beta_true)?;
        println!(
            "{label:<9} k={:<3} fp={} fn={} exact={} rmse_z={:.4}",
            res.active_set.len(),
            m.fp,
            m.fn_,
            m.exact_support,
            m.rmse_z
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
