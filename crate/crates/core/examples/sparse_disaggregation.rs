// Sparse disaggregation with 90 indicators and 100 annual observations,
// with and without the least-squares refit on the selected support.
//
// ```bash
// cargo run --release --example sparse_disaggregation
// ```

use sptd::disagg::{build_aggregation_matrix, consistency_gap};
use sptd::simlab::{evaluate_fit, generate_instance, BetaSpec, Design, Scenario};
use sptd::sptd::{sptd_fit, SptdConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::new(100, 90, 0.5, Design::IidNormal, BetaSpec::TenFives, 1, 3);
    let inst = generate_instance(&scenario, 0)?;
    let scheme = scenario.scheme()?;
    let c = build_aggregation_matrix(&scheme)?;

    for refit in [false, true] {
        let cfg = SptdConfig::new(scheme).with_refit(refit);
        let res = sptd_fit(&inst.y, &inst.x, &cfg)?;
        let m = evaluate_fit(&res, &inst.z_true, &inst.beta_true)?;
        let gap = consistency_gap(&c, res.z.view(), inst.y.values.view())?;
        println!(
            "{:<8} rho={:.2} k={:<3} rmse_z={:.4} rmse_beta={:.4} fp={} fn={} gap={gap:.1e}",
            res.method, res.rho_hat, res.active_set.len(), m.rmse_z, m.rmse_beta, m.fp, m.fn_
        );
        let selected: Vec<String> = res.active_set.iter().map(|&j| format!("{j}:{:.2}", res.beta[j])).collect();
        println!("         support {}", selected.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
