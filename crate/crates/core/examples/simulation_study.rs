// A small reproducible Monte-Carlo comparison of Chow-Lin and the sparse
// estimators, written in the same text format as `sptd simulate`.
//
// ```bash
// cargo run --release --example simulation_study
// ```

use sptd::simlab::{run_experiment, Scenario};

const SCENARIO: &str = r#"
name = "iid-p30"
n = 40
p = 30
rho_true = 0.5
replicates = 4
seed = 2024
design = { kind = "iid_normal" }
beta = "ten_fives"
arms = ["chowlin", "sptd", "sptd-rf"]
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::from_toml(SCENARIO)?;
    let arms = scenario.arms.clone();
    let a = run_experiment(&scenario, &arms)?;
    let b = run_experiment(&scenario, &arms)?;
    assert_eq!(a.to_text(), b.to_text());
    print!("{}", a.to_text());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
