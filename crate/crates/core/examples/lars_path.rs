// Full LARS-lasso path on a small regression with two true predictors.
//
// ```bash
// cargo run --example lars_path
// ```

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sptd::lars::{coefficients_at, default_max_steps, lars_path};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (40, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>() - 0.5);
    let noise = Array1::from_shape_fn(n, |_| 0.05 * (rng.random::<f64>() - 0.5));
    let y = 3.0 * &x.column(1) - 2.0 * &x.column(4) + noise;

    let path = lars_path(y.view(), x.view(), default_max_steps(n, p))?;
    println!("{:>4} {:>10} {:>9}  active", "step", "lambda", "action");
    for (k, step) in path.steps.iter().enumerate() {
        println!("{k:>4} {:>10.5} {:>9}  {:?}", step.lambda, format!("{:?}", step.action), step.active_set);
    }
    let first = &path.steps[1].active_set;
    assert!(first[0] == 1 || first[0] == 4);

    let (beta, note) = coefficients_at(&path, 0.5 * path.steps[1].lambda);
    println!("beta at half the first breakpoint: {beta:.3}");
    if let Some(n) = note {
        println!("note: {n}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
