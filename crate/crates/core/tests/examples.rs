macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(covariance_whitening, "covariance_whitening.rs");
example!(lars_path, "lars_path.rs");
example!(chow_lin, "chow_lin.rs");
example!(sparse_disaggregation, "sparse_disaggregation.rs");
example!(adaptive_lasso, "adaptive_lasso.rs");
example!(simulation_study, "simulation_study.rs");
example!(csv_round_trip, "csv_round_trip.rs");

#[test]
fn covariance_whitening_runs() {
    covariance_whitening::run_example().expect("covariance example should run");
}

#[test]
fn lars_path_runs() {
    lars_path::run_example().expect("lars example should run");
}

#[test]
fn chow_lin_runs() {
    chow_lin::run_example().expect("chow-lin example should run");
}

#[test]
fn sparse_disaggregation_runs() {
    sparse_disaggregation::run_example().expect("sparse example should run");
}

#[test]
fn adaptive_lasso_runs() {
    adaptive_lasso::run_example().expect("adaptive example should run");
}

#[test]
fn simulation_study_runs() {
    simulation_study::run_example().expect("simulation example should run");
}

#[test]
fn csv_round_trip_runs() {
    csv_round_trip::run_example().expect("csv example should run");
}
