// Writes a quarterly indicator panel and its annual totals to CSV, runs the
// `disaggregate` command in-process, and reads the JSON report back.
//
// ```bash
// cargo run --example csv_round_trip
// ```

use std::fmt::Write as _;
use std::fs;

use sptd::cli::{run, DisaggregateOptions, RunConfig, RunOutcome};
use sptd::disagg::Method;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("sptd-csv-example-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let (n, s) = (24, 4);

    let mut ind = String::from("period,retail,energy,noise\n");
    let mut z = Vec::new();
    for t in 0..n * s {
        let tf = t as f64;
        let retail = 100.0 + 0.5 * tf + 3.0 * (tf * 0.7).sin();
        let energy = 50.0 + 4.0 * (tf * 0.31).cos();
        let noise = ((t * 37) % 11) as f64;
        z.push(2.0 * retail - 1.5 * energy);
        writeln!(ind, "{}Q{},{retail},{energy},{noise}", 2000 + t / s, t % s + 1)?;
    }
    let mut low = String::from("period,value\n");
    for (i, chunk) in z.chunks(s).enumerate() {
        writeln!(low, "{},{}", 2000 + i, chunk.iter().sum::<f64>())?;
    }
    fs::write(dir.join("low.csv"), low)?;
    fs::write(dir.join("ind.csv"), ind)?;

    let opts = DisaggregateOptions {
        low_freq: Some(dir.join("low.csv")),
        indicators: Some(dir.join("ind.csv")),
        method: Some(Method::ChowLin),
        ratio: Some(s),
        out_series: Some(dir.join("series.csv")),
        out_report: Some(dir.join("report.json")),
        ..Default::default()
    };
    let outcome = run(&RunConfig::Disaggregate(opts.resolve()?))?;
    if let RunOutcome::Disaggregate(report) = outcome {
        for c in &report.coefficients {
            println!("{:<8} {:>9.4}", c.indicator, c.coefficient);
        }
        println!("consistency gap {:.2e}", report.consistency_gap);
    }
    let series = fs::read_to_string(dir.join("series.csv"))?;
    println!("{}", series.lines().take(5).collect::<Vec<_>>().join("\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
    println!("report rho_hat = {}", json["rho_hat"]);
    fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
