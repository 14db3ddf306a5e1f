//! On surviving runs the empirical mean position, recentered by `r t`,
//! settles to a run-specific limit. The example tracks the deviation along
//! a checkpoint grid and summarizes how fast consecutive values contract.

use blevy::presets;
use blevy::sim::{simulate_surviving, SeedRecord};
use blevy::stats::convergence_trace;

fn main() {
    let config = presets::preset("generation").expect("bundled preset");
    let checkpoints = [2.0, 4.0, 6.0, 8.0, 10.0];
    let n_runs = 200;

    let runs: Vec<_> = (0..n_runs)
        .map(|i| {
            simulate_surviving(
                &config,
                &checkpoints,
                1 << 20,
                10_000,
                SeedRecord::new(606, i),
            )
            .expect("retry budget")
            .run
        })
        .collect();
    let report = convergence_trace(&runs).expect("surviving runs");

    println!("first three runs, deviation of the empirical mean from r t:");
    for (i, trace) in report.traces.iter().take(3).enumerate() {
        let cells: Vec<String> = trace.iter().map(|y| format!("{y:+.4}")).collect();
        println!("  run {i}: {}", cells.join("  "));
    }
    println!();
    let medians = report.gap_medians.as_ref().expect("many runs");
    for (k, median) in medians.iter().enumerate() {
        println!(
            "gap ({} -> {}] median |dY| = {:.5}",
            report.checkpoints[k],
            report.checkpoints[k + 1],
            median
        );
    }
    println!();
    println!(
        "medians strictly decreasing: {}",
        report.medians_strictly_decreasing.expect("many runs")
    );
    println!(
        "runs whose final gap is below half their first: {:.1}%",
        100.0 * report.frac_final_gap_below_half_first
    );
}
