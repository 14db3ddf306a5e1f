//! Runs the full verification pipeline on one preset: replicates, the
//! z-scored cell table for the centered position sum and its companions,
//! and the overall verdict.

use blevy::oracle::MomentVariant;
use blevy::presets;
use blevy::stats::{run_replicates, summarize, VerdictThresholds};

fn main() {
    let config = presets::preset("cancer-poisson").expect("bundled preset");
    let dc = config.derived_constants().expect("valid preset");
    let results =
        run_replicates(&config, &[1.0, 2.0, 4.0], 20_000, 1 << 20, 7).expect("simulation runs");
    let summary = summarize(
        &results,
        &dc,
        MomentVariant::Paper,
        VerdictThresholds::default(),
    )
    .expect("enough replicates");

    println!(
        "{:>4} {:<15} {:>14} {:>14} {:>7} verdict",
        "t", "observable", "estimate", "oracle", "z"
    );
    for cell in &summary.cells {
        let oracle = cell
            .oracle
            .map(|o| format!("{o:.4}"))
            .unwrap_or_else(|| "-".into());
        let z = cell
            .z_score
            .map(|z| format!("{z:+.2}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:>4} {:<15} {:>14.4} {:>14} {:>7} {}",
            cell.t,
            cell.observable.label(),
            cell.estimate,
            oracle,
            z,
            cell.verdict.label()
        );
    }
    println!();
    println!("all gated cells pass: {}", summary.passed());
}
