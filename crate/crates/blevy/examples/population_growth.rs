//! Monte Carlo check of population growth: the mean live count must track
//! `exp(lambda_hat t)` and its second moment the two-term exponential form,
//! both within a few standard errors.

use blevy::oracle::{expected_population, population_second_moment};
use blevy::presets;
use blevy::stats::run_replicates;

fn main() {
    let config = presets::preset("generation").expect("bundled preset");
    let dc = config.derived_constants().expect("valid preset");
    let checkpoints = [1.0, 2.0, 4.0];
    let results =
        run_replicates(&config, &checkpoints, 20_000, 1 << 20, 2024).expect("simulation runs");

    println!(
        "{:>4} {:>12} {:>12} {:>8} {:>14} {:>14} {:>8}",
        "t", "mean", "exp(t)", "z", "2nd moment", "oracle", "z"
    );
    for (k, &t) in checkpoints.iter().enumerate() {
        let pops: Vec<f64> = results
            .iter()
            .map(|r| r.rows[k].as_ref().expect("uncapped").pop as f64)
            .collect();
        let n = pops.len() as f64;
        let mean = pops.iter().sum::<f64>() / n;
        let sq_mean = pops.iter().map(|p| p * p).sum::<f64>() / n;
        let se = ((pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)) / n).sqrt();
        let se2 =
            ((pops.iter().map(|p| (p * p - sq_mean).powi(2)).sum::<f64>() / (n - 1.0)) / n).sqrt();
        let o1 = expected_population(&dc, t);
        let o2 = population_second_moment(&dc, t);
        println!(
            "{:>4} {:>12.4} {:>12.4} {:>8.2} {:>14.2} {:>14.2} {:>8.2}",
            t,
            mean,
            o1,
            (mean - o1) / se,
            sq_mean,
            o2,
            (sq_mean - o2) / se2
        );
    }
}
