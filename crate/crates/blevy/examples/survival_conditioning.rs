//! Conditioning on survival: with offspring 0-or-2 the process dies out a
//! quarter of the time. The example compares the observed surviving fraction
//! with the extinction fixed point and shows the retry cost of rejection
//! sampling survival-conditioned runs.

use blevy::presets;
use blevy::sim::{simulate_surviving, SeedRecord};
use blevy::stats::run_replicates;

fn main() {
    let config = presets::preset("twopoint").expect("bundled preset");
    let dc = config.derived_constants().expect("valid preset");
    let horizon = 8.0;
    let replicates = 50_000;

    let results = run_replicates(&config, &[horizon], replicates, 1 << 20, 404).expect("runs");
    let survived = results.iter().filter(|r| r.survived).count();
    let frac = survived as f64 / replicates as f64;
    let se = (frac * (1.0 - frac) / replicates as f64).sqrt();
    println!("extinction fixed point: q = {}", dc.q_ext);
    println!(
        "alive at t = {horizon}: {survived}/{replicates} = {frac:.4} (se {se:.4}), 1 - q = {:.4}",
        1.0 - dc.q_ext
    );

    let n = 5000;
    let mut attempts_total = 0u64;
    for i in 0..n {
        let survivor = simulate_surviving(
            &config,
            &[horizon],
            1 << 20,
            10_000,
            SeedRecord::new(505, i),
        )
        .expect("retry budget");
        attempts_total += u64::from(survivor.attempts);
    }
    let mean_attempts = attempts_total as f64 / n as f64;
    println!();
    println!("rejection sampling {n} surviving runs took {mean_attempts:.4} attempts each");
    println!(
        "geometric prediction 1/(1-q) = {:.4}",
        1.0 / (1.0 - dc.q_ext)
    );
}
