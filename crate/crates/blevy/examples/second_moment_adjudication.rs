//! The two closed forms for `E[S_t^2]` disagree exactly when the particle
//! motion has variance. This example settles which one is right on the
//! smallest disagreeing model (pure Brownian motion) using two independent
//! referees: a numerical integration of the moment system, and Monte Carlo.

use blevy::oracle::{brute_force_second_moment, centered_sum_second_moment, MomentVariant};
use blevy::presets;
use blevy::stats::run_replicates;

fn main() {
    let config = presets::preset("brownian-only").expect("bundled preset");
    let dc = config.derived_constants().expect("valid preset");
    let t = 1.0;

    let paper = centered_sum_second_moment(&dc, t, MomentVariant::Paper);
    let corrected = centered_sum_second_moment(&dc, t, MomentVariant::Corrected);
    let brute = brute_force_second_moment(&config, t, 4000);

    println!("E[S_t^2] at t = {t} for binary branching Brownian motion:");
    println!("  paper variant      {paper:.9}");
    println!("  corrected variant  {corrected:.9}");
    println!("  ODE integration    {brute:.9}");

    let results = run_replicates(&config, &[t], 100_000, 1 << 20, 31).expect("runs");
    let sq: Vec<f64> = results
        .iter()
        .map(|r| {
            let row = r.rows[0].as_ref().expect("uncapped");
            row.centered_sum * row.centered_sum
        })
        .collect();
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let se = ((sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)) / n).sqrt();
    println!("  Monte Carlo        {mean:.9} (se {se:.6})");
    println!();
    println!("  z against paper:     {:+.2}", (mean - paper) / se);
    println!("  z against corrected: {:+.2}", (mean - corrected) / se);

    let winner = if (brute - paper).abs() < (brute - corrected).abs() {
        "paper"
    } else {
        "corrected"
    };
    println!();
    println!("both referees agree with the {winner} variant.");
}
