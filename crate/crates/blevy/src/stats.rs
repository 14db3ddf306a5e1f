//! Monte Carlo harness: replicate running, z-scored comparison against the
//! oracles, martingale diagnostics, and convergence traces.
//!
//! Replicate `i` always consumes the stream `(master_seed, i)`, and every
//! reduction walks replicates in index order with compensated accumulation,
//! so estimates are bit-identical no matter how many worker threads ran the
//! replicates or in which order they finished.
//!
//! Capped runs never enter a moment estimate (they are truncated mid-flight);
//! extinct runs do, except for `mean_dev`, which is undefined at checkpoints
//! where the population is empty.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kahan::NeumaierSum;
use crate::model::{DerivedConstants, ModelConfig};
use crate::oracle::{
    centered_sum_mean, centered_sum_second_moment, expected_population, martingale_variance,
    population_second_moment, MomentVariant,
};
use crate::sim::{simulate, RunResult, SeedRecord, SimError};
use crate::tolerances::{FIRST_MOMENT_Z, SECOND_MOMENT_Z};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("insufficient replicates for {context}: need at least {needed}, got {got}")]
    InsufficientReplicates {
        context: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("at least two checkpoints are required")]
    TooFewCheckpoints,
    #[error("convergence traces require surviving, uncapped runs with every checkpoint defined")]
    NonSurvivingRun,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Verdict thresholds in standard-error units.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerdictThresholds {
    pub first_moment: f64,
    pub second_moment: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            first_moment: FIRST_MOMENT_Z,
            second_moment: SECOND_MOMENT_Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// No oracle value for this observable; reported but never gating.
    Informational,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Informational => "informational",
        }
    }
}

/// Observables summarized per checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Pop,
    Pop2,
    CenteredSum,
    CenteredSum2,
    MartingaleMean,
    MartingaleVar,
    MeanDev,
}

impl Observable {
    pub fn label(self) -> &'static str {
        match self {
            Observable::Pop => "pop",
            Observable::Pop2 => "pop2",
            Observable::CenteredSum => "centered_sum",
            Observable::CenteredSum2 => "centered_sum2",
            Observable::MartingaleMean => "martingale_mean",
            Observable::MartingaleVar => "martingale_var",
            Observable::MeanDev => "mean_dev",
        }
    }
}

/// One (checkpoint, observable) comparison.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryCell {
    pub t: f64,
    pub observable: Observable,
    /// Replicates actually contributing to this cell.
    pub n_effective: usize,
    pub estimate: f64,
    pub std_error: f64,
    /// Oracle value under the summary's variant; `None` for informational
    /// observables.
    pub oracle: Option<f64>,
    /// Oracle value under the other variant, reported whenever it differs.
    pub oracle_other_variant: Option<f64>,
    pub z_score: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
}

impl SummaryCell {
    /// Recomputes the z-score and verdict from the current fields, for use
    /// after adjusting the oracle value in place.
    pub fn rescore(&mut self) {
        let rebuilt = build_cell(
            self.t,
            self.observable,
            self.n_effective,
            self.estimate,
            self.std_error,
            self.oracle,
            self.oracle_other_variant,
            self.threshold,
        );
        self.z_score = rebuilt.z_score;
        self.verdict = rebuilt.verdict;
    }
}

/// Moment comparison table for one batch of replicates.
#[derive(Clone, Debug, Serialize)]
pub struct McSummary {
    pub variant: MomentVariant,
    pub master_seed: u64,
    pub n_runs: usize,
    pub n_capped: usize,
    /// Uncapped runs extinct by the final checkpoint.
    pub n_extinct_final: usize,
    pub checkpoints: Vec<f64>,
    pub cells: Vec<SummaryCell>,
}

impl McSummary {
    /// True when every gating (non-informational) cell passes.
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// CSV with one row per cell. Floats use the shortest representation
    /// that parses back to the identical value; absent fields are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,observable,n_eff,estimate,se,oracle,z,verdict,variant\n");
        for cell in &self.cells {
            let oracle = cell.oracle.map(|v| v.to_string()).unwrap_or_default();
            let z = cell.z_score.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                cell.t,
                cell.observable.label(),
                cell.n_effective,
                cell.estimate,
                cell.std_error,
                oracle,
                z,
                cell.verdict.label(),
                self.variant.label(),
            ));
        }
        out
    }
}

/// Runs `replicates` independent simulations in parallel; replicate `i` uses
/// the stream `(master_seed, i)`. The returned vector is ordered by replicate
/// index regardless of scheduling.
pub fn run_replicates(
    config: &ModelConfig,
    checkpoints: &[f64],
    replicates: usize,
    cap: usize,
    master_seed: u64,
) -> Result<Vec<RunResult>, SimError> {
    config.validate()?;
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            simulate(
                config,
                checkpoints,
                cap,
                SeedRecord::new(master_seed, i as u64),
            )
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = crate::kahan::compensated_sum(values.iter().copied()) / n;
    let mut ss = NeumaierSum::new();
    for &v in values {
        let d = v - mean;
        ss.add(d * d);
    }
    let var = (ss.value() / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance and its standard error
/// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)` from the central fourth moment.
fn variance_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = crate::kahan::compensated_sum(values.iter().copied()) / n;
    let mut ss = NeumaierSum::new();
    let mut s4 = NeumaierSum::new();
    for &v in values {
        let d = v - mean;
        ss.add(d * d);
        s4.add(d * d * d * d);
    }
    let var = (ss.value() / (n - 1.0)).max(0.0);
    let m4 = s4.value() / n;
    let se_sq = (m4 - var * var * (n - 3.0) / (n - 1.0)) / n;
    (var, se_sq.max(0.0).sqrt())
}

fn sample_cov(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = crate::kahan::compensated_sum(xs.iter().copied()) / n;
    let my = crate::kahan::compensated_sum(ys.iter().copied()) / n;
    let mut prod = NeumaierSum::new();
    let mut prod_sq = NeumaierSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let p = (x - mx) * (y - my);
        prod.add(p);
        prod_sq.add(p * p);
    }
    let cov = prod.value() / (n - 1.0);
    // Standard error of the mean of the centered products.
    let p_mean = prod.value() / n;
    let p_var = ((prod_sq.value() - n * p_mean * p_mean) / (n - 1.0)).max(0.0);
    (cov, (p_var / n).sqrt())
}

#[allow(clippy::too_many_arguments)]
fn build_cell(
    t: f64,
    observable: Observable,
    n_effective: usize,
    estimate: f64,
    std_error: f64,
    oracle: Option<f64>,
    oracle_other_variant: Option<f64>,
    threshold: f64,
) -> SummaryCell {
    let (z_score, verdict) = match oracle {
        None => (None, Verdict::Informational),
        Some(o) => {
            let diff = estimate - o;
            if std_error > 0.0 {
                let z = diff / std_error;
                (
                    Some(z),
                    if z.abs() <= threshold {
                        Verdict::Pass
                    } else {
                        Verdict::Fail
                    },
                )
            } else if diff == 0.0 {
                // Degenerate but exact: e.g. an all-zero observable matching
                // an oracle of zero.
                (Some(0.0), Verdict::Pass)
            } else {
                (None, Verdict::Fail)
            }
        }
    };
    SummaryCell {
        t,
        observable,
        n_effective,
        estimate,
        std_error,
        oracle,
        oracle_other_variant,
        z_score,
        threshold,
        verdict,
    }
}

/// Compares replicate moments with the oracles at every checkpoint.
pub fn summarize(
    results: &[RunResult],
    dc: &DerivedConstants,
    variant: MomentVariant,
    thresholds: VerdictThresholds,
) -> Result<McSummary, StatsError> {
    let uncapped: Vec<&RunResult> = results.iter().filter(|r| !r.capped).collect();
    if uncapped.len() < 2 {
        return Err(StatsError::InsufficientReplicates {
            context: "moment summary (uncapped runs)",
            needed: 2,
            got: uncapped.len(),
        });
    }
    let checkpoints = results[0].checkpoints.clone();
    let other = match variant {
        MomentVariant::Paper => MomentVariant::Corrected,
        MomentVariant::Corrected => MomentVariant::Paper,
    };
    let mut cells = Vec::with_capacity(checkpoints.len() * 7);

    for (k, &t) in checkpoints.iter().enumerate() {
        let n = uncapped.len();
        let mut pops = Vec::with_capacity(n);
        let mut pop_sqs = Vec::with_capacity(n);
        let mut centereds = Vec::with_capacity(n);
        let mut centered_sqs = Vec::with_capacity(n);
        let mut martingales = Vec::with_capacity(n);
        let mut mean_devs = Vec::new();
        for run in &uncapped {
            let row = run.rows[k].as_ref().expect("uncapped run has every row");
            let pop = row.pop as f64;
            pops.push(pop);
            pop_sqs.push(pop * pop);
            centereds.push(row.centered_sum);
            centered_sqs.push(row.centered_sum * row.centered_sum);
            martingales.push(row.martingale);
            if let Some(dev) = row.mean_dev {
                mean_devs.push(dev);
            }
        }

        let (est, se) = mean_and_se(&pops);
        cells.push(build_cell(
            t,
            Observable::Pop,
            n,
            est,
            se,
            Some(expected_population(dc, t)),
            None,
            thresholds.first_moment,
        ));

        let (est, se) = mean_and_se(&pop_sqs);
        cells.push(build_cell(
            t,
            Observable::Pop2,
            n,
            est,
            se,
            Some(population_second_moment(dc, t)),
            None,
            thresholds.second_moment,
        ));

        let (est, se) = mean_and_se(&centereds);
        cells.push(build_cell(
            t,
            Observable::CenteredSum,
            n,
            est,
            se,
            Some(centered_sum_mean(dc, t)),
            None,
            thresholds.first_moment,
        ));

        let o_main = centered_sum_second_moment(dc, t, variant);
        let o_other = centered_sum_second_moment(dc, t, other);
        let (est, se) = mean_and_se(&centered_sqs);
        cells.push(build_cell(
            t,
            Observable::CenteredSum2,
            n,
            est,
            se,
            Some(o_main),
            (o_other != o_main).then_some(o_other),
            thresholds.second_moment,
        ));

        let (est, se) = mean_and_se(&martingales);
        cells.push(build_cell(
            t,
            Observable::MartingaleMean,
            n,
            est,
            se,
            Some(0.0),
            None,
            thresholds.first_moment,
        ));

        let o_main = martingale_variance(dc, t, variant);
        let o_other = martingale_variance(dc, t, other);
        let (est, se) = variance_and_se(&martingales);
        cells.push(build_cell(
            t,
            Observable::MartingaleVar,
            n,
            est,
            se,
            Some(o_main),
            (o_other != o_main).then_some(o_other),
            thresholds.second_moment,
        ));

        if mean_devs.len() < 2 {
            return Err(StatsError::InsufficientReplicates {
                context: "mean deviation cell (surviving runs)",
                needed: 2,
                got: mean_devs.len(),
            });
        }
        let (est, se) = mean_and_se(&mean_devs);
        cells.push(build_cell(
            t,
            Observable::MeanDev,
            mean_devs.len(),
            est,
            se,
            None,
            None,
            thresholds.first_moment,
        ));
    }

    let n_extinct_final = uncapped.iter().filter(|r| !r.survived).count();
    Ok(McSummary {
        variant,
        master_seed: results[0].seed.master_seed,
        n_runs: results.len(),
        n_capped: results.len() - uncapped.len(),
        n_extinct_final,
        checkpoints,
        cells,
    })
}

/// Kind of martingale diagnostic computed for one adjacent checkpoint pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// Mean of the increment `M_t - M_s`; zero for a martingale.
    IncrementMean,
    /// Covariance of the level `M_s` with the increment; zero by
    /// orthogonality of martingale increments.
    IncrementLevelCov,
    /// `Var(M_t - M_s) - (Var(M_t) - Var(M_s))`; zero by the same
    /// orthogonality, computed from the variances as an independent route.
    VarianceDecomposition,
}

impl DiagnosticKind {
    pub fn label(self) -> &'static str {
        match self {
            DiagnosticKind::IncrementMean => "increment_mean",
            DiagnosticKind::IncrementLevelCov => "increment_level_cov",
            DiagnosticKind::VarianceDecomposition => "variance_decomposition",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticRow {
    pub kind: DiagnosticKind,
    pub s: f64,
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: Option<f64>,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Martingale property checks over all adjacent checkpoint pairs.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub n_effective: usize,
    pub rows: Vec<DiagnosticRow>,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn diagnostic_row(
    kind: DiagnosticKind,
    s: f64,
    t: f64,
    estimate: f64,
    std_error: f64,
    threshold: f64,
) -> DiagnosticRow {
    let (z_score, verdict) = if std_error > 0.0 {
        let z = estimate / std_error;
        (
            Some(z),
            if z.abs() <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        )
    } else if estimate == 0.0 {
        (Some(0.0), Verdict::Pass)
    } else {
        (None, Verdict::Fail)
    };
    DiagnosticRow {
        kind,
        s,
        t,
        estimate,
        std_error,
        z_score,
        threshold,
        verdict,
    }
}

/// Tests the martingale structure of `M_t` across adjacent checkpoints:
/// increment means, level-increment covariances, and the variance
/// decomposition, all with oracle value zero.
///
/// Needs at least two checkpoints and 1000 uncapped replicates.
pub fn martingale_diagnostics(
    results: &[RunResult],
    threshold: f64,
) -> Result<MartingaleReport, StatsError> {
    let uncapped: Vec<&RunResult> = results.iter().filter(|r| !r.capped).collect();
    if uncapped.len() < 1000 {
        return Err(StatsError::InsufficientReplicates {
            context: "martingale diagnostics",
            needed: 1000,
            got: uncapped.len(),
        });
    }
    let checkpoints = &results[0].checkpoints;
    if checkpoints.len() < 2 {
        return Err(StatsError::TooFewCheckpoints);
    }

    let levels: Vec<Vec<f64>> = (0..checkpoints.len())
        .map(|k| {
            uncapped
                .iter()
                .map(|run| run.rows[k].as_ref().expect("uncapped row").martingale)
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for k in 0..checkpoints.len() - 1 {
        let (s, t) = (checkpoints[k], checkpoints[k + 1]);
        let here = &levels[k];
        let next = &levels[k + 1];
        let increments: Vec<f64> = here.iter().zip(next).map(|(a, b)| b - a).collect();

        let (mean, se) = mean_and_se(&increments);
        rows.push(diagnostic_row(
            DiagnosticKind::IncrementMean,
            s,
            t,
            mean,
            se,
            threshold,
        ));

        let (cov, se_cov) = sample_cov(here, &increments);
        rows.push(diagnostic_row(
            DiagnosticKind::IncrementLevelCov,
            s,
            t,
            cov,
            se_cov,
            threshold,
        ));

        let (var_inc, _) = variance_and_se(&increments);
        let (var_here, _) = variance_and_se(here);
        let (var_next, _) = variance_and_se(next);
        let decomposition = var_inc - (var_next - var_here);
        rows.push(diagnostic_row(
            DiagnosticKind::VarianceDecomposition,
            s,
            t,
            decomposition,
            2.0 * se_cov,
            threshold,
        ));
    }
    Ok(MartingaleReport {
        n_effective: uncapped.len(),
        rows,
    })
}

/// Per-run mean-deviation traces and the cross-run gap statistics used to
/// demonstrate pathwise convergence of the empirical mean position.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub checkpoints: Vec<f64>,
    pub n_runs: usize,
    /// `traces[i][k]` is run `i`'s `mean_dev` at checkpoint `k`.
    pub traces: Vec<Vec<f64>>,
    /// Median absolute step `|Y_{t_{k+1}} - Y_{t_k}|` across runs, one entry
    /// per checkpoint gap; absent when fewer than two runs were given.
    pub gap_medians: Option<Vec<f64>>,
    /// Whether the gap medians strictly decrease along the grid.
    pub medians_strictly_decreasing: Option<bool>,
    /// Fraction of runs whose final gap is below half their first gap.
    pub frac_final_gap_below_half_first: f64,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long-format CSV of the raw traces: one row per (run, checkpoint).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("run,t,y\n");
        for (i, trace) in self.traces.iter().enumerate() {
            for (k, y) in trace.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", i, self.checkpoints[k], y));
            }
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Builds per-run `mean_dev` traces from surviving runs and summarizes how
/// fast consecutive checkpoint values settle.
pub fn convergence_trace(results: &[RunResult]) -> Result<ConvergenceReport, StatsError> {
    if results.is_empty() {
        return Err(StatsError::InsufficientReplicates {
            context: "convergence trace",
            needed: 1,
            got: 0,
        });
    }
    let checkpoints = results[0].checkpoints.clone();
    if checkpoints.len() < 2 {
        return Err(StatsError::TooFewCheckpoints);
    }
    let mut traces = Vec::with_capacity(results.len());
    for run in results {
        if run.capped {
            return Err(StatsError::NonSurvivingRun);
        }
        let mut trace = Vec::with_capacity(checkpoints.len());
        for row in &run.rows {
            let dev = row
                .as_ref()
                .and_then(|r| r.mean_dev)
                .ok_or(StatsError::NonSurvivingRun)?;
            trace.push(dev);
        }
        traces.push(trace);
    }

    let n_gaps = checkpoints.len() - 1;
    let gaps: Vec<Vec<f64>> = traces
        .iter()
        .map(|tr| (0..n_gaps).map(|k| (tr[k + 1] - tr[k]).abs()).collect())
        .collect();
    let frac =
        gaps.iter().filter(|g| g[n_gaps - 1] < 0.5 * g[0]).count() as f64 / traces.len() as f64;

    let (gap_medians, decreasing) = if traces.len() >= 2 {
        let medians: Vec<f64> = (0..n_gaps)
            .map(|k| {
                let mut column: Vec<f64> = gaps.iter().map(|g| g[k]).collect();
                median(&mut column)
            })
            .collect();
        let strictly = medians.windows(2).all(|w| w[1] < w[0]);
        (Some(medians), Some(strictly))
    } else {
        (None, None)
    };

    Ok(ConvergenceReport {
        checkpoints,
        n_runs: traces.len(),
        traces,
        gap_medians,
        medians_strictly_decreasing: decreasing,
        frac_final_gap_below_half_first: frac,
    })
}
