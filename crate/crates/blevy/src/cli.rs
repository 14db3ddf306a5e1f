//! Command-line front end.
//!
//! Exit codes: 0 on success (all statistical checks passed, where any ran),
//! 1 when a statistical check failed, 2 for usage, configuration, or I/O
//! problems.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{self, ExperimentSpec};
use crate::model::ModelConfig;
use crate::oracle::MomentVariant;
use crate::presets;
use crate::sim::{self, RunResult, SeedRecord};
use crate::stats::{
    self, martingale_diagnostics, DiagnosticRow, MartingaleReport, McSummary, VerdictThresholds,
};
use crate::tolerances::FIRST_MOMENT_Z;

/// Environment variable consulted for the master seed when neither the
/// `--seed` flag nor the config file sets one.
pub const SEED_ENV_VAR: &str = "BLEVY_SEED";

/// Retry budget when sampling survival-conditioned runs.
const MAX_SURVIVAL_ATTEMPTS: u32 = 100_000;

const CONVERGE_DEFAULT_CHECKPOINTS: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];
const CONVERGE_DEFAULT_RUNS: usize = 200;

/// Minimum replicate count before martingale diagnostics are attempted.
const DIAGNOSTICS_MIN_REPLICATES: usize = 1000;

#[derive(Parser)]
#[command(
    name = "blevy",
    about = "Branching Lévy process simulator with exact moment oracles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constants derived from a model.
    Constants(ConstantsArgs),
    /// Compare Monte Carlo moments against the closed forms.
    Verify(VerifyArgs),
    /// Track the empirical mean position on survival-conditioned runs.
    Converge(ConvergeArgs),
    /// List the bundled presets, optionally writing them as config files.
    Presets(PresetsArgs),
    /// Run a single replicate and print its checkpoint rows.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Experiment file to load.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset to use instead of a file.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

impl SourceArgs {
    /// Loads the experiment, reporting whether it came from a file (whose
    /// run parameters should stand) or a bare preset (which carries none).
    fn load(&self) -> Result<(ExperimentSpec, bool), CliError> {
        match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                Ok((config::parse_experiment(&text)?, true))
            }
            (None, Some(name)) => {
                let model = presets::preset(name).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown preset `{name}` (available: {})",
                        presets::PRESET_NAMES.join(", ")
                    ))
                })?;
                Ok((ExperimentSpec::with_model(model), false))
            }
            _ => Err(CliError::Usage(
                "exactly one of --config or --preset is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Master seed; wins over the config file and the environment.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Population cap per run.
    #[arg(long)]
    cap: Option<usize>,
    /// Comma-separated checkpoint times, strictly increasing.
    #[arg(long, value_name = "T1,T2,...")]
    checkpoints: Option<String>,
    /// Second-moment oracle variant; defaults to whichever matches the model.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Worker threads; defaults to all cores. Results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Multiply every oracle value before scoring.
    #[arg(long, hide = true)]
    oracle_scale: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Paper,
    Corrected,
}

impl From<VariantArg> for MomentVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Paper => MomentVariant::Paper,
            VariantArg::Corrected => MomentVariant::Corrected,
        }
    }
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Emit JSON instead of the key table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct PresetsArgs {
    /// Write each preset as a config file into this directory.
    #[arg(long, value_name = "DIR")]
    write_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Parses arguments from the process environment and runs the selected
/// command, returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Constants(args) => cmd_constants(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Presets(args) => cmd_presets(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag.or(from_config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "{SEED_ENV_VAR} must be an unsigned integer, got `{raw}`"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::Usage(format!(
            "{SEED_ENV_VAR} is not valid unicode"
        ))),
    }
}

fn resolve_variant(
    flag: Option<VariantArg>,
    from_config: Option<MomentVariant>,
    model: &ModelConfig,
) -> MomentVariant {
    flag.map(MomentVariant::from).or(from_config).unwrap_or({
        if model.motion.var_rate() > 0.0 {
            MomentVariant::Corrected
        } else {
            MomentVariant::Paper
        }
    })
}

/// Applies flag overrides onto a loaded experiment.
fn apply_overrides(spec: &mut ExperimentSpec, run: &RunArgs) -> Result<(), CliError> {
    if let Some(raw) = &run.checkpoints {
        spec.checkpoints = config::parse_checkpoint_list(raw)
            .map_err(|reason| CliError::Usage(format!("--checkpoints: {reason}")))?;
    }
    if let Some(n) = run.replicates {
        spec.replicates = n;
    }
    if let Some(cap) = run.cap {
        if cap == 0 {
            return Err(CliError::Usage("--cap must be positive".into()));
        }
        spec.cap = cap;
    }
    if let Some(dir) = &run.out {
        spec.output_dir = Some(dir.clone());
    }
    Ok(())
}

fn in_worker_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--workers must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: dir.join(name),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(name), contents).map_err(io)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn cmd_constants(args: ConstantsArgs) -> Result<i32, CliError> {
    let (spec, _) = args.source.load()?;
    let dc = spec
        .model
        .derived_constants()
        .map_err(config::ConfigError::from)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&dc).expect("constants serialize")
        );
    } else {
        println!("lambda_hat             = {}", dc.lambda_hat);
        println!("mean_drift_r           = {}", dc.r);
        println!("kappa                  = {}", dc.kappa);
        println!("c1                     = {}", dc.c1);
        println!("c2                     = {}", dc.c2);
        println!("c1_corrected           = {}", dc.c1_corr);
        println!("c2_corrected           = {}", dc.c2_corr);
        println!("extinction_probability = {}", dc.q_ext);
    }
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    summary: &'a McSummary,
    martingale: Option<&'a MartingaleReport>,
}

fn print_cell_line(cell: &stats::SummaryCell) {
    let oracle = cell
        .oracle
        .map(|o| format!("{o:.6}"))
        .unwrap_or_else(|| "-".into());
    let z = cell
        .z_score
        .map(|z| format!("{z:+.2}"))
        .unwrap_or_else(|| "-".into());
    println!(
        "t={:<5} {:<15} n={:<7} est={:<14.6} se={:<12.6} oracle={:<14} z={:<7} {}",
        cell.t,
        cell.observable.label(),
        cell.n_effective,
        cell.estimate,
        cell.std_error,
        oracle,
        z,
        cell.verdict.label()
    );
}

fn print_diagnostic_line(row: &DiagnosticRow) {
    let z = row
        .z_score
        .map(|z| format!("{z:+.2}"))
        .unwrap_or_else(|| "-".into());
    println!(
        "({:<3} {:<4}] {:<24} est={:<14.6} se={:<12.6} z={:<7} {}",
        row.s,
        row.t,
        row.kind.label(),
        row.estimate,
        row.std_error,
        z,
        row.verdict.label()
    );
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, CliError> {
    let (mut spec, _) = args.source.load()?;
    apply_overrides(&mut spec, &args.run)?;
    let seed = resolve_seed(args.run.seed, spec.seed)?;
    let variant = resolve_variant(args.run.variant, spec.variant, &spec.model);
    let dc = spec
        .model
        .derived_constants()
        .map_err(config::ConfigError::from)?;

    let results = in_worker_pool(args.run.workers, || {
        stats::run_replicates(
            &spec.model,
            &spec.checkpoints,
            spec.replicates,
            spec.cap,
            seed,
        )
    })??;
    let mut summary = stats::summarize(&results, &dc, variant, VerdictThresholds::default())?;

    let diagnostics = if spec.checkpoints.len() >= 2
        && summary.n_runs - summary.n_capped >= DIAGNOSTICS_MIN_REPLICATES
    {
        Some(martingale_diagnostics(&results, FIRST_MOMENT_Z)?)
    } else {
        None
    };

    if let Some(scale) = args.run.oracle_scale {
        for cell in &mut summary.cells {
            if let Some(oracle) = cell.oracle.as_mut() {
                *oracle *= scale;
            }
            if let Some(oracle) = cell.oracle_other_variant.as_mut() {
                *oracle *= scale;
            }
            cell.rescore();
        }
    }

    println!(
        "variant={} seed={} replicates={} capped={} extinct_by_end={}",
        summary.variant.label(),
        summary.master_seed,
        summary.n_runs,
        summary.n_capped,
        summary.n_extinct_final
    );
    for cell in &summary.cells {
        print_cell_line(cell);
    }
    if let Some(report) = &diagnostics {
        println!("martingale diagnostics over {} runs:", report.n_effective);
        for row in &report.rows {
            print_diagnostic_line(row);
        }
    }

    if let Some(dir) = &spec.output_dir {
        let report = VerifyReport {
            summary: &summary,
            martingale: diagnostics.as_ref(),
        };
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_output(dir, "summary.json", &json)?;
        write_output(dir, "summary.csv", &summary.to_csv())?;
    }

    let passed = summary.passed() && diagnostics.as_ref().is_none_or(|d| d.passed());
    println!("verify: {}", if passed { "pass" } else { "fail" });
    Ok(if passed { 0 } else { 1 })
}

fn cmd_converge(args: ConvergeArgs) -> Result<i32, CliError> {
    let (mut spec, from_file) = args.source.load()?;
    if !from_file {
        spec.checkpoints = CONVERGE_DEFAULT_CHECKPOINTS.to_vec();
        spec.replicates = CONVERGE_DEFAULT_RUNS;
    }
    apply_overrides(&mut spec, &args.run)?;
    if spec.replicates < 2 {
        return Err(CliError::Usage("converge needs at least 2 runs".into()));
    }
    if spec.checkpoints.len() < 2 {
        return Err(CliError::Usage(
            "converge needs at least 2 checkpoints".into(),
        ));
    }
    let seed = resolve_seed(args.run.seed, spec.seed)?;

    let survivors = in_worker_pool(args.run.workers, || {
        use rayon::prelude::*;
        (0..spec.replicates)
            .into_par_iter()
            .map(|i| {
                sim::simulate_surviving(
                    &spec.model,
                    &spec.checkpoints,
                    spec.cap,
                    MAX_SURVIVAL_ATTEMPTS,
                    SeedRecord::new(seed, i as u64),
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })??;

    let total_attempts: u64 = survivors.iter().map(|s| u64::from(s.attempts)).sum();
    let runs: Vec<RunResult> = survivors.into_iter().map(|s| s.run).collect();
    let report = stats::convergence_trace(&runs)?;

    println!(
        "seed={} surviving_runs={} mean_attempts={}",
        seed,
        report.n_runs,
        total_attempts as f64 / report.n_runs as f64
    );
    let medians = report.gap_medians.as_ref().expect("two or more runs");
    let decreasing = report.medians_strictly_decreasing == Some(true);
    for (k, median) in medians.iter().enumerate() {
        println!(
            "gap ({} -> {}] median |dY| = {:.6}",
            report.checkpoints[k],
            report.checkpoints[k + 1],
            median
        );
    }
    println!("gap medians strictly decreasing: {decreasing}");
    println!(
        "runs with final gap below half the first: {:.1}%",
        100.0 * report.frac_final_gap_below_half_first
    );

    if let Some(dir) = &spec.output_dir {
        write_output(dir, "trace.csv", &report.trace_csv())?;
    }

    let passed = decreasing && report.frac_final_gap_below_half_first >= 0.9;
    println!("converge: {}", if passed { "pass" } else { "fail" });
    Ok(if passed { 0 } else { 1 })
}

fn cmd_presets(args: PresetsArgs) -> Result<i32, CliError> {
    for name in presets::PRESET_NAMES {
        println!(
            "{:<15} {}",
            name,
            presets::describe(name).expect("listed preset")
        );
    }
    if let Some(dir) = &args.write_dir {
        for name in presets::PRESET_NAMES {
            let spec = ExperimentSpec::with_model(presets::preset(name).expect("listed preset"));
            write_output(
                dir,
                &format!("{name}.conf"),
                &config::write_experiment(&spec),
            )?;
        }
    }
    Ok(0)
}

fn run_csv(run: &RunResult) -> String {
    let mut out = String::from(
        "t,pop,sum_pos,centered_sum,martingale,w_stat,mean_dev,survived,capped,seed\n",
    );
    for (k, &t) in run.checkpoints.iter().enumerate() {
        match &run.rows[k] {
            Some(row) => {
                let mean_dev = row.mean_dev.map(|d| d.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    t,
                    row.pop,
                    row.sum_pos,
                    row.centered_sum,
                    row.martingale,
                    row.w_stat,
                    mean_dev,
                    run.survived,
                    run.capped,
                    run.seed.master_seed
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},,,,,,,{},{},{}",
                    t, run.survived, run.capped, run.seed.master_seed
                );
            }
        }
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, CliError> {
    let (mut spec, _) = args.source.load()?;
    apply_overrides(&mut spec, &args.run)?;
    let seed = resolve_seed(args.run.seed, spec.seed)?;

    let run = sim::simulate(
        &spec.model,
        &spec.checkpoints,
        spec.cap,
        SeedRecord::new(seed, 0),
    )?;
    let csv = run_csv(&run);
    print!("{csv}");
    if let Some(dir) = &spec.output_dir {
        write_output(dir, "run.csv", &csv)?;
    }
    Ok(0)
}
