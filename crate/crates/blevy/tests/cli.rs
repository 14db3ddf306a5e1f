//! Black-box tests of the `blevy` binary: exit codes, flag precedence, the
//! environment seed, and the shape of every file it writes.

use std::path::Path;
use std::process::Command;

use blevy::config;
use blevy::presets;

fn blevy() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blevy"));
    cmd.env_remove("BLEVY_SEED");
    cmd
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let output = cmd.output().expect("binary runs");
    (
        output.status.code().expect("exit code"),
        String::from_utf8(output.stdout).expect("utf8 stdout"),
        String::from_utf8(output.stderr).expect("utf8 stderr"),
    )
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let (code, _, stderr) = run(&mut blevy());
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn help_and_version_exit_zero() {
    let (code, stdout, _) = run(blevy().arg("--help"));
    assert_eq!(code, 0);
    assert!(stdout.contains("verify"));
    let (code, stdout, _) = run(blevy().arg("--version"));
    assert_eq!(code, 0);
    assert!(stdout.contains("blevy"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let (code, _, stderr) = run(blevy().args(["constants", "--preset", "nope"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown preset"), "{stderr}");
    assert!(
        stderr.contains("generation"),
        "should list choices: {stderr}"
    );
}

#[test]
fn config_and_preset_flags_conflict() {
    let (code, _, stderr) =
        run(blevy().args(["constants", "--config", "x.conf", "--preset", "generation"]));
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn source_is_required() {
    let (code, _, stderr) = run(blevy().arg("constants"));
    assert_eq!(code, 2);
    assert!(stderr.contains("--config or --preset"), "{stderr}");
}

#[test]
fn broken_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "model.lambda = 1\nmodel.offspring.kind = deterministic\nmodel.offspring.k = 2\nbogus = 3\n").unwrap();
    let (code, _, stderr) = run(blevy().args(["verify", "--config"]).arg(&path));
    assert_eq!(code, 2);
    assert!(stderr.contains("bogus"), "{stderr}");

    let (code, _, stderr) = run(blevy().args(["verify", "--config", "/no/such/file.conf"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("cannot read"), "{stderr}");
}

#[test]
fn invalid_checkpoint_and_worker_flags_are_usage_errors() {
    let (code, _, stderr) =
        run(blevy().args(["verify", "--preset", "generation", "--checkpoints", "2,1"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("--checkpoints"), "{stderr}");

    let (code, _, stderr) =
        run(blevy().args(["verify", "--preset", "generation", "--workers", "0"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("--workers"), "{stderr}");
}

#[test]
fn passing_verify_exits_zero() {
    let (code, stdout, stderr) = run(blevy().args([
        "verify",
        "--preset",
        "generation",
        "--replicates",
        "2000",
        "--checkpoints",
        "1,2",
        "--seed",
        "7",
    ]));
    assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
    assert!(stdout.contains("verify: pass"), "{stdout}");
}

#[test]
fn scaled_oracles_force_a_statistical_failure() {
    let (code, stdout, _) = run(blevy().args([
        "verify",
        "--preset",
        "generation",
        "--replicates",
        "2000",
        "--checkpoints",
        "1,2",
        "--seed",
        "7",
        "--oracle-scale",
        "2",
    ]));
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("verify: fail"), "{stdout}");
    assert!(stdout.contains("fail"), "{stdout}");
}

#[test]
fn seed_precedence_flag_env_default() {
    let args = [
        "verify",
        "--preset",
        "generation",
        "--replicates",
        "100",
        "--checkpoints",
        "1",
    ];
    let (_, stdout, _) = run(blevy().args(args).env("BLEVY_SEED", "123"));
    assert!(stdout.contains("seed=123"), "{stdout}");

    let (_, stdout, _) = run(blevy()
        .args(args)
        .args(["--seed", "9"])
        .env("BLEVY_SEED", "123"));
    assert!(stdout.contains("seed=9"), "{stdout}");

    let (_, stdout, _) = run(blevy().args(args));
    assert!(stdout.contains("seed=0"), "{stdout}");

    let (code, _, stderr) = run(blevy().args(args).env("BLEVY_SEED", "not-a-number"));
    assert_eq!(code, 2);
    assert!(stderr.contains("BLEVY_SEED"), "{stderr}");
}

#[test]
fn written_presets_parse_back_to_the_same_models() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (code, stdout, _) = run(blevy().args(["presets", "--write-dir"]).arg(dir.path()));
    assert_eq!(code, 0);
    for name in presets::PRESET_NAMES {
        assert!(stdout.contains(name), "{stdout}");
        let text =
            std::fs::read_to_string(dir.path().join(format!("{name}.conf"))).expect("preset file");
        let spec = config::parse_experiment(&text).expect("written preset parses");
        assert_eq!(spec.model, presets::preset(name).unwrap(), "{name}");
    }
}

#[test]
fn verify_writes_summary_files_with_stable_shape() {
    let dir = tempfile::tempdir().expect("tempdir");
    let (code, _, _) = run(blevy()
        .args([
            "verify",
            "--preset",
            "generation",
            "--replicates",
            "1500",
            "--checkpoints",
            "1,2",
            "--seed",
            "5",
            "--out",
        ])
        .arg(dir.path()));
    assert_eq!(code, 0);

    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).expect("summary.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,observable,n_eff,estimate,se,oracle,z,verdict,variant"
    );
    assert_eq!(
        lines.clone().count(),
        2 * 7,
        "one row per checkpoint and observable"
    );
    assert!(lines.all(|l| l.split(',').count() == 9));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .expect("valid json");
    assert_eq!(json["summary"]["master_seed"], 5);
    assert_eq!(json["summary"]["cells"].as_array().unwrap().len(), 2 * 7);
    assert!(json["martingale"]["rows"].as_array().unwrap().len() >= 3);
}

#[test]
fn simulate_prints_and_writes_identical_run_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let args = [
        "simulate",
        "--preset",
        "twopoint",
        "--checkpoints",
        "0.5,1,2",
        "--seed",
        "40",
        "--out",
    ];
    let (code, stdout, _) = run(blevy().args(args).arg(dir.path()));
    assert_eq!(code, 0);
    let file = std::fs::read_to_string(dir.path().join("run.csv")).expect("run.csv");
    let printed: String = stdout
        .lines()
        .take_while(|l| !l.starts_with("wrote "))
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(printed.trim_end(), file.trim_end());
    assert_eq!(
        file.lines().next().unwrap(),
        "t,pop,sum_pos,centered_sum,martingale,w_stat,mean_dev,survived,capped,seed"
    );
    assert_eq!(file.lines().count(), 1 + 3);
}

#[test]
fn converge_writes_a_deterministic_trace() {
    let run_once = |dir: &Path| {
        let (code, stdout, stderr) = run(blevy()
            .args([
                "converge",
                "--preset",
                "generation",
                "--replicates",
                "40",
                "--seed",
                "3",
                "--out",
            ])
            .arg(dir));
        assert!(
            code == 0 || code == 1,
            "unexpected exit {code}: {stdout} {stderr}"
        );
        std::fs::read_to_string(dir.join("trace.csv")).expect("trace.csv")
    };
    let dir_a = tempfile::tempdir().expect("tempdir");
    let dir_b = tempfile::tempdir().expect("tempdir");
    let a = run_once(dir_a.path());
    let b = run_once(dir_b.path());
    assert_eq!(a, b, "same seed must give identical traces");
    assert_eq!(a.lines().next().unwrap(), "run,t,y");
    assert_eq!(
        a.lines().count(),
        1 + 40 * 5,
        "header plus one row per run and checkpoint"
    );
}

#[test]
fn constants_json_matches_the_table() {
    let (code, stdout, _) = run(blevy().args(["constants", "--preset", "twopoint", "--json"]));
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&stdout).expect("valid json");
    assert!((json["lambda_hat"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!((json["q_ext"].as_f64().unwrap() - 0.25).abs() < 1e-9);

    let (code, stdout, _) = run(blevy().args(["constants", "--preset", "twopoint"]));
    assert_eq!(code, 0);
    assert!(stdout.contains("lambda_hat"), "{stdout}");
    assert!(stdout.contains("extinction_probability"), "{stdout}");
}

#[test]
fn config_file_values_are_used_and_flags_override() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("exp.conf");
    std::fs::write(
        &path,
        "model.lambda = 1\nmodel.offspring.kind = deterministic\nmodel.offspring.k = 2\n\
         model.displacement.kind = deterministic\nmodel.displacement.d = 1\n\
         checkpoints = 0.5,1\nreplicates = 500\nseed = 21\n",
    )
    .unwrap();

    let (code, stdout, stderr) = run(blevy().args(["verify", "--config"]).arg(&path));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("seed=21"), "{stdout}");
    assert!(stdout.contains("replicates=500"), "{stdout}");
    assert!(stdout.contains("t=0.5"), "{stdout}");

    let (_, stdout, _) = run(blevy()
        .args(["verify", "--config"])
        .arg(&path)
        .args(["--replicates", "800"]));
    assert!(stdout.contains("replicates=800"), "{stdout}");
}
