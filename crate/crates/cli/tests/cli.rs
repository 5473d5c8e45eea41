use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wcsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcsgd"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "
name = cli_small
problem = abs_reg_d4
noise.kind = gaussian
noise.sigma = 0.5
step.kind = inverse_sqrt
step.gamma = 0.1
T = 20, 40, 80, 160
n_runs = 3
out = results
validate.p = 1.5, 2
validate.batch = 1, 2
validate.lambda = 4
validate.n_trials = 20000
";

#[test]
fn version_and_presets() {
    let out = wcsgd(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("wcsgd "));

    let out = wcsgd(&["presets"]);
    let names = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(names.lines().count(), 10);
    assert!(names.contains("thm3_p15"));

    let out = wcsgd(&["presets", "cor1_theta05"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("theory = cor1"));
}

#[test]
fn run_writes_outputs_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = wcsgd(&["run", "--config", &cfg, "--jobs", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let res = dir.path().join("results");
    assert!(res.join("aggregate.csv").is_file());
    assert!(res.join("runs/160/2.csv").is_file());
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope(median)"));
}

#[test]
fn failed_gating_check_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL}check.slope_min = 5\ncheck.slope_max = 6\n"),
    );
    let out = wcsgd(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let summary = fs::read_to_string(dir.path().join("results/summary.txt")).unwrap();
    assert!(summary.contains("FAIL slope(median)"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("T = 20, 40, 80, 160", "T = 40, 20"),
    );
    let out = wcsgd(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));

    assert_eq!(
        wcsgd(&["run", "--config", "/no/such/file"]).status.code(),
        Some(1)
    );
    assert_eq!(wcsgd(&["bogus"]).status.code(), Some(1));
    assert_eq!(wcsgd(&["run", "--preset", "nope"]).status.code(), Some(1));
}

#[test]
fn validate_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for check in ["batch-moment", "clip"] {
        let out = wcsgd(&["validate", "--check", check, "--config", &cfg]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{check}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert!(dir
            .path()
            .join(format!("results/validation_{check}.csv"))
            .is_file());
    }
    let lemma = write_config(dir.path(), &SMALL.replace("T = 20, 40, 80, 160", "T = 30"));
    let out = wcsgd(&["validate", "--check", "lemma1", "--config", &lemma]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    assert_eq!(
        wcsgd(&["validate", "--check", "nope", "--config", &cfg])
            .status
            .code(),
        Some(1)
    );
}
