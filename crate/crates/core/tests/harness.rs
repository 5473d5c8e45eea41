use std::fs;
use std::path::Path;

use wcsgd_core::harness::{run_experiment, run_validation, ValidationCheck};
use wcsgd_core::{Error, ExperimentConfig};

fn config(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "name = small
problem = abs_reg_d4
noise.kind = pareto
noise.sigma = 1
noise.p = 1.5
noise.alpha = 1.8
algorithm = clipped_ssgd
clip.kind = anytime
clip.lambda = 1
clip.p = 1.5
step.kind = clip_coupled_anytime
step.eta0 = 1
T = 50, 100, 200, 2000
n_runs = 4
seed = 9
theory = thm2
out = out
{extra}"
    );
    ExperimentConfig::parse(&text, dir).unwrap()
}

#[test]
fn writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let rep = run_experiment(&cfg, Some(1)).unwrap();
    let out = dir.path().join("out");
    for t in [50, 100, 200, 2000] {
        for r in 0..4 {
            assert!(out.join(format!("runs/{t}/{r}.csv")).is_file());
        }
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(out.join(format!("runs/{t}/summary.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(json.as_array().unwrap().len(), 4);
    }
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 5);
    assert!(agg.starts_with("T,mean,median,q90,q99,theory_bound,diverged\n"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("slope(median)"));
    assert!(rep.slope_median.is_some());
    assert!(out.join("summary.json").is_file());

    // Full evaluation up to T = 1000, a subsample beyond.
    let short = fs::read_to_string(out.join("runs/200/0.csv")).unwrap();
    assert_eq!(short.lines().count(), 201);
    let long = fs::read_to_string(out.join("runs/2000/0.csv")).unwrap();
    assert!(long.lines().count() < 2001);
}

#[test]
fn outputs_do_not_depend_on_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(a.path(), ""), Some(1)).unwrap();
    run_experiment(&config(b.path(), ""), Some(4)).unwrap();
    for f in [
        "aggregate.csv",
        "summary.txt",
        "runs/2000/3.csv",
        "runs/50/summary.json",
    ] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_surface_before_any_run() {
    let dir = tempfile::tempdir().unwrap();
    // Pareto noise has no sub-Weibull θ, so this SsGD bound cannot be evaluated.
    let mut cfg = config(dir.path(), "");
    cfg.theory = Some(wcsgd_core::BoundKind::Cor1);
    let err = run_experiment(&cfg, Some(1)).unwrap_err();
    assert!(matches!(err, Error::MissingConstant(_)), "{err}");
    assert!(!dir.path().join("out/aggregate.csv").exists());

    let text = "problem = abs_reg_d4\nstep.kind = constant\nstep.eta = 0.1\nT = 10\nalgorithm = clipped_ssgd";
    assert!(matches!(
        ExperimentConfig::parse(text, dir.path()),
        Err(Error::Config(_))
    ));
}

#[test]
fn validation_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "validate.p = 1.5\nvalidate.batch = 1, 4\nvalidate.lambda = 4\nvalidate.n_trials = 20000",
    );
    let (rep, txt) = run_validation(&cfg, ValidationCheck::BatchMoment, Some(1)).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert!(txt.is_file());
    let csv = fs::read_to_string(dir.path().join("out/validation_batch-moment.csv")).unwrap();
    assert!(csv.starts_with("check,bound,lhs,rhs,slack,pass"));

    let mut short = cfg.clone();
    short.t_values = vec![30];
    short.n_runs = 2;
    let (rep, _) = run_validation(&short, ValidationCheck::Lemma1, Some(1)).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert!(rep.pass(), "{}", rep.to_text());
}
