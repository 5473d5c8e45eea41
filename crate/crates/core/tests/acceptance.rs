//! Acceptance suite: one PASS/FAIL line per criterion. Criterion 9 is
//! reported only and never fails the suite.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use wcsgd_core::harness::{compute_experiment, compute_validation, Experiment, ValidationCheck};
use wcsgd_core::moreau::{displacement_bound_check, LEMMA_INNER_TOL};
use wcsgd_core::noise::verify_moment;
use wcsgd_core::problems::{problem_preset, DEFAULT_PROBLEM_SEED};
use wcsgd_core::special::gamma;
use wcsgd_core::theory::{d_theta, rate_factor};
use wcsgd_core::vecops::norm;
use wcsgd_core::{ExperimentConfig, MoreauConfig, NoiseModel, Result, RngStream};

struct Outcome {
    pass: bool,
    detail: String,
}

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, Path::new(".")).expect("acceptance config")
}

fn preset(name: &str) -> ExperimentConfig {
    ExperimentConfig::preset(name, Path::new(".")).expect("preset")
}

fn pathwise_descent() -> Result<Outcome> {
    let noises = [
        ("gaussian", "noise.kind = gaussian\nnoise.sigma = 1", 2.0),
        (
            "sub_weibull_theta2",
            "noise.kind = sub_weibull\nnoise.sigma = 1\nnoise.theta = 2",
            2.0,
        ),
        (
            "pareto_p1.5",
            "noise.kind = pareto\nnoise.sigma = 1\nnoise.p = 1.5\nnoise.alpha = 1.8",
            1.5,
        ),
    ];
    let (mut runs, mut violations, mut worst) = (0, 0, f64::NEG_INFINITY);
    for problem in ["abs_reg_d10", "phase_d10_m30"] {
        for (label, noise, p) in noises {
            for clipped in [false, true] {
                let alg = if clipped {
                    format!(
                        "algorithm = clipped_ssgd\nclip.kind = anytime\nclip.lambda = 1\nclip.p = {p}\n\
                         step.kind = clip_coupled_anytime\nstep.eta0 = 1"
                    )
                } else {
                    "algorithm = ssgd\nstep.kind = inverse_sqrt\nstep.gamma = 0.1".to_string()
                };
                let cfg = parse(&format!(
                    "name = descent_{problem}_{label}\nproblem = {problem}\n{noise}\n{alg}\nT = 200\nn_runs = 20\nseed = 11"
                ));
                let rep = compute_validation(&cfg, ValidationCheck::Lemma1, None)?;
                runs += rep.rows.len();
                violations += rep.rows.iter().filter(|r| !r.pass).count();
                worst = rep.rows.iter().map(|r| r.lhs).fold(worst, f64::max);
            }
        }
    }
    Ok(Outcome {
        pass: violations == 0,
        detail: format!(
            "{runs} runs, {violations} failing, max residual excess over tolerance {worst:.3e}"
        ),
    })
}

fn displacement() -> Result<Outcome> {
    let mut rng = RngStream::new(5, 0).rng();
    let (mut points, mut violations, mut worst) = (0, 0, 0.0f64);
    for name in ["abs_reg_d10", "abs_reg_d10_free", "phase_d10_m30"] {
        let problem = problem_preset(name, DEFAULT_PROBLEM_SEED)?;
        let radius = if name.starts_with("phase") { 2.0 } else { 10.0 };
        let d = problem.dim();
        for factor in [2.0, 3.0] {
            let cfg = MoreauConfig::scaled(&problem, factor).with_tol(LEMMA_INNER_TOL);
            for _ in 0..1000 {
                let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let scale = radius * rng.random::<f64>().powf(1.0 / d as f64) / norm(&x);
                x.iter_mut().for_each(|v| *v *= scale);
                let c = displacement_bound_check(&problem, &cfg, &x)?;
                points += 1;
                violations += usize::from(!c.pass);
                worst = worst.max(c.displacement / c.bound);
            }
        }
    }
    Ok(Outcome {
        pass: violations == 0,
        detail: format!(
            "{points} points, {violations} violations, max displacement/bound {worst:.3}"
        ),
    })
}

fn mc_grid(check: ValidationCheck) -> Result<Outcome> {
    let rep = compute_validation(&preset("thm2_p15"), check, None)?;
    let failed: Vec<&str> = rep
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.bound.as_str())
        .collect();
    Ok(Outcome {
        pass: failed.is_empty(),
        detail: format!("{} bounds, failing: {failed:?}", rep.rows.len()),
    })
}

fn sub_weibull_calibration() -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, theta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let m = NoiseModel::sub_weibull(1.0, theta)?;
        let r = verify_moment(&m, 10, 1_000_000, RngStream::new(21, i as u64))?;
        let ok = if theta <= 1.0 {
            (1.9..=2.1).contains(&r.estimate)
        } else {
            r.median_of_means && r.estimate <= 2.2
        };
        pass &= ok;
        detail.push(format!("theta={theta}: {:.4}", r.estimate));
    }
    Ok(Outcome {
        pass,
        detail: detail.join(", "),
    })
}

fn slope_preset(name: &str) -> Result<Outcome> {
    let rep = compute_experiment(&preset(name), None)?;
    let line = rep.checks.iter().find(|c| c.gating).expect("slope check");
    Ok(Outcome {
        pass: line.pass,
        detail: format!("{name}: {}", line.label),
    })
}

fn clip_inactive_reduction() -> Result<Outcome> {
    const T: usize = 2000;
    let mut mismatches = 0;
    for seed in 0..5u64 {
        let cfg = parse(&format!(
            "preset = thm2_p15\nname = reduction\nclip.lambda = 0\nnoise.kind = zero\nseed = {seed}\nT = {T}\nn_runs = 1"
        ));
        let exp = Experiment::new(&cfg)?;
        let traj = exp.run(T, 0, false)?;
        let problem = &exp.problem;
        let g_max = problem.lipschitz_g;
        let eta0 = 1.0;
        let mut x = exp.x1.clone();
        let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(u, v)| u.to_bits() == v.to_bits());
        mismatches += usize::from(!same(&x, traj.x(1)));
        for t in 1..=T {
            let g = problem.subgradient(&x);
            let lam_t = 2.0 * g_max;
            let eta = eta0 * (1.0 / lam_t).min(1.0 / (g_max * (t as f64).sqrt()));
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= eta * gi;
            }
            problem.set.project_in_place(&mut x);
            mismatches += usize::from(!same(&x, traj.x(t + 1)) || traj.clip_active[t - 1]);
        }
    }
    Ok(Outcome {
        pass: mismatches == 0,
        detail: format!("5 seeds x {T} steps, {mismatches} mismatching iterates"),
    })
}

fn divergence_demo() -> Result<Outcome> {
    let rep = compute_experiment(&preset("vanilla_pbcm_divergence_demo"), None)?;
    let line = rep
        .checks
        .iter()
        .find(|c| !c.gating)
        .expect("divergence line");
    Ok(Outcome {
        pass: line.pass,
        detail: line.label.clone(),
    })
}

fn spot_checks() -> Result<Outcome> {
    let scale = rate_factor(1.0, 1.0, 2.0, 1e4);
    let g4 = gamma(4.0);
    let d1 = d_theta(1.0, 1.0, 1.0, 100.0, 0.1);
    Ok(Outcome {
        pass: scale == 0.01 && g4 == 6.0 && d1 == 96.0,
        detail: format!("rate factor {scale}, gamma(4) {g4}, D(1) {d1}"),
    })
}

fn main() -> ExitCode {
    type Check = fn() -> Result<Outcome>;
    let criteria: [(&str, bool, Check); 10] = [
        ("pathwise descent inequality", true, pathwise_descent),
        ("prox displacement bound", true, displacement),
        ("clipped mean moment bounds", true, || {
            mc_grid(ValidationCheck::Clip)
        }),
        ("batch moment inequality", true, || {
            mc_grid(ValidationCheck::BatchMoment)
        }),
        ("sub-Weibull calibration", true, sub_weibull_calibration),
        ("SsGD rate, theta = 1/2", true, || {
            slope_preset("cor1_theta05")
        }),
        ("fixed-T clipped rate, p = 1.5", true, || {
            slope_preset("thm3_p15")
        }),
        (
            "clip-inactive reduction to projected GD",
            true,
            clip_inactive_reduction,
        ),
        ("divergence demo (reported only)", false, divergence_demo),
        ("theory spot checks", true, spot_checks),
    ];
    let mut failed = 0;
    for (i, (name, gating, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(o) if o.pass => ("PASS", o.detail),
            Ok(o) if !gating => ("WARN", o.detail),
            Ok(o) => ("FAIL", o.detail),
            Err(e) if !gating => ("WARN", format!("error: {e}")),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        failed += usize::from(status == "FAIL");
        println!(
            "{status} {:>2}. {name}: {detail} [{:.1}s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 gating criteria failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
