//! Convergence metrics over recorded trajectories: envelope-gradient norms,
//! their η-weighted and uniform averages, Δ₁, and the per-step residuals of
//! the pathwise descent inequality
//!
//! ((ρ̄−ρ)/ρ̄)·η_t‖∇f_{1/ρ̄}(x_t)‖² ≤ Δ_t − Δ_{t+1} + ρ̄η_t⟨x̂_t − x_t, ξ_t⟩ + ρ̄η_t²(‖ξ_t‖² + G²).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moreau::{envelope_value, grad_from_prox, prox_point_warm, MoreauConfig, ProxResult};
use crate::optim::Trajectory;
use crate::problems::ProblemInstance;
use crate::vecops::{dist, dot, norm, norm_sq};

/// Runs longer than this are evaluated on a geometric subsample.
pub const FULL_EVAL_MAX_T: usize = 1000;
/// Approximate number of geometric sample points for long runs.
pub const SUBSAMPLE_POINTS: usize = 200;

/// Relative rounding slack added to every pathwise residual.
const ROUNDING_REL: f64 = 1e-10;

/// One evaluated step, as written to the per-run CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetric {
    pub t: usize,
    pub grad_sq: f64,
    /// ρ̄·(bound on ‖x̂ − x̂*‖), a bound on the error of ∇f_{1/ρ̄}(x_t).
    pub err_bound: f64,
    pub eta: f64,
    pub lambda: Option<f64>,
    pub clip_active: bool,
    pub f_val: f64,
    /// Sum of η over the block of steps this sample stands for.
    pub block_eta: f64,
    /// Number of steps this sample stands for.
    pub block_len: usize,
}

impl StepMetric {
    /// Bound on |grad_sq − ‖∇f_{1/ρ̄}(x_t)‖²|.
    pub fn grad_sq_err(&self) -> f64 {
        self.err_bound * (2.0 * self.grad_sq.sqrt() + self.err_bound)
    }
}

/// Scalar summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub weighted_avg: f64,
    pub uniform_avg: f64,
    pub delta1: f64,
    pub lemma1_max_residual: Option<f64>,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub t_total: usize,
    pub rows: Vec<StepMetric>,
    /// Σ_t (η_t/Σ_s η_s)‖∇f_{1/ρ̄}(x_t)‖² (block-weighted when subsampled).
    pub weighted_avg: f64,
    /// (1/T)Σ_t ‖∇f_{1/ρ̄}(x_t)‖².
    pub uniform_avg: f64,
    /// Error bounds on the two averages from the inner solver.
    pub weighted_avg_err: f64,
    pub uniform_avg_err: f64,
    /// f_{1/ρ̄}(x_1) − f_min.
    pub delta1: f64,
    /// Whether every step was evaluated.
    pub full: bool,
    pub lemma1_max_residual: Option<f64>,
    /// Last step whose iterate was finite, when the run diverged.
    pub diverged_at: Option<usize>,
    /// Prox solves whose certified bound missed the configured tolerance.
    pub inner_warnings: usize,
}

impl RunReport {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    fn divergence(t_total: usize, last_finite: usize) -> Self {
        Self {
            t_total,
            rows: Vec::new(),
            weighted_avg: f64::INFINITY,
            uniform_avg: f64::INFINITY,
            weighted_avg_err: 0.0,
            uniform_avg_err: 0.0,
            delta1: f64::NAN,
            full: false,
            lemma1_max_residual: None,
            diverged_at: Some(last_finite),
            inner_warnings: 0,
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            weighted_avg: self.weighted_avg,
            uniform_avg: self.uniform_avg,
            delta1: self.delta1,
            lemma1_max_residual: self.lemma1_max_residual,
            diverged: self.diverged(),
        }
    }

    /// Per-step CSV: `t,grad_sq,err_bound,eta,lambda,clip_active,f_val`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,grad_sq,err_bound,eta,lambda,clip_active,f_val")?;
        for r in &self.rows {
            let lam = r.lambda.map(|l| l.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t, r.grad_sq, r.err_bound, r.eta, lam, r.clip_active as u8, r.f_val
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Step indices evaluated for a run of length `t_total`: all of them up to
/// [`FULL_EVAL_MAX_T`], otherwise about `points` geometrically spaced
/// indices including both endpoints.
pub fn sample_indices(t_total: usize, points: usize) -> Vec<usize> {
    if t_total <= FULL_EVAL_MAX_T {
        return (1..=t_total).collect();
    }
    let points = points.max(2);
    let ln_t = (t_total as f64).ln();
    let mut idx: Vec<usize> = (0..points)
        .map(|k| (ln_t * k as f64 / (points - 1) as f64).exp().round() as usize)
        .map(|t| t.clamp(1, t_total))
        .collect();
    idx.push(1);
    idx.push(t_total);
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Blocks [lo, hi] of steps represented by each sampled index; boundaries
/// sit halfway between neighbouring samples.
fn blocks(idx: &[usize], t_total: usize) -> Vec<(usize, usize)> {
    (0..idx.len())
        .map(|j| {
            let lo = if j == 0 {
                1
            } else {
                (idx[j - 1] + idx[j]) / 2 + 1
            };
            let hi = if j + 1 == idx.len() {
                t_total
            } else {
                (idx[j] + idx[j + 1]) / 2
            };
            (lo, hi)
        })
        .collect()
}

/// Sequential prox solves at the given points, each warm-started from the
/// previous one.
fn prox_sequence<'a>(
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    points: impl Iterator<Item = &'a [f64]>,
) -> Result<Vec<ProxResult>> {
    let mut out: Vec<ProxResult> = Vec::new();
    for x in points {
        let warm = out.last().and_then(|r| r.warm.as_ref());
        out.push(prox_point_warm(problem, cfg, x, warm)?);
    }
    Ok(out)
}

/// Envelope-gradient metrics of a trajectory. A diverged trajectory yields
/// a divergence report (infinite averages, last finite step recorded). The
/// pathwise residuals are included when every step is evaluated and the
/// noise was recorded.
pub fn trajectory_metrics(
    traj: &Trajectory,
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
) -> Result<RunReport> {
    cfg.check(problem)?;
    let t_total = traj.len();
    if let Some(t) = traj.diverged_at {
        return Ok(RunReport::divergence(
            traj.meta.t_total,
            t.saturating_sub(1),
        ));
    }
    if t_total == 0 {
        return Err(Error::param("trajectory", "has no steps"));
    }
    let idx = sample_indices(t_total, SUBSAMPLE_POINTS);
    let full = idx.len() == t_total;
    if full && traj.vectors.is_some() {
        let lemma = lemma1_residuals(traj, problem, cfg)?;
        let mut report = report_from(traj, cfg, &idx, &lemma.prox[..t_total], problem)?;
        report.lemma1_max_residual = Some(lemma.max_residual());
        report.inner_warnings = lemma.prox.iter().filter(|r| r.warning).count();
        return Ok(report);
    }
    let prox = prox_sequence(problem, cfg, idx.iter().map(|&t| traj.x(t)))?;
    let mut report = report_from(traj, cfg, &idx, &prox, problem)?;
    report.inner_warnings = prox.iter().filter(|r| r.warning).count();
    Ok(report)
}

fn report_from(
    traj: &Trajectory,
    cfg: &MoreauConfig,
    idx: &[usize],
    prox: &[ProxResult],
    problem: &ProblemInstance,
) -> Result<RunReport> {
    let t_total = traj.len();
    let mut prefix = Vec::with_capacity(t_total + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for e in &traj.eta {
        acc += e;
        prefix.push(acc);
    }
    let eta_sum = acc;
    let mut rows = Vec::with_capacity(idx.len());
    let (mut w_sum, mut u_sum, mut w_err, mut u_err) = (0.0, 0.0, 0.0, 0.0);
    for (&(lo, hi), (&t, r)) in blocks(idx, t_total).iter().zip(idx.iter().zip(prox)) {
        let x = traj.x(t);
        let (g, err) = grad_from_prox(cfg, x, r);
        let row = StepMetric {
            t,
            grad_sq: norm_sq(&g),
            err_bound: err,
            eta: traj.eta_at(t),
            lambda: traj.lambda[t - 1],
            clip_active: traj.clip_active[t - 1],
            f_val: traj.f_val[t - 1],
            block_eta: prefix[hi] - prefix[lo - 1],
            block_len: hi + 1 - lo,
        };
        w_sum += row.block_eta * row.grad_sq;
        u_sum += row.block_len as f64 * row.grad_sq;
        w_err += row.block_eta * row.grad_sq_err();
        u_err += row.block_len as f64 * row.grad_sq_err();
        rows.push(row);
    }
    let delta1 = envelope_value(problem, cfg, traj.x(1), &prox[0]) - problem.f_min;
    Ok(RunReport {
        t_total,
        rows,
        weighted_avg: w_sum / eta_sum,
        uniform_avg: u_sum / t_total as f64,
        weighted_avg_err: w_err / eta_sum,
        uniform_avg_err: u_err / t_total as f64,
        delta1,
        full: idx.len() == t_total,
        lemma1_max_residual: None,
        diverged_at: None,
        inner_warnings: 0,
    })
}

/// Both sides of the pathwise inequality at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Step {
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Propagated inner-solver and rounding tolerance.
    pub tol: f64,
    /// lhs − rhs.
    pub residual: f64,
}

impl Lemma1Step {
    pub fn pass(&self) -> bool {
        self.residual <= self.tol
    }
}

#[derive(Clone, Debug)]
pub struct Lemma1Residuals {
    pub steps: Vec<Lemma1Step>,
    /// Prox solves at x_1, …, x_{T+1}.
    pub prox: Vec<ProxResult>,
}

impl Lemma1Residuals {
    pub fn max_residual(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.residual)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest residual in excess of its tolerance.
    pub fn max_excess(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.residual - s.tol)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| !s.pass()).count()
    }
}

/// Per-step residuals of the pathwise descent inequality, with Δ_t measured
/// against `problem.f_min`.
///
/// With e_t the certified bound on ‖x̂_t − x̂_t*‖, v_t the certified value gap
/// of the prox objective and d_t = ‖x_t − x̂_t‖, the computed residual can
/// exceed the exact one by at most
/// ((ρ̄−ρ)/ρ̄)η_tρ̄²(2e_t d_t + 3e_t²) + v_{t+1} + ρ̄η_t e_t‖ξ_t‖
/// plus a relative rounding slack; that sum is the step tolerance.
pub fn lemma1_residuals(
    traj: &Trajectory,
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
) -> Result<Lemma1Residuals> {
    cfg.check(problem)?;
    if let Some(t) = traj.diverged_at {
        return Err(Error::Diverged {
            last_finite: t.saturating_sub(1),
        });
    }
    if traj.vectors.is_none() {
        return Err(Error::MissingNoise);
    }
    let t_total = traj.len();
    let prox = prox_sequence(problem, cfg, (1..=t_total + 1).map(|t| traj.x(t)))?;
    let rb = cfg.rho_bar;
    let c = (rb - problem.rho) / rb;
    let g2 = problem.lipschitz_g * problem.lipschitz_g;
    let delta: Vec<f64> = prox
        .iter()
        .enumerate()
        .map(|(i, r)| envelope_value(problem, cfg, traj.x(i + 1), r) - problem.f_min)
        .collect();

    let mut steps = Vec::with_capacity(t_total);
    for t in 1..=t_total {
        let x = traj.x(t);
        let r = &prox[t - 1];
        let xi = traj.xi(t).expect("vectors present");
        let eta = traj.eta_at(t);
        let d = dist(x, &r.x_hat);
        let lhs = c * eta * rb * rb * d * d;
        let diff: Vec<f64> = r.x_hat.iter().zip(x).map(|(a, b)| a - b).collect();
        let inner = rb * eta * dot(&diff, xi);
        let quad = rb * eta * eta * (norm_sq(xi) + g2);
        let drop = delta[t - 1] - delta[t];
        let rhs = drop + inner + quad;
        let e = r.subopt_bound;
        let scale = lhs.abs() + delta[t - 1].abs() + delta[t].abs() + inner.abs() + quad.abs();
        let tol = c * eta * rb * rb * (2.0 * e * d + 3.0 * e * e)
            + prox[t].value_gap
            + rb * eta * e * norm(xi)
            + ROUNDING_REL * scale;
        steps.push(Lemma1Step {
            t,
            lhs,
            rhs,
            tol,
            residual: lhs - rhs,
        });
    }
    Ok(Lemma1Residuals { steps, prox })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::optim::{run_ssgd, RunOptions, StepSchedule};
    use crate::problems::{make_abs_regression, FeasibleSet};
    use crate::rng::RngStream;

    fn abs1() -> ProblemInstance {
        make_abs_regression(&[vec![1.0]], &[0.0], FeasibleSet::full(1), Some(0.0))
            .unwrap()
            .with_rho(0.0)
            .unwrap()
    }

    fn run(p: &ProblemInstance, x0: f64, eta: f64, t: usize, noise: NoiseModel) -> Trajectory {
        run_ssgd(
            p,
            &noise,
            &StepSchedule::Constant { eta },
            t,
            RngStream::new(1, 0),
            &RunOptions::full().with_x0(vec![x0]),
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_single_step() {
        let p = abs1();
        let traj = run(&p, 3.0, 1.0, 1, NoiseModel::Zero);
        let l = lemma1_residuals(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        let s = &l.steps[0];
        assert!((s.lhs - 1.0).abs() < 1e-15);
        assert!((s.rhs - 2.0).abs() < 1e-15);
        assert!((s.residual + 1.0).abs() < 1e-15);
        assert!(s.pass());
    }

    #[test]
    fn single_step_weighted_equals_value() {
        let p = abs1();
        let traj = run(&p, 3.0, 0.5, 1, NoiseModel::Zero);
        let r = trajectory_metrics(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        assert_eq!(r.weighted_avg, r.rows[0].grad_sq);
        assert_eq!(r.uniform_avg, r.rows[0].grad_sq);
        assert_eq!(r.rows[0].grad_sq, 1.0);
        assert!((r.delta1 - 2.5).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_has_zero_metrics() {
        let p = abs1();
        let traj = run(&p, 0.0, 0.5, 50, NoiseModel::Zero);
        let r = trajectory_metrics(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        assert_eq!(r.weighted_avg, 0.0);
        assert_eq!(r.uniform_avg, 0.0);
        assert_eq!(r.delta1, 0.0);
        assert!(r.lemma1_max_residual.unwrap() <= 0.0);
    }

    #[test]
    fn constant_steps_collapse_weights() {
        let p = abs1();
        let traj = run(&p, 5.0, 0.3, 40, NoiseModel::gaussian(0.5).unwrap());
        let r = trajectory_metrics(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        assert!((r.weighted_avg - r.uniform_avg).abs() <= 1e-12 * r.uniform_avg.max(1.0));
    }

    #[test]
    fn subsample_covers_every_step_once() {
        for t_total in [1001, 5000, 100_000] {
            let idx = sample_indices(t_total, SUBSAMPLE_POINTS);
            assert_eq!(idx[0], 1);
            assert_eq!(*idx.last().unwrap(), t_total);
            assert!(idx.len() <= SUBSAMPLE_POINTS + 2);
            let b = blocks(&idx, t_total);
            assert_eq!(b[0].0, 1);
            assert_eq!(b.last().unwrap().1, t_total);
            for w in b.windows(2) {
                assert_eq!(w[0].1 + 1, w[1].0);
            }
            for (&t, &(lo, hi)) in idx.iter().zip(&b) {
                assert!(lo <= t && t <= hi);
            }
        }
        assert_eq!(sample_indices(10, 200), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn diverged_run_reports_last_finite() {
        let p = make_abs_regression(&[vec![1.0]], &[0.0], FeasibleSet::full(1), Some(0.0)).unwrap();
        let traj = run(&p, 1.0, 1e13, 5, NoiseModel::Zero);
        assert!(traj.diverged());
        let r = trajectory_metrics(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        assert!(r.diverged());
        assert!(r.weighted_avg.is_infinite());
        assert!(matches!(
            lemma1_residuals(&traj, &p, &MoreauConfig::new(1.0)),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn missing_noise_is_an_error() {
        let p = abs1();
        let traj = run_ssgd(
            &p,
            &NoiseModel::Zero,
            &StepSchedule::Constant { eta: 0.1 },
            3,
            RngStream::new(1, 0),
            &RunOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            lemma1_residuals(&traj, &p, &MoreauConfig::new(1.0)),
            Err(Error::MissingNoise)
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let p = abs1();
        let traj = run(&p, 3.0, 0.5, 3, NoiseModel::Zero);
        let r = trajectory_metrics(&traj, &p, &MoreauConfig::new(1.0)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,grad_sq,err_bound,eta,lambda,clip_active,f_val");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "1,1,0,0.5,,0,3");
    }
}
