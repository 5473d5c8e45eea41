//! Monte-Carlo checks of the moment bounds for clipped mini-batch means and
//! batched heavy-tailed sums, and the pathwise descent inequality.
//!
//! Expectations are estimated by median-of-means over [`MOM_BLOCKS`] blocks
//! with 99% widths. Each block draws from its own child stream and blocks
//! are reduced in index order, so results do not depend on thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lemma1_residuals, Lemma1Step};
use crate::moreau::MoreauConfig;
use crate::noise::NoiseModel;
use crate::optim::{clip_in_place, Trajectory};
use crate::problems::ProblemInstance;
use crate::rng::RngStream;
use crate::stats::{median_of_block_means, MOM_BLOCKS};
use crate::vecops::{dist, norm};

/// Smallest accepted number of Monte-Carlo trials.
pub const MIN_TRIALS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheckConfig {
    pub n_trials: usize,
    /// Confidence of the expectation checks; only 0.99 is supported.
    pub confidence: f64,
    pub stream: RngStream,
}

impl McCheckConfig {
    pub fn new(n_trials: usize, stream: RngStream) -> Result<Self> {
        let cfg = Self {
            n_trials,
            confidence: 0.99,
            stream,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials < MIN_TRIALS {
            return Err(Error::param(
                "n_trials",
                format!("must be at least {MIN_TRIALS}, got {}", self.n_trials),
            ));
        }
        if self.confidence != 0.99 {
            return Err(Error::param("confidence", "only 0.99 is supported"));
        }
        Ok(())
    }

    /// Trial counts per block; the remainder goes to the leading blocks.
    fn block_sizes(&self) -> Vec<usize> {
        let base = self.n_trials / MOM_BLOCKS;
        let extra = self.n_trials % MOM_BLOCKS;
        (0..MOM_BLOCKS)
            .map(|b| base + usize::from(b < extra))
            .collect()
    }
}

/// One line of a validation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: String,
    /// Estimated left-hand side.
    pub lhs: f64,
    pub rhs: f64,
    /// Confidence half-width added to the right-hand side.
    pub slack: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(bound: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            bound: bound.into(),
            lhs,
            rhs,
            slack,
            pass: lhs <= rhs + slack,
        }
    }
}

/// A list of checked bounds that renders to text and CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: String,
    pub rows: Vec<BoundCheck>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} {}: lhs={:.6e} rhs={:.6e} slack={:.3e} {}",
                self.check,
                r.bound,
                r.lhs,
                r.rhs,
                r.slack,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,bound,lhs,rhs,slack,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.check, r.bound, r.lhs, r.rhs, r.slack, r.pass
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMomentReport {
    pub batch: usize,
    pub p: f64,
    /// Median-of-means estimate of E‖Σ_{n≤B} X_n‖^p.
    pub lhs_est: f64,
    pub half_width: f64,
    /// (2 − 1/B)·B·E‖X‖^p.
    pub rhs: f64,
    pub pass: bool,
}

impl BatchMomentReport {
    pub fn to_report(&self) -> ValidationReport {
        ValidationReport {
            check: "batch-moment".into(),
            rows: vec![BoundCheck::new(
                format!("B={} p={}", self.batch, self.p),
                self.lhs_est,
                self.rhs,
                self.half_width,
            )],
        }
    }
}

/// Checks E‖Σ_{n=1}^B X_n‖^p ≤ (2 − 1/B)·Σ_n E‖X_n‖^p for i.i.d. draws of
/// `model` in dimension `dim`. The per-draw moment is the model's closed
/// form.
pub fn check_batch_moment(
    model: &NoiseModel,
    dim: usize,
    batch: usize,
    p: f64,
    cfg: &McCheckConfig,
) -> Result<BatchMomentReport> {
    cfg.validate()?;
    model.validate()?;
    if batch == 0 {
        return Err(Error::param("B", "must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    if !(p > 0.0) {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    let moment = model
        .norm_moment(p, dim)
        .ok_or_else(|| Error::param("p", format!("E‖X‖^{p} is infinite for this model")))?;
    let rhs = (2.0 - 1.0 / batch as f64) * batch as f64 * moment;
    let sizes = cfg.block_sizes();
    let means: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = cfg.stream.child(b as u64).rng();
            let mut x = vec![0.0; dim];
            let mut s = vec![0.0; dim];
            let mut acc = 0.0;
            for _ in 0..n {
                s.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..batch {
                    model.sample_into(&mut rng, &mut x);
                    s.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
                }
                acc += norm(&s).powf(p);
            }
            acc / n as f64
        })
        .collect();
    let (lhs_est, half_width) = median_of_block_means(&means);
    Ok(BatchMomentReport {
        batch,
        p,
        lhs_est,
        half_width,
        rhs,
        pass: lhs_est <= rhs + half_width,
    })
}

/// Bounds on the clipped mini-batch mean X̂ = clip(mu + (1/B)Σ_i ξ_i, λ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipBoundReport {
    pub lambda: f64,
    pub batch: usize,
    pub p: f64,
    /// (i) trials with ‖X̂ − E[X̂]‖ > 2λ; must be zero.
    pub pathwise_violations: usize,
    pub max_deviation: f64,
    /// (ii) ‖E[X̂] − mu‖ against 2(2−1/B)σ^pλ^{1−p}/B^{p−1}.
    pub bias: BoundCheck,
    /// (iii) E‖X̂ − mu‖².
    pub mse: BoundCheck,
    /// (iv) E‖X̂ − E[X̂]‖².
    pub variance: BoundCheck,
    /// (v) ‖E[X̂] − mu‖².
    pub bias_sq: BoundCheck,
}

impl ClipBoundReport {
    pub fn pass(&self) -> bool {
        self.pathwise_violations == 0
            && self.bias.pass
            && self.mse.pass
            && self.variance.pass
            && self.bias_sq.pass
    }

    pub fn to_report(&self) -> ValidationReport {
        let tag = format!("p={} B={} lambda={}", self.p, self.batch, self.lambda);
        let pathwise = BoundCheck {
            bound: format!("{tag} (i) max|Xhat-E[Xhat]|"),
            lhs: self.max_deviation,
            rhs: 2.0 * self.lambda,
            slack: 0.0,
            pass: self.pathwise_violations == 0,
        };
        let named = |label: &str, c: &BoundCheck| BoundCheck {
            bound: format!("{tag} {label}"),
            ..c.clone()
        };
        ValidationReport {
            check: "clip".into(),
            rows: vec![
                pathwise,
                named("(ii) |E[Xhat]-mu|", &self.bias),
                named("(iii) E|Xhat-mu|^2", &self.mse),
                named("(iv) E|Xhat-E[Xhat]|^2", &self.variance),
                named("(v) |E[Xhat]-mu|^2", &self.bias_sq),
            ],
        }
    }
}

/// Draws one clipped mini-batch mean into `out`.
fn clipped_mean(
    model: &NoiseModel,
    mu: &[f64],
    batch: usize,
    lambda: f64,
    rng: &mut crate::rng::StreamRng,
    buf: &mut [f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for _ in 0..batch {
        model.sample_into(rng, buf);
        out.iter_mut().zip(buf.iter()).for_each(|(a, b)| *a += b);
    }
    let inv_b = 1.0 / batch as f64;
    out.iter_mut()
        .zip(mu)
        .for_each(|(a, m)| *a = m + *a * inv_b);
    clip_in_place(out, lambda);
}

/// Coordinatewise median-of-means of block mean vectors, with the norm of
/// the coordinate half-widths.
fn mom_vector(block_means: &[Vec<f64>], dim: usize) -> (Vec<f64>, f64) {
    let mut center = vec![0.0; dim];
    let mut hw2 = 0.0;
    for (j, c) in center.iter_mut().enumerate() {
        let col: Vec<f64> = block_means.iter().map(|m| m[j]).collect();
        let (est, hw) = median_of_block_means(&col);
        *c = est;
        hw2 += hw * hw;
    }
    (center, hw2.sqrt())
}

/// Checks the five bounds on a clipped mini-batch mean at centre `mu`
/// (‖mu‖ ≤ λ/2) with noise from `model` whose p-th moment is at most σ^p.
pub fn check_clip_bounds(
    mu: &[f64],
    model: &NoiseModel,
    batch: usize,
    lambda: f64,
    p: f64,
    cfg: &McCheckConfig,
) -> Result<ClipBoundReport> {
    cfg.validate()?;
    model.validate()?;
    let dim = mu.len();
    if dim == 0 {
        return Err(Error::param("mu", "must be non-empty"));
    }
    if batch == 0 {
        return Err(Error::param("B", "must be at least 1"));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::param("p", format!("must lie in (1, 2], got {p}")));
    }
    if !(lambda > 0.0) || !(lambda >= 2.0 * norm(mu)) {
        return Err(Error::param(
            "lambda",
            format!(
                "must be positive and at least 2‖mu‖ = {}, got {lambda}",
                2.0 * norm(mu)
            ),
        ));
    }
    let sigma_p = model.sigma().powf(p);
    let bf = batch as f64;
    let vbe = 2.0 - 1.0 / bf;
    let bias_rhs = 2.0 * vbe * sigma_p * lambda.powf(1.0 - p) / bf.powf(p - 1.0);
    let sq_rhs = 10.0 * vbe * sigma_p * lambda.powf(2.0 - p) / bf.powf(p - 1.0);
    let sizes = cfg.block_sizes();

    // First pass: block means of X̂ and of ‖X̂ − mu‖².
    let first: Vec<(Vec<f64>, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = cfg.stream.child(b as u64).rng();
            let mut buf = vec![0.0; dim];
            let mut xh = vec![0.0; dim];
            let mut sum = vec![0.0; dim];
            let mut mse = 0.0;
            for _ in 0..n {
                clipped_mean(model, mu, batch, lambda, &mut rng, &mut buf, &mut xh);
                sum.iter_mut()
                    .zip(&xh)
                    .zip(mu)
                    .for_each(|((a, v), m)| *a += v - m);
                mse += xh
                    .iter()
                    .zip(mu)
                    .map(|(a, m)| (a - m) * (a - m))
                    .sum::<f64>();
            }
            let inv = 1.0 / n as f64;
            // Accumulated relative to mu so an unperturbed draw averages to mu exactly.
            (
                sum.iter().zip(mu).map(|(v, m)| m + v * inv).collect(),
                mse * inv,
            )
        })
        .collect();
    let block_vecs: Vec<Vec<f64>> = first.iter().map(|f| f.0.clone()).collect();
    let (center, center_hw) = mom_vector(&block_vecs, dim);
    let mse_blocks: Vec<f64> = first.iter().map(|f| f.1).collect();
    let (mse_est, mse_hw) = median_of_block_means(&mse_blocks);

    // Second pass over the same streams: deviations from the estimated mean.
    let second: Vec<(f64, usize, f64)> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = cfg.stream.child(b as u64).rng();
            let mut buf = vec![0.0; dim];
            let mut xh = vec![0.0; dim];
            let mut var = 0.0;
            let mut viol = 0;
            let mut max_dev = 0.0_f64;
            for _ in 0..n {
                clipped_mean(model, mu, batch, lambda, &mut rng, &mut buf, &mut xh);
                let dev = dist(&xh, &center);
                var += dev * dev;
                max_dev = max_dev.max(dev);
                if dev > 2.0 * lambda * (1.0 + 1e-12) {
                    viol += 1;
                }
            }
            (var / n as f64, viol, max_dev)
        })
        .collect();
    let var_blocks: Vec<f64> = second.iter().map(|s| s.0).collect();
    let (var_est, var_hw) = median_of_block_means(&var_blocks);
    let pathwise_violations = second.iter().map(|s| s.1).sum();
    let max_deviation = second.iter().map(|s| s.2).fold(0.0, f64::max);

    let bias_est = dist(&center, mu);
    let bias_sq_hw = (bias_est + center_hw).powi(2) - bias_est * bias_est;
    Ok(ClipBoundReport {
        lambda,
        batch,
        p,
        pathwise_violations,
        max_deviation,
        bias: BoundCheck::new("(ii)", bias_est, bias_rhs, center_hw),
        mse: BoundCheck::new("(iii)", mse_est, sq_rhs, mse_hw),
        variance: BoundCheck::new("(iv)", var_est, sq_rhs, var_hw),
        bias_sq: BoundCheck::new("(v)", bias_est * bias_est, sq_rhs, bias_sq_hw),
    })
}

/// Estimated bias ‖E[X̂] − mu‖ and its half-width at each clip level.
pub fn clip_bias_profile(
    mu: &[f64],
    model: &NoiseModel,
    batch: usize,
    lambdas: &[f64],
    p: f64,
    cfg: &McCheckConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    lambdas
        .iter()
        .map(|&lam| {
            let r = check_clip_bounds(mu, model, batch, lam, p, cfg)?;
            Ok((lam, r.bias.lhs, r.bias.slack))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub max_residual: f64,
    /// Largest residual minus its step tolerance.
    pub max_excess: f64,
    pub violations: usize,
    /// Prox solves whose certified bound missed the configured tolerance.
    pub inner_warnings: usize,
    pub steps: Vec<Lemma1Step>,
    pub pass: bool,
}

impl Lemma1Report {
    pub fn to_report(&self, label: &str) -> ValidationReport {
        ValidationReport {
            check: "lemma1".into(),
            rows: vec![BoundCheck {
                bound: format!("{label} max residual (violations {})", self.violations),
                lhs: self.max_excess,
                rhs: 0.0,
                slack: 0.0,
                pass: self.pass,
            }],
        }
    }
}

/// Evaluates the pathwise descent inequality at every step of `traj`.
pub fn check_pathwise_lemma1(
    traj: &Trajectory,
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
) -> Result<Lemma1Report> {
    let l = lemma1_residuals(traj, problem, cfg)?;
    let violations = l.violations();
    Ok(Lemma1Report {
        max_residual: l.max_residual(),
        max_excess: l.max_excess(),
        violations,
        inner_warnings: l.prox.iter().filter(|r| r.warning).count(),
        steps: l.steps,
        pass: violations == 0,
    })
}
