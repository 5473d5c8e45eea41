//! Projected stochastic subgradient descent, with and without mini-batch
//! gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::problems::{ProblemInstance, MEMBERSHIP_TOL};
use crate::rng::RngStream;
use crate::vecops::{axpy, norm, norm_sq};

/// Iterates whose norm exceeds this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// η_t = γ/√t
    InverseSqrt { gamma: f64 },
    /// η_t = η
    Constant { eta: f64 },
    /// η_t = η₀·min{1/λ_t, 1/(G√t)}
    ClipCoupledAnytime { eta0: f64 },
    /// η_t = η₀·min{1/λ_t, 1/(G√T)}
    ClipCoupledFixedT { eta0: f64, t_total: usize },
}

impl StepSchedule {
    pub fn is_clip_coupled(&self) -> bool {
        matches!(
            self,
            StepSchedule::ClipCoupledAnytime { .. } | StepSchedule::ClipCoupledFixedT { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            StepSchedule::InverseSqrt { gamma } => ("gamma", gamma),
            StepSchedule::Constant { eta } => ("eta", eta),
            StepSchedule::ClipCoupledAnytime { eta0 } => ("eta0", eta0),
            StepSchedule::ClipCoupledFixedT { eta0, t_total } => {
                if t_total == 0 {
                    return Err(Error::param("T", "must be positive"));
                }
                ("eta0", eta0)
            }
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
        Ok(())
    }

    /// η_t for step `t ≥ 1`. Clip-coupled schedules need λ_t and the
    /// subgradient bound `g`; the others ignore both.
    pub fn step_size(&self, t: usize, lambda_t: Option<f64>, g: f64) -> Result<f64> {
        let tf = t.max(1) as f64;
        Ok(match *self {
            StepSchedule::InverseSqrt { gamma } => gamma / tf.sqrt(),
            StepSchedule::Constant { eta } => eta,
            StepSchedule::ClipCoupledAnytime { eta0 } => {
                let lam = lambda_t.ok_or(Error::MissingClipLevel("clip_coupled_anytime"))?;
                eta0 * (1.0 / lam).min(1.0 / (g * tf.sqrt()))
            }
            StepSchedule::ClipCoupledFixedT { eta0, t_total } => {
                let lam = lambda_t.ok_or(Error::MissingClipLevel("clip_coupled_fixed_t"))?;
                eta0 * (1.0 / lam).min(1.0 / (g * (t_total as f64).sqrt()))
            }
        })
    }
}

/// Free-function form of [`StepSchedule::step_size`].
pub fn step_size(schedule: &StepSchedule, t: usize, lambda_t: Option<f64>, g: f64) -> Result<f64> {
    schedule.step_size(t, lambda_t, g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClipSchedule {
    None,
    /// λ_t = max{2G, λ·t^{1/p}}
    Anytime {
        lam: f64,
        p: f64,
        g: f64,
    },
    /// λ_t = max{2G, λ·T^{1/p}}
    FixedT {
        lam: f64,
        p: f64,
        g: f64,
        t_total: usize,
    },
}

impl ClipSchedule {
    pub fn validate(&self) -> Result<()> {
        let (lam, p, g) = match *self {
            ClipSchedule::None => return Ok(()),
            ClipSchedule::Anytime { lam, p, g } => (lam, p, g),
            ClipSchedule::FixedT { lam, p, g, t_total } => {
                if t_total == 0 {
                    return Err(Error::param("T", "must be positive"));
                }
                (lam, p, g)
            }
        };
        if !(lam >= 0.0) || !lam.is_finite() {
            return Err(Error::param(
                "lambda",
                format!("must be non-negative, got {lam}"),
            ));
        }
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::param("p", format!("must lie in (1, 2], got {p}")));
        }
        if !(g > 0.0) {
            return Err(Error::param("G", format!("must be positive, got {g}")));
        }
        Ok(())
    }

    pub fn clip_level(&self, t: usize) -> Option<f64> {
        match *self {
            ClipSchedule::None => None,
            ClipSchedule::Anytime { lam, p, g } => {
                Some((2.0 * g).max(lam * (t.max(1) as f64).powf(1.0 / p)))
            }
            ClipSchedule::FixedT { lam, p, g, t_total } => {
                Some((2.0 * g).max(lam * (t_total as f64).powf(1.0 / p)))
            }
        }
    }
}

pub fn clip_level(schedule: &ClipSchedule, t: usize) -> Option<f64> {
    schedule.clip_level(t)
}

/// `min{λ/‖g‖, 1}·g`. Returns whether the rescaling was applied.
pub fn clip_in_place(g: &mut [f64], lambda: f64) -> bool {
    let n = norm(g);
    if n > lambda {
        let s = lambda / n;
        g.iter_mut().for_each(|v| *v *= s);
        true
    } else {
        false
    }
}

pub fn clip(g_tilde: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = g_tilde.to_vec();
    clip_in_place(&mut out, lambda);
    out
}

/// Options shared by both algorithms.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Starting point x₁; the set center when absent.
    pub x0: Option<Vec<f64>>,
    /// Keep the per-step vectors (∂_t, g̃_t, g_t, ξ_t). Iterates and scalar
    /// records are always kept.
    pub record_vectors: bool,
}

impl RunOptions {
    pub fn full() -> Self {
        Self {
            x0: None,
            record_vectors: true,
        }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub stream: RngStream,
    pub problem: String,
    pub step: StepSchedule,
    pub clip: ClipSchedule,
    pub batch: usize,
    pub t_total: usize,
}

/// Per-step vectors kept when [`RunOptions::record_vectors`] is set, stored
/// flat (row `t−1` belongs to step `t`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepVectors {
    pub partial: Vec<f64>,
    pub g_tilde: Vec<f64>,
    pub g: Vec<f64>,
    pub xi: Vec<f64>,
}

/// A recorded run. Steps are indexed `t = 1..=len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub dim: usize,
    /// x_1, …, x_{len()+1} (the final iterate is absent after divergence).
    xs: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda: Vec<Option<f64>>,
    pub clip_active: Vec<bool>,
    pub f_val: Vec<f64>,
    pub vectors: Option<StepVectors>,
    /// Step at which the next iterate became non-finite or exceeded
    /// [`DIVERGENCE_NORM`]; recording stops there.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Number of stored iterates.
    pub fn n_iterates(&self) -> usize {
        self.xs.len() / self.dim
    }

    /// Iterate x_t, `1 ≤ t ≤ n_iterates()`.
    pub fn x(&self, t: usize) -> &[f64] {
        &self.xs[(t - 1) * self.dim..t * self.dim]
    }

    fn row<'a>(&self, v: &'a [f64], t: usize) -> &'a [f64] {
        &v[(t - 1) * self.dim..t * self.dim]
    }

    pub fn partial(&self, t: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| self.row(&v.partial, t))
    }

    pub fn g_tilde(&self, t: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| self.row(&v.g_tilde, t))
    }

    pub fn g(&self, t: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| self.row(&v.g, t))
    }

    pub fn xi(&self, t: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| self.row(&v.xi, t))
    }

    pub fn eta_at(&self, t: usize) -> f64 {
        self.eta[t - 1]
    }
}

fn start_point(problem: &ProblemInstance, opts: &RunOptions) -> Result<Vec<f64>> {
    let x = match &opts.x0 {
        Some(x) => x.clone(),
        None => problem.default_start(),
    };
    problem.set.check_dim(x.len())?;
    if !problem.set.contains(&x, MEMBERSHIP_TOL) {
        return Err(Error::param(
            "x0",
            "starting point lies outside the feasible set",
        ));
    }
    Ok(x)
}

struct Recorder {
    dim: usize,
    xs: Vec<f64>,
    eta: Vec<f64>,
    lambda: Vec<Option<f64>>,
    clip_active: Vec<bool>,
    f_val: Vec<f64>,
    vectors: Option<StepVectors>,
}

impl Recorder {
    fn new(dim: usize, t_total: usize, x1: &[f64], vectors: bool) -> Self {
        let mut xs = Vec::with_capacity((t_total + 1) * dim);
        xs.extend_from_slice(x1);
        let cap = t_total * dim;
        Self {
            dim,
            xs,
            eta: Vec::with_capacity(t_total),
            lambda: Vec::with_capacity(t_total),
            clip_active: Vec::with_capacity(t_total),
            f_val: Vec::with_capacity(t_total),
            vectors: vectors.then(|| StepVectors {
                partial: Vec::with_capacity(cap),
                g_tilde: Vec::with_capacity(cap),
                g: Vec::with_capacity(cap),
                xi: Vec::with_capacity(cap),
            }),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        partial: &[f64],
        g_tilde: &[f64],
        g: &[f64],
        eta: f64,
        lambda: Option<f64>,
        active: bool,
        f: f64,
    ) {
        self.eta.push(eta);
        self.lambda.push(lambda);
        self.clip_active.push(active);
        self.f_val.push(f);
        if let Some(v) = &mut self.vectors {
            v.partial.extend_from_slice(partial);
            v.g_tilde.extend_from_slice(g_tilde);
            v.g.extend_from_slice(g);
            v.xi.extend(g.iter().zip(partial).map(|(a, b)| a - b));
        }
    }

    fn finish(self, meta: RunMeta, diverged_at: Option<usize>) -> Trajectory {
        Trajectory {
            meta,
            dim: self.dim,
            xs: self.xs,
            eta: self.eta,
            lambda: self.lambda,
            clip_active: self.clip_active,
            f_val: self.f_val,
            vectors: self.vectors,
            diverged_at,
        }
    }
}

/// x ← Proj(x − η g). Returns false when the new iterate is unusable.
#[inline]
fn descend(problem: &ProblemInstance, x: &mut [f64], eta: f64, g: &[f64]) -> bool {
    axpy(-eta, g, x);
    problem.set.project_in_place(x);
    x.iter().all(|v| v.is_finite()) && norm_sq(x) <= DIVERGENCE_NORM * DIVERGENCE_NORM
}

/// Projected SsGD: g_t = ∂f(x_t) + ξ_t, x_{t+1} = Proj(x_t − η_t g_t).
pub fn run_ssgd(
    problem: &ProblemInstance,
    noise: &NoiseModel,
    step: &StepSchedule,
    t_total: usize,
    stream: RngStream,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if step.is_clip_coupled() {
        return Err(Error::param(
            "step",
            "clip-coupled step sizes need a clip schedule",
        ));
    }
    step.validate()?;
    noise.validate()?;
    if t_total == 0 {
        return Err(Error::param("T", "must be positive"));
    }
    let d = problem.dim();
    let mut x = start_point(problem, opts)?;
    let mut rng = stream.rng();
    let mut rec = Recorder::new(d, t_total, &x, opts.record_vectors);
    let mut partial = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut diverged_at = None;

    for t in 1..=t_total {
        problem.subgradient_into(&x, &mut partial);
        let f = problem.value(&x);
        noise.sample_into(&mut rng, &mut xi);
        for ((gi, pi), ni) in g.iter_mut().zip(&partial).zip(&xi) {
            *gi = pi + ni;
        }
        let eta = step.step_size(t, None, problem.lipschitz_g)?;
        rec.push(&partial, &g, &g, eta, None, false, f);
        if !descend(problem, &mut x, eta, &g) {
            diverged_at = Some(t);
            break;
        }
        rec.xs.extend_from_slice(&x);
    }
    let meta = RunMeta {
        stream,
        problem: problem.name.clone(),
        step: *step,
        clip: ClipSchedule::None,
        batch: 1,
        t_total,
    };
    Ok(rec.finish(meta, diverged_at))
}

/// Mini-batch clipped SsGD: g̃_t = (1/B)Σ_i(∂f(x_t) + ξ_{i,t}),
/// g_t = clip(g̃_t, λ_t), x_{t+1} = Proj(x_t − η_t g_t).
#[allow(clippy::too_many_arguments)]
pub fn run_clipped_ssgd(
    problem: &ProblemInstance,
    noise: &NoiseModel,
    step: &StepSchedule,
    clip_schedule: &ClipSchedule,
    batch: usize,
    t_total: usize,
    stream: RngStream,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if matches!(clip_schedule, ClipSchedule::None) {
        return Err(Error::param("clip", "clipped SsGD needs a clip schedule"));
    }
    if batch == 0 {
        return Err(Error::param("batch", "must be positive"));
    }
    if t_total == 0 {
        return Err(Error::param("T", "must be positive"));
    }
    step.validate()?;
    clip_schedule.validate()?;
    noise.validate()?;
    let d = problem.dim();
    let mut x = start_point(problem, opts)?;
    let mut rng = stream.rng();
    let mut rec = Recorder::new(d, t_total, &x, opts.record_vectors);
    let mut partial = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut g_tilde = vec![0.0; d];
    let mut g = vec![0.0; d];
    let inv_b = 1.0 / batch as f64;
    let mut diverged_at = None;

    for t in 1..=t_total {
        problem.subgradient_into(&x, &mut partial);
        let f = problem.value(&x);
        g_tilde.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..batch {
            noise.sample_into(&mut rng, &mut xi);
            for ((s, pi), ni) in g_tilde.iter_mut().zip(&partial).zip(&xi) {
                *s += pi + ni;
            }
        }
        g_tilde.iter_mut().for_each(|v| *v *= inv_b);
        let lam = clip_schedule.clip_level(t).expect("clip schedule present");
        g.copy_from_slice(&g_tilde);
        let active = clip_in_place(&mut g, lam);
        let eta = step.step_size(t, Some(lam), problem.lipschitz_g)?;
        rec.push(&partial, &g_tilde, &g, eta, Some(lam), active, f);
        if !descend(problem, &mut x, eta, &g) {
            diverged_at = Some(t);
            break;
        }
        rec.xs.extend_from_slice(&x);
    }
    let meta = RunMeta {
        stream,
        problem: problem.name.clone(),
        step: *step,
        clip: *clip_schedule,
        batch,
        t_total,
    };
    Ok(rec.finish(meta, diverged_at))
}
