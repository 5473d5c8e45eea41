//! Moreau-envelope machinery: proximal points with certified accuracy,
//! envelope gradients, and the displacement bound ‖x̂ − x‖ ≤ 2‖g‖/(ρ̄ − ρ).
//!
//! The prox objective is φ(y) = f(y) + (ρ̄/2)‖y − x‖² over the feasible set,
//! which is (ρ̄ − ρ)-strongly convex. Solvers, in order of preference:
//!
//! * closed forms for constant and linear objectives and for separable
//!   absolute-value rows on the full space (soft-thresholding);
//! * for sums of absolute values of simple maps (`AbsRegression`,
//!   `PhaseRetrieval`), accelerated projected gradient ascent on the dual
//!   over the box `[−1, 1]^m`. Every dual point `u` yields a feasible primal
//!   point `y(u)` and the duality gap `φ(y) − D(u)`, which bounds both the
//!   value error and, through strong convexity, the distance to x̂;
//! * projected subgradient descent with step 2/(μ(k+1)) and weighted
//!   averaging for opaque objectives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{FeasibleSet, Objective, ProblemInstance, Rows};
use crate::vecops::{dist, dot, norm, norm_sq};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoreauConfig {
    pub rho_bar: f64,
    /// Iteration cap K of the iterative solvers.
    pub inner_iters: usize,
    /// Target bound on ‖x̂_K − x̂*‖.
    pub inner_tol: f64,
    /// Skip the soft-threshold closed form so the iterative solver runs.
    pub force_iterative: bool,
}

pub const DEFAULT_INNER_ITERS: usize = 2000;
pub const METRIC_INNER_TOL: f64 = 1e-6;
pub const LEMMA_INNER_TOL: f64 = 1e-8;

impl MoreauConfig {
    pub fn new(rho_bar: f64) -> Self {
        Self {
            rho_bar,
            inner_iters: DEFAULT_INNER_ITERS,
            inner_tol: METRIC_INNER_TOL,
            force_iterative: false,
        }
    }

    /// ρ̄ = factor·ρ for the given problem.
    pub fn scaled(problem: &ProblemInstance, factor: f64) -> Self {
        Self::new(factor * problem.rho)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.inner_tol = tol;
        self
    }

    pub fn with_iters(mut self, k: usize) -> Self {
        self.inner_iters = k;
        self
    }

    pub fn iterative(mut self) -> Self {
        self.force_iterative = true;
        self
    }

    pub fn check(&self, problem: &ProblemInstance) -> Result<()> {
        if !(self.rho_bar > problem.rho) || !self.rho_bar.is_finite() {
            return Err(Error::param(
                "rho_bar",
                format!("must exceed rho = {}, got {}", problem.rho, self.rho_bar),
            ));
        }
        if self.inner_iters == 0 {
            return Err(Error::param("inner_iters", "must be positive"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::param("inner_tol", "must be positive"));
        }
        Ok(())
    }

    fn mu(&self, problem: &ProblemInstance) -> f64 {
        self.rho_bar - problem.rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxMethod {
    Projection,
    SoftThreshold,
    DualGradient,
    Subgradient,
}

/// Dual state that can seed the next solve at a nearby point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWarmStart {
    pub u: Vec<f64>,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    pub x_hat: Vec<f64>,
    /// Certified bound on ‖x̂ − x̂*‖.
    pub subopt_bound: f64,
    /// Certified bound on φ(x̂) − min φ.
    pub value_gap: f64,
    /// Set when `subopt_bound` exceeds the configured tolerance.
    pub warning: bool,
    pub method: ProxMethod,
    pub iterations: usize,
    pub warm: Option<DualWarmStart>,
}

impl ProxResult {
    fn exact(x_hat: Vec<f64>, method: ProxMethod) -> Self {
        Self {
            x_hat,
            subopt_bound: 0.0,
            value_gap: 0.0,
            warning: false,
            method,
            iterations: 0,
            warm: None,
        }
    }
}

/// Prox objective φ(y) = f(y) + (ρ̄/2)‖y − x‖².
pub fn prox_objective(problem: &ProblemInstance, rho_bar: f64, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    problem.value(y) + 0.5 * rho_bar * d2
}

/// Approximate proximal point x̂ = argmin_{y ∈ 𝒳} φ(y).
pub fn prox_point(problem: &ProblemInstance, cfg: &MoreauConfig, x: &[f64]) -> Result<ProxResult> {
    prox_point_warm(problem, cfg, x, None)
}

/// [`prox_point`] seeded with the dual state of an earlier solve.
pub fn prox_point_warm(
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    x: &[f64],
    warm: Option<&DualWarmStart>,
) -> Result<ProxResult> {
    cfg.check(problem)?;
    problem.set.check_dim(x.len())?;
    let rb = cfg.rho_bar;
    match &problem.objective {
        Objective::Constant(_) => Ok(ProxResult::exact(
            problem.set.project(x)?,
            ProxMethod::Projection,
        )),
        Objective::Linear { c, .. } => {
            let y: Vec<f64> = x.iter().zip(c).map(|(xi, ci)| xi - ci / rb).collect();
            Ok(ProxResult::exact(
                problem.set.project(&y)?,
                ProxMethod::Projection,
            ))
        }
        Objective::AbsRegression { a, b } => {
            if !cfg.force_iterative {
                if let Some(y) = soft_threshold_prox(a, b, &problem.set, rb, x) {
                    return Ok(ProxResult::exact(y, ProxMethod::SoftThreshold));
                }
            }
            let oracle = AbsDual {
                a,
                b,
                set: &problem.set,
                x,
                rho_bar: rb,
            };
            // f is convex here, so φ is ρ̄-strongly convex whatever the nominal ρ.
            Ok(dual_gradient(&oracle, rb, problem, cfg, warm))
        }
        Objective::PhaseRetrieval { a, b } => {
            if matches!(problem.set, FeasibleSet::Box { .. }) {
                return Ok(subgradient_prox(problem, cfg, x));
            }
            let oracle = PhaseDual {
                a,
                b,
                set: &problem.set,
                x,
                rho_bar: rb,
            };
            Ok(dual_gradient(&oracle, cfg.mu(problem), problem, cfg, warm))
        }
        Objective::Custom { .. } => Ok(subgradient_prox(problem, cfg, x)),
    }
}

/// Envelope gradient ρ̄(x − x̂) and the error bound ρ̄·‖x̂ − x̂*‖.
pub fn moreau_grad(
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let r = prox_point(problem, cfg, x)?;
    Ok(grad_from_prox(cfg, x, &r))
}

pub fn grad_from_prox(cfg: &MoreauConfig, x: &[f64], r: &ProxResult) -> (Vec<f64>, f64) {
    let g = x
        .iter()
        .zip(&r.x_hat)
        .map(|(xi, hi)| cfg.rho_bar * (xi - hi))
        .collect();
    (g, cfg.rho_bar * r.subopt_bound)
}

/// Envelope value f_{1/ρ̄}(x) evaluated at the computed x̂ (an upper bound
/// on the true value by at most `value_gap`).
pub fn envelope_value(
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    x: &[f64],
    r: &ProxResult,
) -> f64 {
    prox_objective(problem, cfg.rho_bar, x, &r.x_hat)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementCheck {
    pub displacement: f64,
    pub bound: f64,
    pub allowance: f64,
    pub pass: bool,
}

/// Checks ‖x̂ − x‖ ≤ 2‖g‖/(ρ̄ − ρ) at a feasible `x`, with g the oracle's
/// subgradient and the solver error as allowance.
pub fn displacement_bound_check(
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    x: &[f64],
) -> Result<DisplacementCheck> {
    let r = prox_point(problem, cfg, x)?;
    let g = problem.subgradient(x);
    let displacement = dist(&r.x_hat, x);
    let bound = 2.0 * norm(&g) / cfg.mu(problem);
    let allowance = r.subopt_bound + 1e-12 * (1.0 + norm(x));
    Ok(DisplacementCheck {
        displacement,
        bound,
        allowance,
        pass: displacement <= bound + allowance,
    })
}

/// Soft-thresholding for rows that each touch a single coordinate, at most
/// one row per coordinate, on the full space.
fn soft_threshold_prox(
    a: &Rows,
    b: &[f64],
    set: &FeasibleSet,
    rho_bar: f64,
    x: &[f64],
) -> Option<Vec<f64>> {
    if !matches!(set, FeasibleSet::FullSpace { .. }) {
        return None;
    }
    let d = a.ncols();
    let m = a.nrows() as f64;
    let mut owner: Vec<Option<(f64, f64)>> = vec![None; d];
    for (r, bi) in a.iter().zip(b) {
        let mut nz = r.iter().enumerate().filter(|(_, v)| **v != 0.0);
        let (j, w) = nz.next()?;
        if nz.next().is_some() || owner[j].is_some() {
            return None;
        }
        owner[j] = Some((*w, *bi));
    }
    Some(
        x.iter()
            .zip(&owner)
            .map(|(xj, o)| match o {
                None => *xj,
                Some((w, bi)) => {
                    let c = bi / w;
                    let thr = w.abs() / (m * rho_bar);
                    let z = xj - c;
                    c + z.signum() * (z.abs() - thr).max(0.0)
                }
            })
            .collect(),
    )
}

/// Dual of min_y max_{u ∈ [−1,1]^m} (1/m)Σ u_i h_i(y) + (ρ̄/2)‖y − x‖².
trait DualOracle {
    fn m(&self) -> usize;
    fn dim(&self) -> usize;
    /// y(u) = argmin_{y ∈ 𝒳} L(y, u). Returns false on numerical failure.
    fn primal(&self, u: &[f64], y: &mut [f64]) -> bool;
    fn residuals(&self, y: &[f64], h: &mut [f64]);
    fn x(&self) -> &[f64];
    fn rho_bar(&self) -> f64;
    fn initial_step(&self) -> f64;
    /// Factors of the dual Hessian on the coordinates `free`:
    /// ∂h_free/∂u_free = −J W Jᵀ with J the rows ∇h_i(y), i ∈ free, and W
    /// symmetric positive semidefinite. `None` where the map u ↦ y(u) is not
    /// available in closed form.
    fn newton_parts(
        &self,
        u: &[f64],
        y: &[f64],
        free: &[usize],
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)>;
}

struct AbsDual<'a> {
    a: &'a Rows,
    b: &'a [f64],
    set: &'a FeasibleSet,
    x: &'a [f64],
    rho_bar: f64,
}

impl AbsDual<'_> {
    fn unprojected(&self, u: &[f64], y: &mut [f64]) {
        y.copy_from_slice(self.x);
        let s = -1.0 / (self.a.nrows() as f64 * self.rho_bar);
        for (r, ui) in self.a.iter().zip(u) {
            if *ui != 0.0 {
                crate::vecops::axpy(s * ui, r, y);
            }
        }
    }
}

impl DualOracle for AbsDual<'_> {
    fn m(&self) -> usize {
        self.a.nrows()
    }
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn primal(&self, u: &[f64], y: &mut [f64]) -> bool {
        self.unprojected(u, y);
        self.set.project_in_place(y);
        true
    }
    fn residuals(&self, y: &[f64], h: &mut [f64]) {
        for ((hi, r), bi) in h.iter_mut().zip(self.a.iter()).zip(self.b) {
            *hi = dot(r, y) - bi;
        }
    }
    fn x(&self) -> &[f64] {
        self.x
    }
    fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    fn initial_step(&self) -> f64 {
        // 1/L with L = ‖A‖²/(m²ρ̄) ≤ ‖A‖_F²/(m²ρ̄)
        let m = self.a.nrows() as f64;
        let fro: f64 = self.a.iter().map(norm_sq).sum();
        m * m * self.rho_bar / fro
    }
    fn newton_parts(
        &self,
        u: &[f64],
        _y: &[f64],
        free: &[usize],
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let j = DMatrix::from_fn(free.len(), d, |r, c| self.a.row(free[r])[c]);
        let scale = 1.0 / (self.a.nrows() as f64 * self.rho_bar);
        // W = (derivative of the projection at the unprojected point)·scale
        let mut z = vec![0.0; d];
        self.unprojected(u, &mut z);
        let w = match self.set {
            FeasibleSet::FullSpace { .. } => DMatrix::identity(d, d) * scale,
            FeasibleSet::Box { lower, upper } => DMatrix::from_fn(d, d, |r, c| {
                if r == c && z[r] > lower[r] && z[r] < upper[r] {
                    scale
                } else {
                    0.0
                }
            }),
            FeasibleSet::Ball { center, radius } => {
                let diff: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                let n = norm(&diff);
                if n <= *radius {
                    DMatrix::identity(d, d) * scale
                } else {
                    let k = radius / n;
                    DMatrix::from_fn(d, d, |r, c| {
                        let id = if r == c { 1.0 } else { 0.0 };
                        k * scale * (id - diff[r] * diff[c] / (n * n))
                    })
                }
            }
        };
        Some((j, w))
    }
}

struct PhaseDual<'a> {
    a: &'a Rows,
    b: &'a [f64],
    set: &'a FeasibleSet,
    x: &'a [f64],
    rho_bar: f64,
}

impl PhaseDual<'_> {
    /// M(u) = ρ̄I + (2/m) Σ u_i a_i a_iᵀ
    fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let m = self.m() as f64;
        let mut mat = DMatrix::<f64>::zeros(d, d);
        for (r, ui) in self.a.iter().zip(u) {
            let w = 2.0 * ui / m;
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                let wj = w * r[j];
                for k in j..d {
                    mat[(j, k)] += wj * r[k];
                }
            }
        }
        for j in 0..d {
            mat[(j, j)] += self.rho_bar;
            for k in 0..j {
                mat[(j, k)] = mat[(k, j)];
            }
        }
        mat
    }
}

impl DualOracle for PhaseDual<'_> {
    fn m(&self) -> usize {
        self.a.nrows()
    }
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn primal(&self, u: &[f64], y: &mut [f64]) -> bool {
        // L(y, u) = ½ yᵀ M y − ρ̄ xᵀ y + const
        let d = self.dim();
        let mat = self.hessian(u);
        let rhs = DVector::from_iterator(d, self.x.iter().map(|v| self.rho_bar * v));
        match self.set {
            FeasibleSet::FullSpace { .. } => {
                let Some(ch) = mat.cholesky() else {
                    return false;
                };
                y.copy_from_slice(ch.solve(&rhs).as_slice());
                true
            }
            FeasibleSet::Ball { center, radius } => {
                // Shift z = y − c: min ½ zᵀMz − qᵀz with q = ρ̄x − Mc, ‖z‖ ≤ R.
                let c = DVector::from_column_slice(center);
                let q = &rhs - &mat * &c;
                let Some(z) = trust_region(&mat, &q, *radius) else {
                    return false;
                };
                for (yi, (zi, ci)) in y.iter_mut().zip(z.iter().zip(center)) {
                    *yi = zi + ci;
                }
                self.set.project_in_place(y);
                true
            }
            FeasibleSet::Box { .. } => false,
        }
    }
    fn residuals(&self, y: &[f64], h: &mut [f64]) {
        for ((hi, r), bi) in h.iter_mut().zip(self.a.iter()).zip(self.b) {
            let s = dot(r, y);
            *hi = s * s - bi;
        }
    }
    fn x(&self) -> &[f64] {
        self.x
    }
    fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    fn initial_step(&self) -> f64 {
        1.0
    }
    fn newton_parts(
        &self,
        u: &[f64],
        y: &[f64],
        free: &[usize],
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        if let FeasibleSet::Ball { center, radius } = self.set {
            if dist(y, center) >= radius * (1.0 - 1e-12) {
                return None;
            }
        }
        let d = self.dim();
        let j = DMatrix::from_fn(free.len(), d, |r, c| {
            let row = self.a.row(free[r]);
            2.0 * dot(row, y) * row[c]
        });
        let w = self.hessian(u).try_inverse()? / self.m() as f64;
        Some((j, w))
    }
}

/// Minimizer of ½ zᵀMz − qᵀz over ‖z‖ ≤ R for positive definite M
/// (Moré–Sorensen Newton iteration on the secular equation).
fn trust_region(mat: &DMatrix<f64>, q: &DVector<f64>, radius: f64) -> Option<DVector<f64>> {
    let d = q.len();
    let mut nu = 0.0;
    for _ in 0..100 {
        let mut shifted = mat.clone();
        for j in 0..d {
            shifted[(j, j)] += nu;
        }
        let ch = shifted.cholesky()?;
        let z = ch.solve(q);
        let zn = z.norm();
        if nu == 0.0 && zn <= radius {
            return Some(z);
        }
        if (zn - radius).abs() <= 1e-14 * radius {
            return Some(z);
        }
        let w = ch.l().solve_lower_triangular(&z)?;
        let wn2 = w.norm_squared();
        if wn2 == 0.0 {
            return Some(z);
        }
        let next = nu + (zn * zn / wn2) * (zn - radius) / radius;
        if !(next > 0.0) || (next - nu).abs() <= 1e-16 * nu.max(1e-300) {
            return Some(z);
        }
        nu = next;
    }
    let mut shifted = mat.clone();
    for j in 0..d {
        shifted[(j, j)] += nu;
    }
    Some(shifted.cholesky()?.solve(q))
}

#[derive(Clone)]
struct DualPoint {
    u: Vec<f64>,
    y: Vec<f64>,
    h: Vec<f64>,
    value: f64,
    gap: f64,
}

fn eval_dual<O: DualOracle>(o: &O, u: Vec<f64>) -> Option<DualPoint> {
    let mut y = vec![0.0; o.dim()];
    if !o.primal(&u, &mut y) {
        return None;
    }
    let mut h = vec![0.0; o.m()];
    o.residuals(&y, &mut h);
    let inv_m = 1.0 / o.m() as f64;
    let d2: f64 = y.iter().zip(o.x()).map(|(a, b)| (a - b) * (a - b)).sum();
    let lin: f64 = u.iter().zip(&h).map(|(ui, hi)| ui * hi).sum::<f64>() * inv_m;
    let value = lin + 0.5 * o.rho_bar() * d2;
    let gap = u
        .iter()
        .zip(&h)
        .map(|(ui, hi)| (hi.abs() - ui * hi).max(0.0))
        .sum::<f64>()
        * inv_m;
    Some(DualPoint {
        u,
        y,
        h,
        value,
        gap,
    })
}

fn clamp_box(u: &mut [f64]) {
    u.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
}

/// One projected Newton step on the dual: coordinates strictly inside the
/// box, or on a face with the gradient pointing inward, are moved by the
/// minimum-norm solution of the linearized system h_free(u + Δu) = 0.
fn newton_step<O: DualOracle>(o: &O, p: &DualPoint) -> Option<DualPoint> {
    let free: Vec<usize> = (0..o.m())
        .filter(|&i| {
            let (ui, hi) = (p.u[i], p.h[i]);
            ui.abs() < 1.0 || (ui >= 1.0 && hi < 0.0) || (ui <= -1.0 && hi > 0.0)
        })
        .collect();
    if free.is_empty() {
        return None;
    }
    let (j, w) = o.newton_parts(&p.u, &p.y, &free)?;
    let hz = DVector::from_iterator(free.len(), free.iter().map(|&i| p.h[i]));
    // J = U Σ Vᵀ; Δu = U Σ⁻¹ (VᵀWV)⁻¹ Σ⁻¹ Uᵀ h on the numerical range of J.
    let svd = j.svd(true, true);
    let (u_mat, vt) = (svd.u?, svd.v_t?);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
        .collect();
    let r = keep.len();
    let ur = DMatrix::from_fn(free.len(), r, |a, b| u_mat[(a, keep[b])]);
    let vr = DMatrix::from_fn(w.nrows(), r, |a, b| vt[(keep[b], a)]);
    let sinv = DVector::from_iterator(r, keep.iter().map(|&k| 1.0 / svd.singular_values[k]));
    let s_mat = vr.transpose() * &w * &vr;
    let rhs = (ur.transpose() * &hz).component_mul(&sinv);
    let q = match s_mat.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => s_mat.pseudo_inverse(1e-12).ok()? * rhs,
    };
    let du = ur * q.component_mul(&sinv);
    let mut u = p.u.clone();
    for (k, &i) in free.iter().enumerate() {
        u[i] += du[k];
    }
    clamp_box(&mut u);
    eval_dual(o, u)
}

/// FISTA with backtracking and function-value restart on the concave dual,
/// interleaved with projected Newton polishing.
fn dual_gradient<O: DualOracle>(
    o: &O,
    mu: f64,
    problem: &ProblemInstance,
    cfg: &MoreauConfig,
    warm: Option<&DualWarmStart>,
) -> ProxResult {
    const POLISH_EVERY: usize = 10;
    const POLISH_STEPS: usize = 6;
    const STALL_WINDOW: usize = 100;

    let m = o.m();
    let inv_m = 1.0 / m as f64;
    let dist_of = |gap: f64| (2.0 * gap / mu).sqrt();

    let (u0, mut step) = match warm {
        Some(w) if w.u.len() == m => {
            let mut u = w.u.clone();
            clamp_box(&mut u);
            (u, w.step)
        }
        _ => (vec![0.0; m], o.initial_step()),
    };
    let Some(mut cur) = eval_dual(o, u0).or_else(|| eval_dual(o, vec![0.0; m])) else {
        return subgradient_prox(problem, cfg, o.x());
    };
    let mut best = cur.clone();
    let mut mom = 1.0_f64;
    let mut extrap = None::<DualPoint>;
    let mut iters = 0;
    let mut last_gain = 0;

    // Below the rounding floor of the residuals the gap cannot shrink further.
    let done =
        |p: &DualPoint| dist_of(p.gap) <= cfg.inner_tol || p.gap <= 1e-15 * (1.0 + p.value.abs());

    while iters < cfg.inner_iters && !done(&best) && iters - last_gain <= STALL_WINDOW {
        if iters % POLISH_EVERY == 0 {
            let mut p = best.clone();
            for _ in 0..POLISH_STEPS {
                let Some(q) = newton_step(o, &p) else { break };
                if !(q.gap < p.gap) {
                    break;
                }
                p = q;
                if done(&p) {
                    break;
                }
            }
            if p.gap < best.gap {
                if p.value >= cur.value {
                    cur = p.clone();
                    extrap = None;
                    mom = 1.0;
                }
                best = p;
                last_gain = iters;
                if done(&best) {
                    break;
                }
            }
        }
        iters += 1;
        let base = extrap.take().unwrap_or_else(|| cur.clone());
        let mut accepted = None;
        for _ in 0..60 {
            let mut un: Vec<f64> = base
                .u
                .iter()
                .zip(&base.h)
                .map(|(ui, hi)| ui + step * hi * inv_m)
                .collect();
            clamp_box(&mut un);
            let Some(p) = eval_dual(o, un) else {
                step *= 0.5;
                continue;
            };
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((a, b), hi) in p.u.iter().zip(&base.u).zip(&base.h) {
                lin += hi * inv_m * (a - b);
                sq += (a - b) * (a - b);
            }
            let slack = 1e-15 * (1.0 + base.value.abs());
            if p.value >= base.value + lin - sq / (2.0 * step) - slack {
                accepted = Some(p);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        if next.gap < best.gap {
            if next.gap < 0.99 * best.gap {
                last_gain = iters;
            }
            best = next.clone();
        }
        if next.value < cur.value {
            // The extrapolated step lost ground: drop momentum and take the
            // next step from the current point.
            mom = 1.0;
            continue;
        }
        let mom_next = 0.5 * (1.0 + (1.0 + 4.0 * mom * mom).sqrt());
        let beta = (mom - 1.0) / mom_next;
        mom = mom_next;
        let mut v: Vec<f64> = next
            .u
            .iter()
            .zip(&cur.u)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        clamp_box(&mut v);
        cur = next;
        if beta > 0.0 {
            if let Some(p) = eval_dual(o, v) {
                if p.gap < best.gap {
                    best = p.clone();
                }
                extrap = Some(p);
            }
        }
        step *= 1.2;
    }

    let e = dist_of(best.gap);
    ProxResult {
        x_hat: best.y,
        subopt_bound: e,
        value_gap: best.gap,
        warning: e > cfg.inner_tol,
        method: ProxMethod::DualGradient,
        iterations: iters,
        warm: Some(DualWarmStart { u: best.u, step }),
    }
}

/// Projected subgradient descent on φ with steps 2/(μ(k+1)) and
/// k-weighted averaging; returns the best of the average, the last iterate
/// and the starting point, with φ − φ* ≤ 2L²/(μ(K+1)).
fn subgradient_prox(problem: &ProblemInstance, cfg: &MoreauConfig, x: &[f64]) -> ProxResult {
    let mu = cfg.mu(problem);
    let rb = cfg.rho_bar;
    let kmax = cfg.inner_iters;
    let mut y = x.to_vec();
    problem.set.project_in_place(&mut y);
    let start = y.clone();
    let mut avg = vec![0.0; x.len()];
    let mut wsum = 0.0;
    let mut g = vec![0.0; x.len()];
    let mut lmax: f64 = 0.0;
    for k in 1..=kmax {
        let kf = k as f64;
        crate::vecops::axpy(kf, &y, &mut avg);
        wsum += kf;
        problem.subgradient_into(&y, &mut g);
        for ((gi, yi), xi) in g.iter_mut().zip(&y).zip(x) {
            *gi += rb * (yi - xi);
        }
        lmax = lmax.max(norm(&g));
        crate::vecops::axpy(-2.0 / (mu * (kf + 1.0)), &g, &mut y);
        problem.set.project_in_place(&mut y);
    }
    avg.iter_mut().for_each(|v| *v /= wsum);
    problem.set.project_in_place(&mut avg);
    let candidates = [avg, y, start];
    let best = candidates
        .iter()
        .min_by(|a, b| {
            prox_objective(problem, rb, x, a).total_cmp(&prox_objective(problem, rb, x, b))
        })
        .expect("non-empty")
        .clone();
    let v = 2.0 * lmax * lmax / (mu * (kmax as f64 + 1.0));
    let e = (2.0 * v / mu).sqrt();
    ProxResult {
        x_hat: best,
        subopt_bound: e,
        value_gap: v,
        warning: e > cfg.inner_tol,
        method: ProxMethod::Subgradient,
        iterations: kmax,
        warm: None,
    }
}

/// Minimum of a convex instance by the proximal-point method from the set
/// center; polyhedral objectives are reached in finitely many steps.
pub(crate) fn convex_min_by_proximal_point(problem: &ProblemInstance) -> f64 {
    let mut conv = problem.clone();
    conv.rho = 0.0;
    let cfg = MoreauConfig::new(1e-3 * conv.lipschitz_g.max(1e-12))
        .with_tol(1e-12)
        .with_iters(20_000);
    let mut x = conv.set.center();
    let mut best = conv.value(&x);
    let mut warm: Option<DualWarmStart> = None;
    for _ in 0..200 {
        let Ok(r) = prox_point_warm(&conv, &cfg, &x, warm.as_ref()) else {
            break;
        };
        best = best.min(conv.value(&r.x_hat));
        let moved = dist(&r.x_hat, &x);
        x = r.x_hat;
        warm = r.warm;
        if moved <= 1e-13 * (1.0 + norm(&x)) {
            break;
        }
    }
    best
}
