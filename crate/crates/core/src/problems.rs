//! Weakly convex test objectives with exact subgradient oracles, feasible
//! sets and their Euclidean projections.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vecops::{dot, norm, norm_sq};

/// Absolute tolerance used for set membership after projection.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Nominal weak-convexity modulus carried by convex instances.
pub const NOMINAL_CONVEX_RHO: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    FullSpace { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn full(dim: usize) -> Self {
        FeasibleSet::FullSpace { dim }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param(
                "radius",
                format!("must be positive, got {radius}"),
            ));
        }
        if center.is_empty() {
            return Err(Error::param("center", "empty"));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn unit_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::param("lower", "empty"));
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| !(l <= u)) {
            return Err(Error::param(
                "upper",
                format!(
                    "lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                ),
            ));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::FullSpace { dim } => *dim,
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    /// Ball center, box midpoint, or the origin.
    pub fn center(&self) -> Vec<f64> {
        match self {
            FeasibleSet::FullSpace { dim } => vec![0.0; *dim],
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
        }
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projection without the dimension check; callers guarantee `y.len() == dim`.
    pub fn project_in_place(&self, y: &mut [f64]) {
        match self {
            FeasibleSet::FullSpace { .. } => {}
            FeasibleSet::Ball { center, radius } => {
                let d2: f64 = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                if d2 > radius * radius {
                    let s = radius / d2.sqrt();
                    for (a, c) in y.iter_mut().zip(center) {
                        *a = c + (*a - c) * s;
                    }
                }
            }
            FeasibleSet::Box { lower, upper } => {
                for ((a, l), u) in y.iter_mut().zip(lower).zip(upper) {
                    *a = a.clamp(*l, *u);
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::FullSpace { .. } => x.iter().all(|v| v.is_finite()),
            FeasibleSet::Ball { center, radius } => crate::vecops::dist(x, center) <= radius + tol,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
        }
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Row-major dense matrix of measurement vectors `a_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rows {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl Rows {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::param("A", "need at least one row"));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::param("A", "rows must be non-empty"));
        }
        let mut data = Vec::with_capacity(m * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { m, d, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn nrows(&self) -> usize {
        self.m
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }
}

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SubgradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The objective families the library knows how to evaluate. Structured
/// variants also admit accurate proximal solves; `Custom` falls back to a
/// generic subgradient inner solver.
#[derive(Clone)]
pub enum Objective {
    /// `(1/m) Σ |⟨a_i, x⟩ − b_i|`
    AbsRegression {
        a: Rows,
        b: Vec<f64>,
    },
    /// `(1/m) Σ |⟨a_i, x⟩² − b_i|`
    PhaseRetrieval {
        a: Rows,
        b: Vec<f64>,
    },
    /// `⟨c, x⟩ + offset`
    Linear {
        c: Vec<f64>,
        offset: f64,
    },
    Constant(f64),
    Custom {
        value: ValueFn,
        subgradient: SubgradFn,
    },
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::AbsRegression { a, .. } => {
                write!(f, "AbsRegression(m={}, d={})", a.nrows(), a.ncols())
            }
            Objective::PhaseRetrieval { a, .. } => {
                write!(f, "PhaseRetrieval(m={}, d={})", a.nrows(), a.ncols())
            }
            Objective::Linear { c, offset } => write!(f, "Linear({c:?}, {offset})"),
            Objective::Constant(c) => write!(f, "Constant({c})"),
            Objective::Custom { .. } => write!(f, "Custom"),
        }
    }
}

#[inline]
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A weakly convex objective over a feasible set together with the
/// constants the convergence theory needs.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub name: String,
    pub objective: Objective,
    /// Weak-convexity modulus ρ.
    pub rho: f64,
    /// Subgradient bound G, valid on the feasible set.
    pub lipschitz_g: f64,
    pub set: FeasibleSet,
    /// Reference minimum value over the set (exact or estimated, see `f_min_exact`).
    pub f_min: f64,
    pub f_min_exact: bool,
    /// Planted minimizer when the instance was generated around one.
    pub planted: Option<Vec<f64>>,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::AbsRegression { a, b } => {
                let m = a.nrows() as f64;
                a.iter()
                    .zip(b)
                    .map(|(r, bi)| (dot(r, x) - bi).abs())
                    .sum::<f64>()
                    / m
            }
            Objective::PhaseRetrieval { a, b } => {
                let m = a.nrows() as f64;
                a.iter()
                    .zip(b)
                    .map(|(r, bi)| {
                        let s = dot(r, x);
                        (s * s - bi).abs()
                    })
                    .sum::<f64>()
                    / m
            }
            Objective::Linear { c, offset } => dot(c, x) + offset,
            Objective::Constant(c) => *c,
            Objective::Custom { value, .. } => value(x),
        }
    }

    /// One element of ∂f(x); kinks select sign(0) = 0.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.subgradient_into(x, &mut out);
        out
    }

    pub fn subgradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.objective {
            Objective::AbsRegression { a, b } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let inv_m = 1.0 / a.nrows() as f64;
                for (r, bi) in a.iter().zip(b) {
                    let s = sign0(dot(r, x) - bi);
                    if s != 0.0 {
                        crate::vecops::axpy(s * inv_m, r, out);
                    }
                }
            }
            Objective::PhaseRetrieval { a, b } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let inv_m = 1.0 / a.nrows() as f64;
                for (r, bi) in a.iter().zip(b) {
                    let s = dot(r, x);
                    let sg = sign0(s * s - bi);
                    if sg != 0.0 {
                        crate::vecops::axpy(2.0 * sg * s * inv_m, r, out);
                    }
                }
            }
            Objective::Linear { c, .. } => out.copy_from_slice(c),
            Objective::Constant(_) => out.iter_mut().for_each(|v| *v = 0.0),
            Objective::Custom { subgradient, .. } => {
                let g = subgradient(x);
                out.copy_from_slice(&g);
            }
        }
    }

    /// Default starting point: the set center.
    pub fn default_start(&self) -> Vec<f64> {
        self.set.center()
    }

    /// A user-supplied instance. The caller vouches for ρ, G and `f_min`;
    /// nothing here checks that the set lies inside the domain of `f`.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        value: ValueFn,
        subgradient: SubgradFn,
        rho: f64,
        lipschitz_g: f64,
        set: FeasibleSet,
        f_min: f64,
    ) -> Result<Self> {
        check_constants(rho, lipschitz_g)?;
        Ok(Self {
            name: name.into(),
            objective: Objective::Custom { value, subgradient },
            rho,
            lipschitz_g,
            set,
            f_min,
            f_min_exact: false,
            planted: None,
        })
    }

    /// `f(x) = ⟨c, x⟩ + offset` on a bounded set. G = ‖c‖, nominal ρ.
    pub fn linear(
        name: impl Into<String>,
        c: Vec<f64>,
        offset: f64,
        set: FeasibleSet,
    ) -> Result<Self> {
        set.check_dim(c.len())?;
        let g = norm(&c).max(f64::MIN_POSITIVE);
        let f_min = match &set {
            FeasibleSet::FullSpace { .. } => {
                if norm(&c) > 0.0 {
                    return Err(Error::param(
                        "set",
                        "linear objective is unbounded below on the full space",
                    ));
                }
                offset
            }
            FeasibleSet::Ball { center, radius } => dot(&c, center) + offset - radius * norm(&c),
            FeasibleSet::Box { lower, upper } => {
                offset
                    + c.iter()
                        .zip(lower.iter().zip(upper))
                        .map(|(ci, (l, u))| (ci * l).min(ci * u))
                        .sum::<f64>()
            }
        };
        Ok(Self {
            name: name.into(),
            objective: Objective::Linear { c, offset },
            rho: NOMINAL_CONVEX_RHO,
            lipschitz_g: g,
            set,
            f_min,
            f_min_exact: true,
            planted: None,
        })
    }

    pub fn constant(name: impl Into<String>, value: f64, set: FeasibleSet) -> Self {
        Self {
            name: name.into(),
            objective: Objective::Constant(value),
            rho: NOMINAL_CONVEX_RHO,
            // Any positive G bounds the zero subgradient.
            lipschitz_g: 1.0,
            set,
            f_min: value,
            f_min_exact: true,
            planted: None,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(Error::param("rho", "must be non-negative"));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn check_constants(rho: f64, g: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::param(
            "rho",
            format!("must be non-negative, got {rho}"),
        ));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::param(
            "lipschitz_g",
            format!("must be positive, got {g}"),
        ));
    }
    Ok(())
}

/// Robust linear regression `(1/m) Σ |⟨a_i, x⟩ − b_i|` on `set`.
///
/// Convex, so any ρ works; the instance carries the nominal
/// [`NOMINAL_CONVEX_RHO`]. When `f_min` is `None` it is computed for
/// `d ≤ 2` by a proximal-point oracle and rejected otherwise.
pub fn make_abs_regression(
    a: &[Vec<f64>],
    b: &[f64],
    set: FeasibleSet,
    f_min: Option<f64>,
) -> Result<ProblemInstance> {
    let rows = Rows::from_rows(a)?;
    if b.len() != rows.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rows.nrows(),
            got: b.len(),
        });
    }
    set.check_dim(rows.ncols())?;
    if let Some(i) = rows.iter().position(|r| norm_sq(r) == 0.0) {
        return Err(Error::param("A", format!("row {i} is zero")));
    }
    let g = rows.iter().map(norm).sum::<f64>() / rows.nrows() as f64;
    let mut inst = ProblemInstance {
        name: format!("abs_reg_d{}_m{}", rows.ncols(), rows.nrows()),
        objective: Objective::AbsRegression {
            a: rows,
            b: b.to_vec(),
        },
        rho: NOMINAL_CONVEX_RHO,
        lipschitz_g: g,
        set,
        f_min: 0.0,
        f_min_exact: true,
        planted: None,
    };
    match f_min {
        Some(v) => inst.f_min = v,
        None => {
            if inst.dim() > 2 {
                return Err(Error::param("f_min", "must be supplied for d > 2"));
            }
            inst.f_min = crate::moreau::convex_min_by_proximal_point(&inst);
        }
    }
    Ok(inst)
}

/// Robust phase retrieval `(1/m) Σ |⟨a_i, x⟩² − b_i|` on `Ball(0, radius)`.
///
/// ρ = (2/m) Σ ‖a_i‖² and G = ρ · radius. `f_min` is the best value seen by
/// projected deterministic subgradient descent started at the planted
/// signal (or the origin when none is given); it is a reference value, not a
/// certified minimum.
pub fn make_phase_retrieval(
    a: &[Vec<f64>],
    b: &[f64],
    radius: f64,
    planted: Option<&[f64]>,
) -> Result<ProblemInstance> {
    if !(radius > 0.0) {
        return Err(Error::param(
            "radius",
            format!("must be positive, got {radius}"),
        ));
    }
    let rows = Rows::from_rows(a)?;
    if b.len() != rows.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rows.nrows(),
            got: b.len(),
        });
    }
    let d = rows.ncols();
    let m = rows.nrows() as f64;
    let rho = 2.0 * rows.iter().map(norm_sq).sum::<f64>() / m;
    if rho <= 0.0 {
        return Err(Error::param("A", "all rows are zero"));
    }
    let set = FeasibleSet::ball(vec![0.0; d], radius)?;
    let mut inst = ProblemInstance {
        name: format!("phase_d{}_m{}", d, rows.nrows()),
        objective: Objective::PhaseRetrieval {
            a: rows,
            b: b.to_vec(),
        },
        rho,
        lipschitz_g: rho * radius,
        set,
        f_min: 0.0,
        f_min_exact: false,
        planted: planted.map(|p| p.to_vec()),
    };
    let start = match planted {
        Some(p) => inst.set.project(p)?,
        None => inst.set.center(),
    };
    inst.f_min = estimate_min_by_descent(&inst, &start, 10_000);
    Ok(inst)
}

/// Best objective value along `iters` steps of projected deterministic
/// subgradient descent with steps `r / (G √k)`.
pub fn estimate_min_by_descent(p: &ProblemInstance, start: &[f64], iters: usize) -> f64 {
    let mut x = start.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut best = p.value(&x);
    let scale = match &p.set {
        FeasibleSet::Ball { radius, .. } => *radius,
        _ => 1.0,
    };
    for k in 1..=iters {
        p.subgradient_into(&x, &mut g);
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let step = 0.1 * scale / (p.lipschitz_g * (k as f64).sqrt());
        crate::vecops::axpy(-step, &g, &mut x);
        p.set.project_in_place(&mut x);
        best = best.min(p.value(&x));
    }
    best
}

/// Read a plain-text CSV of matrix rows. Blank lines and `#` comments are skipped.
pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "{}:{}: bad number `{}`",
                        path.display(),
                        lineno + 1,
                        tok.trim()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

/// Seed used for preset data when the config does not override it.
pub const DEFAULT_PROBLEM_SEED: u64 = 20_250_717;

fn gaussian_rows(rng: &mut impl Rng, m: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            (0..d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Planted robust regression: `a_ij ~ N(0,1)`, `x* ~ N(0, I/d)`, `b = A x*`,
/// on `Ball(0, 10)` (or the full space). `f_min = 0` exactly.
pub fn abs_regression_preset(
    d: usize,
    m: usize,
    full_space: bool,
    seed: u64,
) -> Result<ProblemInstance> {
    if d == 0 || m == 0 {
        return Err(Error::param("preset", "d and m must be positive"));
    }
    let mut rng = RngStream::new(seed, 0xAB5).rng();
    let a = gaussian_rows(&mut rng, m, d, 1.0);
    let planted: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt())
        .collect();
    let b: Vec<f64> = a.iter().map(|r| dot(r, &planted)).collect();
    let set = if full_space {
        FeasibleSet::full(d)
    } else {
        FeasibleSet::ball(vec![0.0; d], 10.0)?
    };
    let mut inst = make_abs_regression(&a, &b, set, Some(0.0))?;
    inst.planted = Some(planted);
    inst.name = if full_space {
        format!("abs_reg_d{d}_free")
    } else {
        format!("abs_reg_d{d}")
    };
    Ok(inst)
}

/// Planted robust phase retrieval: `a_i ~ N(0, I/d)`, `x*` uniform on the
/// unit sphere, `b_i = ⟨a_i, x*⟩²`, on `Ball(0, 2)`.
pub fn phase_retrieval_preset(d: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    if d == 0 || m == 0 {
        return Err(Error::param("preset", "d and m must be positive"));
    }
    let mut rng = RngStream::new(seed, 0xF45E).rng();
    let a = gaussian_rows(&mut rng, m, d, 1.0 / (d as f64).sqrt());
    let mut planted: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let n = norm(&planted);
    planted.iter_mut().for_each(|v| *v /= n);
    let b: Vec<f64> = a
        .iter()
        .map(|r| {
            let s = dot(r, &planted);
            s * s
        })
        .collect();
    let mut inst = make_phase_retrieval(&a, &b, 2.0, Some(&planted))?;
    inst.name = format!("phase_d{d}_m{m}");
    Ok(inst)
}

/// Resolve a problem preset name: `abs_reg_d<d>[_m<m>][_free]` (m defaults
/// to 4d) or `phase_d<d>_m<m>`.
pub fn problem_preset(name: &str, seed: u64) -> Result<ProblemInstance> {
    fn num(s: &str) -> Option<usize> {
        s.parse().ok().filter(|v: &usize| *v > 0)
    }
    if let Some(rest) = name.strip_prefix("abs_reg_d") {
        let (rest, free) = match rest.strip_suffix("_free") {
            Some(r) => (r, true),
            None => (rest, false),
        };
        let (d, m) = match rest.split_once("_m") {
            Some((d, m)) => (num(d), num(m)),
            None => (num(rest), num(rest).map(|d| 4 * d)),
        };
        if let (Some(d), Some(m)) = (d, m) {
            let mut p = abs_regression_preset(d, m, free, seed)?;
            p.name = name.to_string();
            return Ok(p);
        }
    } else if let Some(rest) = name.strip_prefix("phase_d") {
        if let Some((d, m)) = rest.split_once("_m") {
            if let (Some(d), Some(m)) = (num(d), num(m)) {
                return phase_retrieval_preset(d, m, seed);
            }
        }
    }
    Err(Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn project_ball_scales_to_radius() {
        let s = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(close(&s.project(&[3.0, 4.0]).unwrap(), &[0.6, 0.8], 1e-15));
    }

    #[test]
    fn project_full_space_is_identity() {
        let s = FeasibleSet::full(3);
        let y = [1e9, -2.5, 0.0];
        assert_eq!(s.project(&y).unwrap(), y.to_vec());
    }

    #[test]
    fn project_box_clamps() {
        let s = FeasibleSet::unit_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(s.project(&[-2.0, 0.5]).unwrap(), vec![0.0, 0.5]);
    }

    #[test]
    fn project_dimension_mismatch_errors() {
        let s = FeasibleSet::ball(vec![0.0; 2], 1.0).unwrap();
        assert!(matches!(
            s.project(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn set_constructors_validate() {
        assert!(FeasibleSet::ball(vec![0.0], 0.0).is_err());
        assert!(FeasibleSet::ball(vec![0.0], -1.0).is_err());
        assert!(FeasibleSet::unit_box(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::unit_box(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn abs_regression_examples() {
        let p = make_abs_regression(&[vec![1.0]], &[0.0], FeasibleSet::full(1), None).unwrap();
        assert_eq!(p.value(&[3.0]), 3.0);
        assert_eq!(p.subgradient(&[3.0]), vec![1.0]);
        assert_eq!(p.value(&[0.0]), 0.0);
        assert_eq!(p.subgradient(&[0.0]), vec![0.0]);
        assert!(p.f_min.abs() < 1e-12);
        assert_eq!(p.rho, NOMINAL_CONVEX_RHO);

        let q = make_abs_regression(
            &[vec![1.0], vec![-1.0]],
            &[1.0, 1.0],
            FeasibleSet::full(1),
            None,
        )
        .unwrap();
        // (|0-1| + |0-1|)/2 = 1, signs -1·1 + -1·(-1) = 0
        assert_eq!(q.value(&[0.0]), 1.0);
        assert_eq!(q.subgradient(&[0.0]), vec![0.0]);
        assert!((q.f_min - 1.0).abs() < 1e-9, "f_min = {}", q.f_min);
    }

    #[test]
    fn abs_regression_rejects_zero_row() {
        let r = make_abs_regression(
            &[vec![1.0, 0.0], vec![0.0, 0.0]],
            &[0.0, 0.0],
            FeasibleSet::full(2),
            None,
        );
        assert!(matches!(r, Err(Error::InvalidParameter { name: "A", .. })));
    }

    #[test]
    fn abs_regression_g_is_mean_row_norm() {
        let p = make_abs_regression(
            &[vec![3.0, 4.0], vec![0.0, 1.0]],
            &[0.0, 0.0],
            FeasibleSet::full(2),
            None,
        )
        .unwrap();
        assert!((p.lipschitz_g - 3.0).abs() < 1e-15);
    }

    #[test]
    fn abs_regression_needs_f_min_in_high_dim() {
        let r = make_abs_regression(&[vec![1.0, 0.0, 0.0]], &[0.0], FeasibleSet::full(3), None);
        assert!(r.is_err());
    }

    #[test]
    fn phase_retrieval_examples() {
        let p = make_phase_retrieval(&[vec![1.0]], &[1.0], 3.0, Some(&[1.0])).unwrap();
        assert_eq!(p.value(&[2.0]), 3.0);
        assert_eq!(p.subgradient(&[2.0]), vec![4.0]);
        assert_eq!(p.value(&[1.0]), 0.0);
        assert_eq!(p.f_min, 0.0);

        let q = make_phase_retrieval(&[vec![2.0]], &[0.0], 1.0, None).unwrap();
        assert_eq!(q.rho, 8.0);
        assert_eq!(q.lipschitz_g, 8.0);
    }

    #[test]
    fn phase_retrieval_rejects_bad_radius() {
        assert!(make_phase_retrieval(&[vec![1.0]], &[1.0], 0.0, None).is_err());
        assert!(make_phase_retrieval(&[vec![1.0]], &[1.0], -2.0, None).is_err());
    }

    #[test]
    fn presets_resolve() {
        let p = problem_preset("abs_reg_d10", DEFAULT_PROBLEM_SEED).unwrap();
        assert_eq!(p.dim(), 10);
        assert_eq!(p.name, "abs_reg_d10");
        assert_eq!(p.f_min, 0.0);
        let planted = p.planted.clone().unwrap();
        assert!(p.value(&planted).abs() < 1e-12);

        let q = problem_preset("phase_d10_m30", DEFAULT_PROBLEM_SEED).unwrap();
        assert_eq!(q.dim(), 10);
        assert!(q.f_min.abs() < 1e-12);

        let free = problem_preset("abs_reg_d3_m7_free", 1).unwrap();
        assert!(matches!(free.set, FeasibleSet::FullSpace { dim: 3 }));

        assert!(matches!(
            problem_preset("nope", 1),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn matrix_csv_round() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        std::fs::write(&path, "# rows\n1, 2\n\n3,4\n").unwrap();
        assert_eq!(
            load_matrix_csv(&path).unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 4.0]]
        );
        std::fs::write(&path, "1,x\n").unwrap();
        assert!(load_matrix_csv(&path).is_err());
    }
}
