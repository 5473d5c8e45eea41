//! Right-hand sides of the high-probability and in-expectation convergence
//! bounds, evaluated with the full constants where they are available.
//!
//! `log` is the natural logarithm throughout. The two fixed-horizon clipped
//! bounds are only stated up to constants; their hidden constants are set
//! to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// SsGD, general step sizes, η-weighted average.
    Thm1,
    /// SsGD with η_t = γ/√t.
    Cor1,
    /// SsGD with a tuned constant step for a fixed horizon.
    Cor2,
    /// Clipped SsGD, anytime schedules, high probability.
    Thm2,
    /// Clipped SsGD, fixed horizon, high probability.
    Thm3,
    /// Clipped SsGD, anytime schedules, in expectation.
    Thm4,
    /// Clipped SsGD, fixed horizon, in expectation.
    Thm5,
}

impl BoundKind {
    pub const ALL: [BoundKind; 7] = [
        BoundKind::Thm1,
        BoundKind::Cor1,
        BoundKind::Cor2,
        BoundKind::Thm2,
        BoundKind::Thm3,
        BoundKind::Thm4,
        BoundKind::Thm5,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Thm1 => "thm1",
            BoundKind::Cor1 => "cor1",
            BoundKind::Cor2 => "cor2",
            BoundKind::Thm2 => "thm2",
            BoundKind::Thm3 => "thm3",
            BoundKind::Thm4 => "thm4",
            BoundKind::Thm5 => "thm5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown bound `{s}`")))
    }
}

/// Step-size sums over t = 1..T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSums {
    pub sum: f64,
    pub sum_sq: f64,
    pub max: f64,
}

impl StepSums {
    pub fn from_etas(etas: &[f64]) -> Self {
        Self {
            sum: etas.iter().sum(),
            sum_sq: etas.iter().map(|e| e * e).sum(),
            max: etas.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Constants consumed by [`theory_bound`]; every field is optional and a
/// bound that needs an absent one reports it by name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub g: Option<f64>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub lam: Option<f64>,
    pub eta0: Option<f64>,
    pub batch: Option<f64>,
    pub delta1: Option<f64>,
    pub gamma: Option<f64>,
    pub steps: Option<StepSums>,
}

macro_rules! need {
    ($c:expr, $f:ident) => {
        $c.$f.ok_or(Error::MissingConstant(stringify!($f)))
    };
}

impl TheoryConstants {
    fn theta(&self) -> Result<f64> {
        let th = need!(self, theta)?;
        if !(th >= 0.5) {
            return Err(Error::param(
                "theta",
                format!("bounds need θ ≥ 1/2, got {th}"),
            ));
        }
        Ok(th)
    }

    fn delta(&self) -> Result<f64> {
        let d = need!(self, delta)?;
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::param(
                "delta",
                format!("must lie in (0, 1), got {d}"),
            ));
        }
        Ok(d)
    }

    fn horizon(&self) -> Result<f64> {
        let t = need!(self, t)?;
        if !(t >= 1.0) {
            return Err(Error::param("T", format!("must be at least 1, got {t}")));
        }
        Ok(t)
    }
}

/// Tail constant a(θ) of the sub-Weibull Freedman inequality.
pub fn lemma2_a(theta: f64, t: f64, delta: f64) -> f64 {
    if theta <= 0.5 {
        2.0
    } else if theta <= 1.0 {
        (4.0 * theta).powf(2.0 * theta) * std::f64::consts::E.powi(2)
    } else {
        (2f64.powf(2.0 * theta + 1.0) + 2.0) * gamma(2.0 * theta + 1.0)
            + 2f64.powf(3.0 * theta) * gamma(3.0 * theta + 1.0)
                / (3.0 * (4.0 * t / delta).ln().powf(theta - 1.0))
    }
}

/// Scale constant b(θ) of the sub-Weibull Freedman inequality.
pub fn lemma2_b(theta: f64, t: f64, delta: f64) -> f64 {
    if theta <= 0.5 {
        0.0
    } else if theta <= 1.0 {
        (4.0 * theta).powf(theta)
    } else {
        2.0 * (4.0 * t / delta).ln().powf(theta - 1.0)
    }
}

/// D(θ) = max{G·log(T/δ)^{θ−1}·σ, 2^{3θ+1}Γ(3θ+1)σ²}.
pub fn d_theta(theta: f64, sigma: f64, g: f64, t: f64, delta: f64) -> f64 {
    let a = g * (t / delta).ln().powf(theta - 1.0) * sigma;
    let b = 2f64.powf(3.0 * theta + 1.0) * gamma(3.0 * theta + 1.0) * sigma * sigma;
    a.max(b)
}

/// D̂(θ) = max{15·2^{3θ+1}Γ(3θ+1)σ², 36Gσ·log(8T/δ)^{θ−1}}.
pub fn d_hat_theta(theta: f64, sigma: f64, g: f64, t: f64, delta: f64) -> f64 {
    let a = 15.0 * 2f64.powf(3.0 * theta + 1.0) * gamma(3.0 * theta + 1.0) * sigma * sigma;
    let b = 36.0 * g * sigma * (8.0 * t / delta).ln().powf(theta - 1.0);
    a.max(b)
}

/// max{λ/T^{(p−1)/p}, G/√T}.
pub fn rate_factor(lam: f64, g: f64, p: f64, t: f64) -> f64 {
    (lam / t.powf((p - 1.0) / p)).max(g / t.sqrt())
}

/// Per-branch constants of the sub-Weibull bounds: the coefficient of
/// max η_t (times log(4/δ)) and the coefficient of ρΣη_t².
struct Branch {
    max_coef: f64,
    sq_coef: f64,
}

fn sub_weibull_branch(c: &TheoryConstants) -> Result<Branch> {
    let theta = c.theta()?;
    let sigma = need!(c, sigma)?;
    let g = need!(c, g)?;
    let l4 = (4.0 / c.delta()?).ln();
    let s2 = sigma * sigma;
    Ok(if theta <= 0.5 {
        Branch {
            max_coef: 36.0 * s2 * l4,
            sq_coef: 98.0 * l4 * s2 + 9.0 * g * g,
        }
    } else if theta <= 1.0 {
        Branch {
            max_coef: (2130.0 * s2).max(72.0 * g * sigma) * l4,
            sq_coef: 2130.0 * s2 * l4.powf(2.0 * theta) + 9.0 * g * g,
        }
    } else {
        let t = c.horizon()?;
        Branch {
            max_coef: d_hat_theta(theta, sigma, g, t, c.delta()?) * l4,
            sq_coef: 18.0 * (11.0 * theta * l4).powf(2.0 * theta) * s2 + 9.0 * g * g,
        }
    })
}

/// (σ/λ)^p, zero when σ = 0.
fn tail_ratio(sigma: f64, lam: f64, p: f64) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(0.0);
    }
    if !(lam > 0.0) {
        return Err(Error::param("lambda", "must be positive when sigma > 0"));
    }
    Ok((sigma / lam).powf(p))
}

struct Clipped {
    delta1: f64,
    eta0: f64,
    g: f64,
    rho: f64,
    t: f64,
    heavy: f64,
    rate: f64,
}

fn clipped(c: &TheoryConstants) -> Result<Clipped> {
    let p = need!(c, p)?;
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::param("p", format!("must lie in (1, 2], got {p}")));
    }
    let sigma = need!(c, sigma)?;
    let lam = need!(c, lam)?;
    let g = need!(c, g)?;
    let batch = need!(c, batch)?;
    let t = c.horizon()?;
    Ok(Clipped {
        delta1: need!(c, delta1)?,
        eta0: need!(c, eta0)?,
        g,
        rho: need!(c, rho)?,
        t,
        heavy: tail_ratio(sigma, lam, p)? * batch.powf(1.0 - p),
        rate: rate_factor(lam, g, p, t),
    })
}

/// Evaluates the named bound.
pub fn theory_bound(c: &TheoryConstants, which: BoundKind) -> Result<f64> {
    match which {
        BoundKind::Thm1 => {
            let b = sub_weibull_branch(c)?;
            let s = need!(c, steps)?;
            let rho = need!(c, rho)?;
            let delta1 = need!(c, delta1)?;
            Ok((3.0 * delta1 + b.max_coef * s.max) / s.sum + b.sq_coef * rho * s.sum_sq / s.sum)
        }
        BoundKind::Cor1 => {
            let b = sub_weibull_branch(c)?;
            let t = c.horizon()?;
            let gamma = need!(c, gamma)?;
            let rho = need!(c, rho)?;
            let delta1 = need!(c, delta1)?;
            let rt = t.sqrt();
            Ok(3.0 * delta1 / (gamma * rt)
                + b.max_coef / rt
                + gamma * rho * b.sq_coef * (std::f64::consts::E * t).ln() / rt)
        }
        BoundKind::Cor2 => {
            let b = sub_weibull_branch(c)?;
            let t = c.horizon()?;
            let rho = need!(c, rho)?;
            let delta1 = need!(c, delta1)?;
            Ok((3.0 * rho * delta1 * b.sq_coef / t).sqrt() + b.max_coef / t)
        }
        BoundKind::Thm2 => {
            let k = clipped(c)?;
            let l4 = (4.0 / c.delta()?).ln();
            let let_ = (std::f64::consts::E * k.t).ln();
            Ok((2.0 * k.delta1 / k.eta0
                + (84.0 * k.g + 364.0 * k.rho * k.eta0) * (k.heavy * let_ + l4)
                + 4.0 * k.rho * k.eta0 * let_)
                * k.rate)
        }
        BoundKind::Thm3 => {
            let k = clipped(c)?;
            let l1 = (1.0 / c.delta()?).ln();
            Ok((k.delta1 / k.eta0 + (k.g + k.rho * k.eta0) * (k.heavy + l1)) * k.rate)
        }
        BoundKind::Thm4 => {
            let k = clipped(c)?;
            let let_ = (std::f64::consts::E * k.t).ln();
            Ok((2.0 * k.delta1 / k.eta0
                + (32.0 * k.g + 320.0 * k.rho * k.eta0) * k.heavy * let_
                + 4.0 * k.rho * k.eta0 * let_)
                * k.rate)
        }
        BoundKind::Thm5 => {
            let k = clipped(c)?;
            Ok((k.delta1 / k.eta0 + (k.rho * k.eta0 + k.g) * k.heavy + k.rho * k.eta0) * k.rate)
        }
    }
}

/// Tuned constant step of the fixed-horizon SsGD bound,
/// η = √(3Δ₁/(ρ·C·T)) with C the coefficient of ρΣη_t² in the matching
/// θ-branch (σ² kept in every branch).
pub fn cor2_step(c: &TheoryConstants) -> Result<f64> {
    let b = sub_weibull_branch(c)?;
    let t = c.horizon()?;
    let rho = need!(c, rho)?;
    let delta1 = need!(c, delta1)?;
    if !(rho > 0.0) {
        return Err(Error::param("rho", "must be positive for the tuned step"));
    }
    Ok((3.0 * delta1 / (rho * b.sq_coef * t)).sqrt())
}
