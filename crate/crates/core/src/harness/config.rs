//! Flat `key = value` experiment configs with dotted keys.
//!
//! ```text
//! # comment
//! problem = abs_reg_d10
//! noise.kind = pareto
//! noise.sigma = 1
//! T = 100, 1000, 10000
//! ```
//!
//! A `preset = <name>` line loads a built-in config first; the remaining
//! lines override it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::preset_text;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::problems::DEFAULT_PROBLEM_SEED;
use crate::theory::BoundKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ssgd,
    ClippedSsgd,
}

/// Step-size rule; horizon-dependent rules are resolved per T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSpec {
    InverseSqrt {
        gamma: f64,
    },
    Constant {
        eta: f64,
    },
    /// The tuned constant step of the fixed-horizon SsGD bound.
    Cor2Tuned,
    ClipCoupledAnytime {
        eta0: f64,
    },
    ClipCoupledFixedT {
        eta0: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipKind {
    Anytime,
    FixedT,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub kind: ClipKind,
    pub lambda: f64,
    pub p: f64,
    /// Subgradient bound in λ_t = max{2G, ·}; the problem's G when absent.
    pub g: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum RhoBarRule {
    /// ρ̄ = factor·ρ (the 3ρ and 2ρ rules).
    Times(f64),
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Σ_t (η_t/Σ_s η_s)‖∇f_{1/ρ̄}(x_t)‖²
    Weighted,
    /// (1/T)Σ_t ‖∇f_{1/ρ̄}(x_t)‖²
    Uniform,
}

/// Parameters of the Monte-Carlo validation grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateSpec {
    pub p: Vec<f64>,
    pub batch: Vec<usize>,
    pub lambda: Vec<f64>,
    pub n_trials: usize,
    pub seed: u64,
    pub dim: usize,
    /// ‖mu‖ of the clipped mean's centre (along the first axis).
    pub mu_norm: f64,
    /// Noise scale σ of the validation draws.
    pub sigma: f64,
    /// Pareto tail index α = min(p + gap, 2); p = 2 uses Gaussian noise.
    pub alpha_gap: f64,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        Self {
            p: vec![1.2, 1.5, 2.0],
            batch: vec![1, 4, 16],
            lambda: vec![4.0, 16.0],
            n_trials: 1_000_000,
            seed: 7,
            dim: 10,
            mu_norm: 1.0,
            sigma: 1.0,
            alpha_gap: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: String,
    pub problem_seed: u64,
    pub x0: Option<Vec<f64>>,
    pub noise: NoiseModel,
    pub algorithm: Algorithm,
    pub step: StepSpec,
    pub clip: Option<ClipSpec>,
    pub batch: usize,
    pub t_values: Vec<usize>,
    pub n_runs: usize,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub rho_bar: RhoBarRule,
    pub inner_iters: usize,
    /// Inner tolerance; the metric or lemma default applies when absent.
    pub inner_tol: Option<f64>,
    pub metric: MetricKind,
    pub theory: Option<BoundKind>,
    pub theory_delta: f64,
    /// Gating check on the fitted slope of the median metric.
    pub slope_range: Option<(f64, f64)>,
    /// Also run the clipped counterpart of an SsGD config.
    pub compare_clipped: bool,
    /// Non-gating expectation on the number of diverged SsGD runs.
    pub min_diverged: Option<usize>,
    pub out: PathBuf,
    pub validate: ValidateSpec,
}

const KEYS: &[&str] = &[
    "name",
    "preset",
    "problem",
    "problem.seed",
    "problem.x0",
    "noise.kind",
    "noise.sigma",
    "noise.theta",
    "noise.p",
    "noise.alpha",
    "algorithm",
    "step.kind",
    "step.gamma",
    "step.eta",
    "step.eta0",
    "clip.kind",
    "clip.lambda",
    "clip.p",
    "clip.g",
    "batch",
    "T",
    "n_runs",
    "seed",
    "delta",
    "moreau.rho_bar",
    "moreau.inner_iters",
    "moreau.inner_tol",
    "metric",
    "theory",
    "theory.delta",
    "check.slope_min",
    "check.slope_max",
    "check.min_diverged",
    "compare_clipped",
    "out",
    "validate.p",
    "validate.batch",
    "validate.lambda",
    "validate.n_trials",
    "validate.seed",
    "validate.dim",
    "validate.mu_norm",
    "validate.sigma",
    "validate.alpha_gap",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Splits `text` into key/value pairs, rejecting unknown and duplicate keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if v.is_empty() {
            return Err(cfg_err(format!("line {}: empty value for `{k}`", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg_err(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(map)
}

struct Pairs {
    map: BTreeMap<String, String>,
}

impl Pairs {
    fn str(&self, k: &str) -> Option<&str> {
        self.map.get(k).map(String::as_str)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn req(&self, k: &str) -> Result<&str> {
        self.str(k)
            .ok_or_else(|| cfg_err(format!("missing key `{k}`")))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>> {
        self.str(k)
            .map(|v| {
                parse_scaled::<T>(v).ok_or_else(|| cfg_err(format!("`{k}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn req_num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        self.num(k)?
            .ok_or_else(|| cfg_err(format!("missing key `{k}`")))
    }

    fn list<T: std::str::FromStr>(&self, k: &str) -> Result<Option<Vec<T>>> {
        self.str(k)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        parse_scaled::<T>(s)
                            .ok_or_else(|| cfg_err(format!("`{k}`: cannot parse `{s}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn bool(&self, k: &str) -> Result<bool> {
        match self.str(k) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => Err(cfg_err(format!("`{k}`: expected true or false, got `{v}`"))),
        }
    }
}

/// Parses plain numbers and integer powers of ten such as `1e5`.
fn parse_scaled<T: std::str::FromStr>(s: &str) -> Option<T> {
    if let Ok(v) = s.parse::<T>() {
        return Some(v);
    }
    let f: f64 = s.parse().ok()?;
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64).parse().ok()
    } else {
        None
    }
}

fn noise_from(p: &Pairs) -> Result<NoiseModel> {
    let kind = p.str("noise.kind").unwrap_or("zero");
    let sigma: f64 = p.num("noise.sigma")?.unwrap_or(0.0);
    if kind == "zero" || sigma == 0.0 {
        if sigma < 0.0 {
            return Err(cfg_err("`noise.sigma` must be non-negative"));
        }
        return Ok(NoiseModel::Zero);
    }
    match kind {
        "gaussian" => NoiseModel::gaussian(sigma),
        "sub_weibull" => NoiseModel::sub_weibull(sigma, p.req_num("noise.theta")?),
        "pareto" => NoiseModel::pareto(sigma, p.req_num("noise.p")?, p.req_num("noise.alpha")?),
        other => Err(cfg_err(format!("unknown noise kind `{other}`"))),
    }
}

fn step_from(p: &Pairs) -> Result<StepSpec> {
    Ok(match p.req("step.kind")? {
        "inverse_sqrt" => StepSpec::InverseSqrt {
            gamma: p.req_num("step.gamma")?,
        },
        "constant" => StepSpec::Constant {
            eta: p.req_num("step.eta")?,
        },
        "cor2_tuned" => StepSpec::Cor2Tuned,
        "clip_coupled_anytime" => StepSpec::ClipCoupledAnytime {
            eta0: p.req_num("step.eta0")?,
        },
        "clip_coupled_fixed_t" => StepSpec::ClipCoupledFixedT {
            eta0: p.req_num("step.eta0")?,
        },
        other => return Err(cfg_err(format!("unknown step kind `{other}`"))),
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(cfg_err(format!("`{name}` must be positive, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses config text. Relative output paths are resolved against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = parse_pairs(text)?;
        if let Some(name) = map.remove("preset") {
            let base = preset_text(&name).ok_or(Error::UnknownPreset(name))?;
            let mut merged = parse_pairs(base)?;
            merged.extend(map);
            map = merged;
        }
        let p = Pairs { map };

        let algorithm = match p.str("algorithm").unwrap_or("ssgd") {
            "ssgd" => Algorithm::Ssgd,
            "clipped_ssgd" => Algorithm::ClippedSsgd,
            other => return Err(cfg_err(format!("unknown algorithm `{other}`"))),
        };
        let step = step_from(&p)?;
        let clip = if p.has_prefix("clip.") {
            if algorithm == Algorithm::Ssgd {
                return Err(cfg_err("ssgd does not take clip parameters"));
            }
            let kind = match p.req("clip.kind")? {
                "anytime" => ClipKind::Anytime,
                "fixed_t" => ClipKind::FixedT,
                other => return Err(cfg_err(format!("unknown clip kind `{other}`"))),
            };
            Some(ClipSpec {
                kind,
                lambda: p.req_num("clip.lambda")?,
                p: p.req_num("clip.p")?,
                g: p.num("clip.g")?,
            })
        } else {
            None
        };
        let batch: usize = p.num("batch")?.unwrap_or(1);
        if algorithm == Algorithm::ClippedSsgd && clip.is_none() {
            return Err(cfg_err(
                "clipped_ssgd requires clip.kind, clip.lambda and clip.p",
            ));
        }
        if algorithm == Algorithm::Ssgd && batch != 1 {
            return Err(cfg_err("ssgd does not take a batch size"));
        }
        let clip_coupled = matches!(
            step,
            StepSpec::ClipCoupledAnytime { .. } | StepSpec::ClipCoupledFixedT { .. }
        );
        if algorithm == Algorithm::Ssgd && clip_coupled {
            return Err(cfg_err("clip-coupled step sizes need clipped_ssgd"));
        }

        let rho_bar = match p.str("moreau.rho_bar") {
            None if algorithm == Algorithm::Ssgd => RhoBarRule::Times(3.0),
            None => RhoBarRule::Times(2.0),
            Some("3rho") => RhoBarRule::Times(3.0),
            Some("2rho") => RhoBarRule::Times(2.0),
            Some(v) => RhoBarRule::Explicit(v.parse().map_err(|_| {
                cfg_err(format!(
                    "`moreau.rho_bar`: expected 3rho, 2rho or a number, got `{v}`"
                ))
            })?),
        };
        let metric = match p.str("metric").unwrap_or("weighted") {
            "weighted" => MetricKind::Weighted,
            "uniform" => MetricKind::Uniform,
            other => return Err(cfg_err(format!("unknown metric `{other}`"))),
        };
        let theory = match p.str("theory") {
            None | Some("none") => None,
            Some(s) => Some(BoundKind::parse(s)?),
        };
        let slope_range = match (
            p.num::<f64>("check.slope_min")?,
            p.num::<f64>("check.slope_max")?,
        ) {
            (None, None) => None,
            (Some(a), Some(b)) if a <= b => Some((a, b)),
            (Some(_), Some(_)) => {
                return Err(cfg_err("`check.slope_min` exceeds `check.slope_max`"))
            }
            _ => {
                return Err(cfg_err(
                    "`check.slope_min` and `check.slope_max` go together",
                ))
            }
        };
        let compare_clipped = p.bool("compare_clipped")?;
        if compare_clipped && algorithm != Algorithm::Ssgd {
            return Err(cfg_err("compare_clipped applies to ssgd configs"));
        }

        let mut validate = ValidateSpec::default();
        if let Some(v) = p.list("validate.p")? {
            validate.p = v;
        }
        if let Some(v) = p.list("validate.batch")? {
            validate.batch = v;
        }
        if let Some(v) = p.list("validate.lambda")? {
            validate.lambda = v;
        }
        if let Some(v) = p.num("validate.n_trials")? {
            validate.n_trials = v;
        }
        if let Some(v) = p.num("validate.seed")? {
            validate.seed = v;
        }
        if let Some(v) = p.num("validate.dim")? {
            validate.dim = v;
        }
        if let Some(v) = p.num("validate.mu_norm")? {
            validate.mu_norm = v;
        }
        if let Some(v) = p.num("validate.sigma")? {
            validate.sigma = v;
        }
        if let Some(v) = p.num("validate.alpha_gap")? {
            validate.alpha_gap = v;
        }

        let name = p.str("name").unwrap_or("experiment").to_string();
        let out = PathBuf::from(
            p.str("out")
                .map(str::to_string)
                .unwrap_or_else(|| format!("out/{name}")),
        );
        let out = if out.is_absolute() {
            out
        } else {
            base_dir.join(out)
        };
        let deltas = p.list("delta")?.unwrap_or_else(|| vec![0.1, 0.01]);
        let cfg = ExperimentConfig {
            theory_delta: p.num("theory.delta")?.unwrap_or(deltas[0]),
            name,
            problem: p.req("problem")?.to_string(),
            problem_seed: p.num("problem.seed")?.unwrap_or(DEFAULT_PROBLEM_SEED),
            x0: p.list("problem.x0")?,
            noise: noise_from(&p)?,
            algorithm,
            step,
            clip,
            batch,
            t_values: p.list("T")?.ok_or_else(|| cfg_err("missing key `T`"))?,
            n_runs: p.num("n_runs")?.unwrap_or(1),
            seed: p.num("seed")?.unwrap_or(0),
            deltas,
            rho_bar,
            inner_iters: p
                .num("moreau.inner_iters")?
                .unwrap_or(crate::moreau::DEFAULT_INNER_ITERS),
            inner_tol: p.num("moreau.inner_tol")?,
            metric,
            theory,
            slope_range,
            compare_clipped,
            min_diverged: p.num("check.min_diverged")?,
            out,
            validate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Built-in preset with outputs under `base_dir`.
    pub fn preset(name: &str, base_dir: &Path) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
        Self::parse(text, base_dir)
    }

    /// Static checks that need no problem data.
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(cfg_err("`n_runs` must be at least 1"));
        }
        if self.t_values.is_empty() || self.t_values[0] == 0 {
            return Err(cfg_err("`T` needs positive values"));
        }
        if self.t_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("`T` values must be strictly increasing"));
        }
        for &d in self
            .deltas
            .iter()
            .chain(std::iter::once(&self.theory_delta))
        {
            if !(d > 0.0 && d < 1.0) {
                return Err(cfg_err(format!(
                    "`delta` values must lie in (0, 1), got {d}"
                )));
            }
        }
        if self.batch == 0 {
            return Err(cfg_err("`batch` must be at least 1"));
        }
        match self.step {
            StepSpec::InverseSqrt { gamma } => positive("step.gamma", gamma)?,
            StepSpec::Constant { eta } => positive("step.eta", eta)?,
            StepSpec::Cor2Tuned => {}
            StepSpec::ClipCoupledAnytime { eta0 } | StepSpec::ClipCoupledFixedT { eta0 } => {
                positive("step.eta0", eta0)?
            }
        }
        if let Some(c) = &self.clip {
            if !(c.lambda >= 0.0) || !c.lambda.is_finite() {
                return Err(cfg_err(format!(
                    "`clip.lambda` must be non-negative, got {}",
                    c.lambda
                )));
            }
            if !(c.p > 1.0 && c.p <= 2.0) {
                return Err(cfg_err(format!("`clip.p` must lie in (1, 2], got {}", c.p)));
            }
            if let Some(g) = c.g {
                positive("clip.g", g)?;
            }
        }
        match self.rho_bar {
            RhoBarRule::Times(f) => positive("moreau.rho_bar", f)?,
            RhoBarRule::Explicit(v) => positive("moreau.rho_bar", v)?,
        }
        if self.inner_iters == 0 {
            return Err(cfg_err("`moreau.inner_iters` must be positive"));
        }
        if let Some(t) = self.inner_tol {
            positive("moreau.inner_tol", t)?;
        }
        if self.compare_clipped && self.noise_p().is_none() {
            return Err(cfg_err("compare_clipped needs pareto noise"));
        }
        let v = &self.validate;
        if v.p.iter().any(|&p| !(p > 1.0 && p <= 2.0)) {
            return Err(cfg_err("`validate.p` values must lie in (1, 2]"));
        }
        if v.batch.contains(&0) {
            return Err(cfg_err("`validate.batch` values must be positive"));
        }
        if v.dim == 0 {
            return Err(cfg_err("`validate.dim` must be positive"));
        }
        if v.lambda
            .iter()
            .any(|&l| !(l >= 2.0 * v.mu_norm) || !(l > 0.0))
        {
            return Err(cfg_err(
                "`validate.lambda` values must be positive and at least 2·validate.mu_norm",
            ));
        }
        positive("validate.alpha_gap", v.alpha_gap)?;
        positive("validate.sigma", v.sigma)?;
        Ok(())
    }

    /// Tail exponent p of Pareto noise.
    pub fn noise_p(&self) -> Option<f64> {
        match self.noise {
            NoiseModel::ParetoPBCM { p, .. } => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
        # comment line
        name = demo
        problem = abs_reg_d10   # trailing comment
        noise.kind = gaussian
        noise.sigma = 0.5
        step.kind = inverse_sqrt
        step.gamma = 0.1
        T = 10, 100, 1e3
        n_runs = 3
    ";

    #[test]
    fn parses_basic() {
        let c = ExperimentConfig::parse(BASIC, Path::new("/tmp")).unwrap();
        assert_eq!(c.t_values, vec![10, 100, 1000]);
        assert_eq!(c.noise, NoiseModel::Gaussian { sigma: 0.5 });
        assert_eq!(c.rho_bar, RhoBarRule::Times(3.0));
        assert_eq!(c.deltas, vec![0.1, 0.01]);
        assert_eq!(c.out, PathBuf::from("/tmp/out/demo"));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            ("T = 100, 10", "increasing"),
            ("delta = 1.5", "(0, 1)"),
            ("n_runs = 0", "n_runs"),
            ("clip.kind = anytime", "clip parameters"),
            ("bogus = 1", "unknown key"),
        ];
        for (line, needle) in bad {
            let text = BASIC
                .lines()
                .filter(|l| {
                    !l.trim_start()
                        .starts_with(line.split('=').next().unwrap().trim())
                })
                .collect::<Vec<_>>()
                .join("\n")
                + "\n"
                + line;
            let err = ExperimentConfig::parse(&text, Path::new("."))
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "{line}: {err}");
        }
    }

    #[test]
    fn clipped_needs_clip_params() {
        let text = BASIC.replace(
            "step.kind = inverse_sqrt",
            "step.kind = constant\nstep.eta = 0.1\nalgorithm = clipped_ssgd",
        );
        let err = ExperimentConfig::parse(&text, Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("requires clip"), "{err}");
    }

    #[test]
    fn duplicate_key() {
        let err = parse_pairs("a.b = 1").unwrap_err().to_string();
        assert!(err.contains("unknown key"));
        let err = parse_pairs("seed = 1\nseed = 2").unwrap_err().to_string();
        assert!(err.contains("duplicate"));
    }

    #[test]
    fn preset_override() {
        let c =
            ExperimentConfig::parse("preset = thm2_p15\nn_runs = 2\nT = 10, 20", Path::new("."))
                .unwrap();
        assert_eq!(c.n_runs, 2);
        assert_eq!(c.algorithm, Algorithm::ClippedSsgd);
        assert_eq!(c.t_values, vec![10, 20]);
    }
}
