//! Built-in experiment configs.

const COR1_THETA05: &str = "
name = cor1_theta05
problem = abs_reg_d10
noise.kind = sub_weibull
noise.sigma = 1
noise.theta = 0.5
algorithm = ssgd
step.kind = inverse_sqrt
step.gamma = 0.1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 1
moreau.rho_bar = 3rho
metric = weighted
theory = cor1
check.slope_min = -0.65
check.slope_max = -0.35
";

const COR1_THETA1: &str = "
name = cor1_theta1
problem = abs_reg_d10
noise.kind = sub_weibull
noise.sigma = 1
noise.theta = 1
algorithm = ssgd
step.kind = inverse_sqrt
step.gamma = 0.1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 2
moreau.rho_bar = 3rho
metric = weighted
theory = cor1
";

const COR1_THETA2: &str = "
name = cor1_theta2
problem = abs_reg_d10
noise.kind = sub_weibull
noise.sigma = 1
noise.theta = 2
algorithm = ssgd
step.kind = inverse_sqrt
step.gamma = 0.1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 3
moreau.rho_bar = 3rho
metric = weighted
theory = cor1
";

const COR2_THETA05: &str = "
name = cor2_theta05
problem = abs_reg_d10
noise.kind = sub_weibull
noise.sigma = 1
noise.theta = 0.5
algorithm = ssgd
step.kind = cor2_tuned
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 4
moreau.rho_bar = 3rho
metric = uniform
theory = cor2
";

const THM2_P15: &str = "
name = thm2_p15
problem = abs_reg_d10
noise.kind = pareto
noise.sigma = 1
noise.p = 1.5
noise.alpha = 1.8
algorithm = clipped_ssgd
clip.kind = anytime
clip.lambda = 1
clip.p = 1.5
batch = 1
step.kind = clip_coupled_anytime
step.eta0 = 1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 5
moreau.rho_bar = 2rho
metric = uniform
theory = thm2
";

const THM2_P2: &str = "
name = thm2_p2
problem = abs_reg_d10
noise.kind = gaussian
noise.sigma = 1
algorithm = clipped_ssgd
clip.kind = anytime
clip.lambda = 1
clip.p = 2
batch = 1
step.kind = clip_coupled_anytime
step.eta0 = 1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 6
moreau.rho_bar = 2rho
metric = uniform
theory = thm2
";

const THM3_P15: &str = "
name = thm3_p15
problem = abs_reg_d10
noise.kind = pareto
noise.sigma = 10
noise.p = 1.5
noise.alpha = 1.9
algorithm = clipped_ssgd
clip.kind = fixed_t
clip.lambda = 10
clip.p = 1.5
batch = 1
step.kind = clip_coupled_fixed_t
step.eta0 = 4
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 7
moreau.rho_bar = 2rho
metric = uniform
theory = thm3
check.slope_min = -0.80
check.slope_max = -0.53
";

const THM4_P15: &str = "
name = thm4_p15
problem = abs_reg_d10
noise.kind = pareto
noise.sigma = 1
noise.p = 1.5
noise.alpha = 1.8
algorithm = clipped_ssgd
clip.kind = anytime
clip.lambda = 1
clip.p = 1.5
batch = 1
step.kind = clip_coupled_anytime
step.eta0 = 1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 8
moreau.rho_bar = 2rho
metric = uniform
theory = thm4
";

const THM5_P15: &str = "
name = thm5_p15
problem = abs_reg_d10
noise.kind = pareto
noise.sigma = 1
noise.p = 1.5
noise.alpha = 1.8
algorithm = clipped_ssgd
clip.kind = fixed_t
clip.lambda = 1
clip.p = 1.5
batch = 1
step.kind = clip_coupled_fixed_t
step.eta0 = 1
T = 100, 1000, 10000, 100000
n_runs = 50
seed = 9
moreau.rho_bar = 2rho
metric = uniform
theory = thm5
";

const VANILLA_PBCM_DIVERGENCE_DEMO: &str = "
name = vanilla_pbcm_divergence_demo
problem = abs_reg_d10_free
noise.kind = pareto
noise.sigma = 1
noise.p = 1.2
noise.alpha = 1.3
algorithm = ssgd
step.kind = inverse_sqrt
step.gamma = 0.1
T = 10000
n_runs = 50
seed = 10
moreau.rho_bar = 3rho
metric = weighted
compare_clipped = true
check.min_diverged = 1
";

pub(crate) const PRESETS: &[(&str, &str)] = &[
    ("cor1_theta05", COR1_THETA05),
    ("cor1_theta1", COR1_THETA1),
    ("cor1_theta2", COR1_THETA2),
    ("cor2_theta05", COR2_THETA05),
    ("thm2_p15", THM2_P15),
    ("thm2_p2", THM2_P2),
    ("thm3_p15", THM3_P15),
    ("thm4_p15", THM4_P15),
    ("thm5_p15", THM5_P15),
    ("vanilla_pbcm_divergence_demo", VANILLA_PBCM_DIVERGENCE_DEMO),
];

/// Config text of a built-in preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Names of the built-in presets.
pub fn list_presets() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}
