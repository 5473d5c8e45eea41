//! Fixtures shared by the criterion benchmarks.

use wcsgd_core::problems::{problem_preset, DEFAULT_PROBLEM_SEED};
use wcsgd_core::ProblemInstance;

/// The two reference instances used across benchmarks.
pub fn reference_problems() -> Vec<ProblemInstance> {
    ["abs_reg_d10", "phase_d10_m30"]
        .iter()
        .map(|n| problem_preset(n, DEFAULT_PROBLEM_SEED).expect("built-in preset"))
        .collect()
}
