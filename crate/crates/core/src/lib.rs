//! Stochastic subgradient methods for weakly convex problems under
//! heavy-tailed gradient noise.
//!
//! The crate provides test objectives with exact subgradient oracles
//! ([`problems`]), calibrated noise models ([`noise`]), projected SsGD and
//! mini-batch clipped SsGD ([`optim`]), Moreau-envelope stationarity metrics
//! ([`moreau`], [`metrics`]), closed-form convergence bounds ([`theory`]),
//! Monte-Carlo checks of the supporting lemmas ([`validators`]) and a
//! config-driven experiment runner ([`harness`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod metrics;
pub mod moreau;
pub mod noise;
pub mod optim;
pub mod problems;
pub mod rate;
pub mod rng;
pub mod special;
pub mod stats;
pub mod theory;
pub mod validators;
pub mod vecops;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentReport};
pub use metrics::{RunReport, RunSummary};
pub use moreau::{MoreauConfig, ProxResult};
pub use noise::NoiseModel;
pub use optim::{ClipSchedule, RunOptions, StepSchedule, Trajectory};
pub use problems::{FeasibleSet, ProblemInstance};
pub use rng::RngStream;
pub use theory::{BoundKind, TheoryConstants};
pub use validators::McCheckConfig;
