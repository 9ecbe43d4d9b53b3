//! Threshold optimization for one-bit feedback multi-user scheduling.
//!
//! Each user reports one bit per fading block saying whether its achievable
//! rate exceeds a threshold. The scheduler serves the user with the largest
//! weighted conditional mean rate given those bits. This crate picks the
//! thresholds that maximize the weighted sum of long-run rates and checks the
//! result by Monte-Carlo simulation against full channel knowledge.

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod feedback_stats;
pub mod quadrature;
pub mod simulator;
pub mod threshold_opt;

pub use distributions::{make_rayleigh_rate, RateDistribution, RayleighRateLaw, UserProfile};
pub use error::{Error, Result};
pub use feedback_stats::{ConditionalStats, ThresholdAssignment};
pub use threshold_opt::{optimize, RegionStrategy, SolverConfig};
