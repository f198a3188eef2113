//! Simulation and numerical verification for the finite-battery
//! energy-harvesting Gaussian multiple-access channel.
//!
//! The crate is organized bottom-up:
//!
//! - [`arrivals`]: joint finite-alphabet energy arrival processes.
//! - [`battery`]: the clipped battery recursion and trajectory simulation.
//! - [`policies`]: online power-control rules, admissibility, and the exact
//!   entropy of the spend process.
//! - [`throughput`]: n-horizon expected throughput per user subset, exact
//!   and Monte Carlo.
//! - [`regions`]: set functions, polymatroid rate regions, inner/outer
//!   capacity bounds and sum-rate gap reports.
//! - [`gaussmi`]: quadrature mutual information for uniform and discrete
//!   inputs on the unit-variance AWGN channel.
//! - [`verify`]: the invariant suite shared by the `verify` command and the
//!   acceptance tests.

pub mod arrivals;
pub mod battery;
mod enumerate;
mod error;
pub mod gaussmi;
pub mod policies;
mod quadrature;
pub mod regions;
pub mod rng;
pub mod throughput;
pub mod verify;

pub use arrivals::{ArrivalModel, ArrivalSpec, Pmf};
pub use battery::{BatteryState, Trajectory};
pub use enumerate::{enumeration_budget, BUDGET_ENV_VAR, DEFAULT_BUDGET};
pub use error::{Error, Result};
pub use policies::{Policy, PolicySpec, TablePolicy};
pub use regions::{GapReport, RateRegion, SetFunction};
pub use throughput::{Method, ThroughputEstimate};

/// Tolerance used for admissibility comparisons and state merging.
pub const FLOAT_SLACK: f64 = 1e-12;

/// `½·log₂(1 + x)`, the unit-noise AWGN capacity at power `x`.
#[inline]
pub fn half_log2_1p(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}
