//! Outage-robust power allocation for interference networks.
//!
//! This crate trains dense neural policies that map measured channel state
//! to power allocations whose *gamma-percentile* minimum rate — the outage
//! value under channel uncertainty — is maximized, rather than the nominal
//! rate at the measurement. The trick is where the uncertainty enters: after
//! the network output, a batch of channel realizations is injected, the
//! empirical percentile of the resulting minimum rates is selected, and the
//! gradient flows back through the one or two realizations that define it.
//!
//! Two environments are provided:
//!
//! - [`mimo`]: multiuser MIMO downlink power loading over regularized
//!   zero-forcing beams, with additive channel-estimation error;
//! - [`d2d`]: device-to-device power control from pathloss-only knowledge,
//!   with log-normal shadowing and fast fading.
//!
//! [`baselines`] supplies the deterministic comparison policies (a nominal
//! max-min oracle via bisection over a standard interference fixed point,
//! uniform power, full power), and [`harness`] runs the full experiment
//! protocols behind the `robustnet` CLI.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod baselines;
pub mod d2d;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mimo;
pub mod mlp;
pub mod percentile;
pub mod rng;
pub mod system;
pub mod training;
pub mod units;

pub use error::{Error, Result};
pub use mlp::{MlpModel, OptimizerConfig, OutputActivation};
pub use percentile::{empirical_percentile, percentile_gradient, PercentileSelection};
