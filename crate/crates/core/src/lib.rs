//! Simulation and verification toolkit for selective-sweep path shapes.
//!
//! The crate simulates a two-type Moran model with selection together with
//! its branching-process approximations, rescales sweep paths onto the
//! logarithmic space-time scale where they converge to a piecewise-linear
//! "house" profile, measures path distances in the Skorokhod M1 metric via
//! extended graphs, and runs seeded Monte Carlo experiments that check the
//! convergence statements numerically.

pub mod error;
pub mod gw;
pub mod harness;
pub mod house;
pub mod m1;
pub mod moran;
pub mod params;
pub mod pit;
pub mod rng;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
pub use params::{ModelParams, Regime, ScalingRule};
