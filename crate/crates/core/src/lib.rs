//! Monte Carlo simulation of uplink channel estimation under pilot
//! contamination, with random pilot hopping and Kalman filtering that tracks
//! the channel's AR(1) coefficient online.
//!
//! Modules, bottom-up:
//! - [`channel`]: Clarke fading trajectories and their autocorrelation.
//! - [`pilots`]: orthonormal pilot books, hopping, collision distances.
//! - [`scenario`]: contaminated received pilots per slot.
//! - [`estimators`]: LS, MMSE, Kalman, AR-tracking Kalman, predictor, average.
//! - [`harness`]: realizations, MSE aggregation, sweeps, grid oracle.
//! - [`config`], [`output`], [`plot`]: configuration text, CSV/manifest, SVG.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod output;
pub mod pilots;
pub mod plot;
pub mod scenario;
pub mod seed;
pub mod special;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use harness::{Execution, Point, SweepAxis, SweepResult, SweepRow};
pub use num_complex::Complex64;
