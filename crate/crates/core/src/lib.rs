//! Closed-loop seizure suppression with a learned Koopman surrogate.
//!
//! The pipeline: simulate Jansen-Rit EEG ([`neural_mass`]), learn a lifted
//! linear model with a deep Koopman autoencoder ([`koopman`]), compare
//! against recurrent and loss-ablated baselines ([`baselines`]), and close
//! the loop with a box-constrained linear MPC ([`mpc`]). [`eval`] holds the
//! metrics and [`experiment`] the config-driven orchestration behind the
//! `koopman-mpc` binary.

pub mod baselines;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod koopman;
pub mod linalg;
pub mod mpc;
pub mod nn;
pub mod neural_mass;

pub use error::{Error, Result};
