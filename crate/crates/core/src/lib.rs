//! Simulation and analysis of long-distance quantum teleportation with
//! active feed-forward.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: kets, density matrices, Pauli operators and Bell projections.
//! - [`protocol`]: BSM outcomes, corrections and the analytic noise model.
//! - [`photonics_sim`]: event-level generator of both stations' time tags.
//! - [`timesync`]: clock models, cross-correlation sync and coincidence logic.
//! - [`tomography`]: maximum-likelihood state tomography, process
//!   tomography and Monte Carlo error bars.

pub mod photonics_sim;
pub mod protocol;
pub mod qcore;
pub mod rng;
pub mod timesync;
pub mod tomography;
