//! Simulation and analysis of photon streams from single atoms crossing a
//! driven two-mode optical cavity.
//!
//! The crate is split along the data flow:
//!
//! * [`physics`]: closed-form cavity QED relations and correlation models.
//! * [`sim`]: Monte Carlo atomic beam, emission point process, backgrounds
//!   and detector chain producing time-tagged photon streams.
//! * [`stream`]: the photon stream type and its binary/CSV file formats.
//! * [`analysis`]: single-channel statistics: binning, Mandel α,
//!   waiting times, coincidence fidelity.
//! * [`correlation`]: two-channel correlograms and the g²(τ) fitter.
//! * [`config`]: the experiment configuration file.

pub mod analysis;
pub mod config;
pub mod correlation;
mod error;
pub mod physics;
pub mod rng;
pub mod sim;
pub mod stream;
pub mod units;

pub use error::{Error, ErrorKind, Result};
