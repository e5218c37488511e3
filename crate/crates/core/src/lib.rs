//! Heavy-tailed Kronig-Penney random potentials.
//!
//! Transfer matrices, Prüfer phase flow, Lyapunov and rotation-number
//! estimators, a Dirichlet-box spectral solver and a batch runner.

pub mod error;
pub mod estimators;
pub mod potential;
pub mod prufer;
pub mod rng;
pub mod runner;
pub mod spectrum;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
