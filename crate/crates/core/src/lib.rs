//! Localized statistical channel modeling from multi-beam RSRP.
//!
//! The crate maps expected per-beam RSRP onto the angular power spectrum of
//! the channel (`y = A x`), recovers the sparse non-negative spectrum with
//! greedy and proximal solvers, and ships a physics-level simulator used to
//! check that mapping by Monte Carlo.

pub mod array_model;
pub mod channel_sim;
pub mod cli_io;
pub mod coeff_matrix;
pub mod error;
pub mod evaluation;
pub mod rng;
pub mod solvers;
pub mod units;

pub use error::{LscmError, Result};
