//! Simulation and analysis of echo phase shifts for a spin-1 probe coupled to
//! a polarized nuclear spin bath.

pub mod analytics;
pub mod bath;
pub mod dynamics;
pub mod error;
pub mod reconstruction;
pub mod trace;

pub use error::{QpsError, Result};
