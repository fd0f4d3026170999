//! Recovering bath parameters from coherence traces.
//!
//! All fits are damped least squares with analytic Jacobians. Intervals are
//! 1σ, from s²(JᵀJ)⁺ with the noise variance estimated from the residuals.

pub mod deviation;
pub mod fits;
pub mod lm;
pub mod noise;

pub use deviation::{gaussian_deviation, DeviationProfile, Threshold};
pub use fits::{
    fit_epsilon, fit_tau_sweep, fit_twait, synthesize_tau_sweep, FitModel, FitParameter, FitResult, TwaitSetup,
};
pub use noise::add_gaussian_noise;
