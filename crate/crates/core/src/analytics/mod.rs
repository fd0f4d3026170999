//! Closed-form Gaussian-bath predictions for echo coherence.
//!
//! Phase convention used everywhere in the crate: the normalized coherence is
//! `W = ⟨X⟩ − i⟨Y⟩ = exp(−χ − iΦ)`, so `⟨X⟩ = e^{−χ} cos Φ` and
//! `⟨Y⟩ = e^{−χ} sin Φ`. All angles are radians, times µs, frequencies rad/µs.

mod cpmg;
mod filter;
mod hahn;

pub use cpmg::{
    chi_cpmg, optimal_sequence, phi_q_cpmg, qps_signal, qps_signal_bound, OptimalSequence,
};
pub use filter::{
    gaussian_response_general, switching_fourier, switching_time_moment, GaussianResponse,
    Segment, SwitchingFunction,
};
pub use hahn::{chi_hahn, phi_m_hahn, phi_q_hahn};

use serde::{Deserialize, Serialize};

/// One sample of the Gaussian coherence model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub tau: f64,
    pub chi: f64,
    pub phi_q: f64,
    pub phi_m: f64,
    pub x: f64,
    pub y: f64,
    pub w_mag: f64,
}

impl CoherencePoint {
    pub fn new(tau: f64, chi: f64, phi_q: f64, phi_m: f64) -> Self {
        let w_mag = (-chi).exp();
        let phi = phi_q + phi_m;
        Self {
            tau,
            chi,
            phi_q,
            phi_m,
            x: w_mag * phi.cos(),
            y: w_mag * phi.sin(),
            w_mag,
        }
    }

    /// Total phase Φ = Φ_q + Φ_m.
    pub fn phi(&self) -> f64 {
        self.phi_q + self.phi_m
    }
}

/// Hahn-echo prediction for a bath at time `t_wait` after its polarization was set.
pub fn hahn_point(
    tau: f64,
    bath: &crate::bath::BathConfig,
    field: &crate::bath::FieldParams,
    t_wait: f64,
) -> crate::error::Result<CoherencePoint> {
    let w = field.omega_l;
    let eps = crate::bath::epsilon(bath, field);
    let pz = if eps > 0.0 {
        crate::bath::weighted_axial_polarization(bath)?
    } else {
        0.0
    };
    Ok(CoherencePoint::new(
        tau,
        chi_hahn(tau, eps, w),
        phi_q_hahn(tau, eps, pz, w),
        phi_m_hahn(tau, bath, t_wait, w),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quadratures_match_magnitude(
            chi in 0.0f64..5.0, pq in -3.0f64..3.0, pm in -3.0f64..3.0, tau in 0.0f64..10.0
        ) {
            let p = CoherencePoint::new(tau, chi, pq, pm);
            prop_assert!((p.x * p.x + p.y * p.y - (-2.0 * chi).exp()).abs() < 1e-12);
            prop_assert!(p.w_mag > 0.0 && p.w_mag <= 1.0);
        }
    }
}
