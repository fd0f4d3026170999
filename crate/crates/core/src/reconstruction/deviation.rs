use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QpsError, Result};
use crate::trace::CoherenceTrace;

/// Rule for declaring an exact trace to have left the Gaussian prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// max(|Δ|W||, |ΔΦ|) above this value.
    Absolute(f64),
    /// |Δ⟨Y⟩| above this fraction of the largest |⟨Y⟩| of the reference trace.
    RelativeToPeak(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Absolute(0.05)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationProfile {
    pub controls: Vec<f64>,
    pub d_w_mag: Vec<f64>,
    /// Phase difference wrapped to [0, π].
    pub d_phi: Vec<f64>,
    pub d_y: Vec<f64>,
    pub threshold: Threshold,
    /// First control value where the threshold is exceeded.
    pub crossing: Option<f64>,
}

impl DeviationProfile {
    /// Largest |Δ⟨Y⟩| for controls ≤ `upto`.
    pub fn max_d_y_until(&self, upto: f64) -> f64 {
        self.controls
            .iter()
            .zip(&self.d_y)
            .filter(|(c, _)| **c <= upto)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max)
    }
}

/// Pointwise deviation of `exact` from `reference` on a shared control grid.
pub fn gaussian_deviation(
    exact: &CoherenceTrace,
    reference: &CoherenceTrace,
    threshold: Threshold,
) -> Result<DeviationProfile> {
    if exact.len() != reference.len() {
        return Err(QpsError::GridMismatch(format!(
            "{} vs {} points",
            exact.len(),
            reference.len()
        )));
    }
    for (i, (a, b)) in exact.points.iter().zip(&reference.points).enumerate() {
        if (a.control - b.control).abs() > 1e-12 * a.control.abs().max(1.0) {
            return Err(QpsError::GridMismatch(format!(
                "point {i}: {} vs {}",
                a.control, b.control
            )));
        }
    }
    let d_w_mag: Vec<f64> = exact
        .points
        .iter()
        .zip(&reference.points)
        .map(|(a, b)| (a.w_mag() - b.w_mag()).abs())
        .collect();
    let d_phi: Vec<f64> = exact
        .points
        .iter()
        .zip(&reference.points)
        .map(|(a, b)| ((a.phi() - b.phi() + PI).rem_euclid(2.0 * PI) - PI).abs())
        .collect();
    let d_y: Vec<f64> = exact
        .points
        .iter()
        .zip(&reference.points)
        .map(|(a, b)| (a.y - b.y).abs())
        .collect();
    let exceeded: Vec<bool> = match threshold {
        Threshold::Absolute(a) => d_w_mag.iter().zip(&d_phi).map(|(w, p)| w.max(*p) > a).collect(),
        Threshold::RelativeToPeak(r) => {
            let peak = reference.points.iter().map(|p| p.y.abs()).fold(0.0, f64::max);
            d_y.iter().map(|d| *d > r * peak).collect()
        }
    };
    let controls = exact.controls();
    let crossing = exceeded.iter().position(|&e| e).map(|i| controls[i]);
    Ok(DeviationProfile {
        controls,
        d_w_mag,
        d_phi,
        d_y,
        threshold,
        crossing,
    })
}
