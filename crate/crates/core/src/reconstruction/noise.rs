use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rand_distr::Normal;

use crate::error::{QpsError, Result};
use crate::trace::{CoherenceTrace, TracePoint};

/// Copy of `trace` with independent N(0, σ²) noise added to ⟨X⟩ and ⟨Y⟩.
/// The same seed always yields the same noise.
pub fn add_gaussian_noise(trace: &CoherenceTrace, sigma: f64, seed: u64) -> Result<CoherenceTrace> {
    let bad = || QpsError::InvalidParameter(format!("noise sigma must be finite and >= 0, got {sigma}"));
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(bad());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| bad())?;
    let mut rng = StdRng::seed_from_u64(seed);
    let points = trace
        .points
        .iter()
        .map(|p| TracePoint {
            control: p.control,
            x: p.x + rng.sample(normal),
            y: p.y + rng.sample(normal),
        })
        .collect();
    Ok(CoherenceTrace::new(trace.control_name.clone(), points))
}
