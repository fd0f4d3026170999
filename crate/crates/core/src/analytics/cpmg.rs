//! Multipulse `[τ/2 − π − τ/2]^M` predictions and optimal-sequence search.
//!
//! The closed forms carry a `1/cos(ω_L τ/2)` factor that is removable: the
//! numerators vanish at the same points. Instead of dividing, the ratios are
//! expanded into finite trigonometric sums that are exact everywhere,
//! including on the singular set (τ = π/ω_L is one such point).

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{QpsError, Result};

/// `cos(Mθ)/cos θ` for odd `M`, `sin(Mθ)/cos θ` for even `M`.
fn pulse_ratio(m: u32, theta: f64) -> f64 {
    if m % 2 == 1 {
        let half = (m - 1) / 2;
        let mut acc = 1.0;
        for k in 1..=half {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += 2.0 * sign * (2.0 * k as f64 * theta).cos();
        }
        if half % 2 == 0 {
            acc
        } else {
            -acc
        }
    } else {
        let mut acc = 0.0;
        for k in 0..m / 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * ((m - 1 - 2 * k) as f64 * theta).sin();
        }
        2.0 * acc
    }
}

/// `sin(2Mθ)/cos θ`.
fn phase_ratio(m: u32, theta: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * ((2 * m - 1 - 2 * k) as f64 * theta).sin();
    }
    2.0 * acc
}

/// Multipulse dephasing exponent.
///
/// Odd M: `2ε cos²(Mω_Lτ/2) sin⁴(ω_Lτ/4) / cos²(ω_Lτ/2)`;
/// even M: the same with `sin²(Mω_Lτ/2)` in the numerator.
pub fn chi_cpmg(tau: f64, m: u32, eps: f64, omega_l: f64) -> f64 {
    assert!(m >= 1, "pulse count must be >= 1");
    let theta = omega_l * tau / 2.0;
    let r = pulse_ratio(m, theta);
    2.0 * eps * r * r * (omega_l * tau / 4.0).sin().powi(4)
}

/// Multipulse quench phase
/// `(−1)^{M−1} p̄_z ε sin(Mω_Lτ) sin²(ω_Lτ/4) / (2 cos(ω_Lτ/2))`.
pub fn phi_q_cpmg(tau: f64, m: u32, eps: f64, pz_bar: f64, omega_l: f64) -> f64 {
    assert!(m >= 1, "pulse count must be >= 1");
    let theta = omega_l * tau / 2.0;
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    sign * pz_bar * eps * phase_ratio(m, theta) * (omega_l * tau / 4.0).sin().powi(2) / 2.0
}

/// Quench-phase signal e^{−χ}|sin Φ_q| of an M-pulse echo.
pub fn qps_signal(tau: f64, m: u32, eps: f64, pz_bar: f64, omega_l: f64) -> f64 {
    (-chi_cpmg(tau, m, eps, omega_l)).exp() * phi_q_cpmg(tau, m, eps, pz_bar, omega_l).sin().abs()
}

/// Upper bound √ε / (2√e) on |⟨σ_y⟩| for a balanced echo.
pub fn qps_signal_bound(eps: f64) -> f64 {
    eps.max(0.0).sqrt() / (2.0 * E.sqrt())
}

/// Result of the (M, τ) search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSequence {
    pub m: u32,
    /// Interval between π pulses (µs).
    pub tau: f64,
    /// Achieved e^{−χ}|sin Φ_q| with p̄_z = 1.
    pub signal: f64,
    pub bound: f64,
    /// 1/√ε, the expected order of magnitude of the optimal pulse count.
    pub m_scaling: f64,
    /// π/(ω_L √ε) (µs); compare with both `tau` and `m·tau`.
    pub tau_scaling: f64,
}

impl OptimalSequence {
    pub fn fraction_of_bound(&self) -> f64 {
        self.signal / self.bound
    }

    pub fn total_time(&self) -> f64 {
        self.m as f64 * self.tau
    }
}

const TAU_GRID: usize = 20_000;

/// Dense search over M ∈ [1, ⌈4/√ε⌉] and τ ∈ (0, 4π/ω_L] for the largest
/// quench-phase signal at full axial polarization.
pub fn optimal_sequence(eps: f64, omega_l: f64) -> Result<OptimalSequence> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QpsError::MultipulseRegime(eps));
    }
    if !(omega_l > 0.0) {
        return Err(QpsError::InvalidParameter("omega_L must be positive".into()));
    }
    let m_max = (4.0 / eps.sqrt()).ceil() as u32;
    let t_max = 4.0 * PI / omega_l;
    let step = t_max / TAU_GRID as f64;

    let mut best = (0.0, 1u32, step);
    for m in 1..=m_max.max(1) {
        let f = |t: f64| qps_signal(t, m, eps, 1.0, omega_l);
        let (mut s_best, mut t_best) = (f64::NEG_INFINITY, step);
        for i in 1..=TAU_GRID {
            let t = i as f64 * step;
            let s = f(t);
            if s > s_best {
                s_best = s;
                t_best = t;
            }
        }
        let lo = (t_best - step).max(step * 1e-3);
        let hi = (t_best + step).min(t_max);
        let (t_ref, s_ref) = golden_max(f, lo, hi);
        let (t_m, s_m) = if s_ref > s_best { (t_ref, s_ref) } else { (t_best, s_best) };
        if s_m > best.0 {
            best = (s_m, m, t_m);
        }
    }
    Ok(OptimalSequence {
        m: best.1,
        tau: best.2,
        signal: best.0,
        bound: qps_signal_bound(eps),
        m_scaling: 1.0 / eps.sqrt(),
        tau_scaling: PI / (omega_l * eps.sqrt()),
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{chi_hahn, phi_q_hahn};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const W: f64 = 2.0 * PI * 0.335;

    // The published forms, divided directly. Only valid away from cos(ω_Lτ/2) = 0.
    fn chi_direct(tau: f64, m: u32, eps: f64) -> f64 {
        let num = if m % 2 == 0 {
            (m as f64 * W * tau / 2.0).sin().powi(2)
        } else {
            (m as f64 * W * tau / 2.0).cos().powi(2)
        };
        2.0 * eps * num * (W * tau / 4.0).sin().powi(4) / (W * tau / 2.0).cos().powi(2)
    }

    fn phi_direct(tau: f64, m: u32, eps: f64, pz: f64) -> f64 {
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        sign * pz * eps * (m as f64 * W * tau).sin() * (W * tau / 4.0).sin().powi(2)
            / (2.0 * (W * tau / 2.0).cos())
    }

    #[test]
    fn finite_sums_match_direct_division() {
        for m in 1..=9 {
            for i in 1..400 {
                let tau = i as f64 * 0.0173;
                if (W * tau / 2.0).cos().abs() < 1e-3 {
                    continue;
                }
                let c = chi_cpmg(tau, m, 0.2, W);
                let p = phi_q_cpmg(tau, m, 0.2, 0.7, W);
                assert_abs_diff_eq!(c, chi_direct(tau, m, 0.2), epsilon = 1e-10);
                assert_abs_diff_eq!(p, phi_direct(tau, m, 0.2, 0.7), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn three_pulses_at_half_period() {
        let tau = PI / W;
        assert_abs_diff_eq!(chi_cpmg(tau, 3, 0.110, W), 0.495, epsilon = 1e-12);
        assert_abs_diff_eq!(phi_q_cpmg(tau, 3, 0.110, 1.0, W), 0.165, epsilon = 1e-12);
        for d in [1e-6, -1e-6] {
            assert_abs_diff_eq!(chi_cpmg(tau + d, 3, 0.110, W), 0.495, epsilon = 1e-5);
            assert_abs_diff_eq!(chi_direct(tau + d, 3, 0.110), 0.495, epsilon = 1e-5);
        }
        let y = (-0.495f64).exp() * 0.165f64.sin();
        assert!((y - 0.100).abs() < 5e-4);
    }

    #[test]
    fn single_pulse_reduces_to_hahn() {
        for i in 0..2000 {
            let tau = i as f64 * 0.006;
            assert_abs_diff_eq!(chi_cpmg(tau, 1, 0.3, W), chi_hahn(tau, 0.3, W), epsilon = 1e-12);
            assert_abs_diff_eq!(
                phi_q_cpmg(tau, 1, 0.3, -0.4, W),
                phi_q_hahn(tau, 0.3, -0.4, W),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn full_revival_for_any_m() {
        for m in 1..=12 {
            assert_abs_diff_eq!(chi_cpmg(4.0 * PI / W, m, 0.5, W), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_values() {
        assert_abs_diff_eq!(qps_signal_bound(0.110), 0.100_58, epsilon = 5e-5);
        assert_eq!(qps_signal_bound(0.0), 0.0);
        assert_abs_diff_eq!(qps_signal_bound(1.0), 0.3033, epsilon = 5e-5);
    }

    #[test]
    fn optimum_for_nv_a_strength() {
        let opt = optimal_sequence(0.110, W).unwrap();
        assert_eq!(opt.m, 3);
        assert!(opt.fraction_of_bound() >= 0.99 && opt.fraction_of_bound() <= 1.0 + 1e-9);
        assert_abs_diff_eq!(opt.tau, PI / W, epsilon = 1e-3);
    }

    #[test]
    fn strong_coupling_optimum_is_single_echo() {
        assert_eq!(optimal_sequence(0.95, W).unwrap().m, 1);
        assert!(matches!(optimal_sequence(1.0, W), Err(QpsError::MultipulseRegime(_))));
        assert!(optimal_sequence(0.0, W).is_err());
    }

    proptest! {
        #[test]
        fn continuous_across_singular_points(k in 0u32..6, m in 1u32..12, eps in 0.01f64..1.0) {
            let tau = (2 * k + 1) as f64 * PI / W;
            for d in [1e-8, -1e-8] {
                let a = chi_cpmg(tau, m, eps, W);
                let b = chi_cpmg(tau + d, m, eps, W);
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12) + 1e-12);
                let a = phi_q_cpmg(tau, m, eps, 1.0, W);
                let b = phi_q_cpmg(tau + d, m, eps, 1.0, W);
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12) + 1e-12);
            }
        }

        #[test]
        fn signal_never_exceeds_bound(
            m in 1u32..=20, x in 0.0f64..1.0, eps in 0.0f64..=1.0, pz in -1.0f64..=1.0
        ) {
            let tau = (x * 4.0 * PI / W).max(1e-9);
            prop_assert!(qps_signal(tau, m, eps, pz, W) <= qps_signal_bound(eps) + 1e-9);
        }
    }
}
