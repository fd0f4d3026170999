//! Switching functions and the Gaussian response of a precessing-spin bath to
//! an arbitrary instantaneous-pulse sequence.
//!
//! The bath correlators of `H_b = ω_L Σ I_z` are single-frequency, so every
//! time integral reduces to `∫F e^{iωt}` and `∫F t e^{iωt}`, evaluated exactly
//! segment by segment.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::BathConfig;
use crate::error::{QpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub value: i8,
}

/// Piecewise-constant toggling-frame sign F(t) ∈ {+1, −1, 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingFunction {
    segments: Vec<Segment>,
}

impl SwitchingFunction {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration >= 0.0) || !s.duration.is_finite() {
                return Err(QpsError::InvalidParameter(format!(
                    "segment {i}: duration must be finite and >= 0"
                )));
            }
            if !matches!(s.value, -1..=1) {
                return Err(QpsError::InvalidParameter(format!(
                    "segment {i}: value must be -1, 0 or +1"
                )));
            }
        }
        Ok(Self { segments })
    }

    /// `sgn cos(πt/τ)` on `[0, Mτ]`: the `[τ/2 − π − τ/2]^M` sequence.
    pub fn cpmg(tau: f64, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(QpsError::InvalidParameter("pulse count must be >= 1".into()));
        }
        if !(tau > 0.0) {
            return Err(QpsError::InvalidParameter("tau must be > 0".into()));
        }
        let mut segments = Vec::with_capacity(m as usize + 1);
        segments.push(Segment {
            duration: tau / 2.0,
            value: 1,
        });
        let mut v = -1;
        for _ in 1..m {
            segments.push(Segment { duration: tau, value: v });
            v = -v;
        }
        segments.push(Segment {
            duration: tau / 2.0,
            value: v,
        });
        Ok(Self { segments })
    }

    pub fn hahn(tau: f64) -> Result<Self> {
        Self::cpmg(tau, 1)
    }

    /// XY8-N timing: 8·N equally spaced π pulses. Pulse phases do not enter F.
    pub fn xy8(tau: f64, repeats: u32) -> Result<Self> {
        Self::cpmg(tau, 8 * repeats)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// ∫F dt.
    pub fn integral(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.value as f64 * s.duration)
            .sum()
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.integral().abs() <= tol
    }

    fn bounds(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let mut t = 0.0;
        self.segments.iter().map(move |s| {
            let a = t;
            t += s.duration;
            (a, t, s.value as f64)
        })
    }
}

/// F[ω] = ∫₀^{t_f} F(t) e^{iωt} dt, exactly. At ω = 0 this is ∫F dt.
pub fn switching_fourier(f: &SwitchingFunction, omega: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b, v) in f.bounds() {
        if v == 0.0 {
            continue;
        }
        let piece = if omega == 0.0 {
            Complex64::new(b - a, 0.0)
        } else {
            let eb = Complex64::from_polar(1.0, omega * b);
            let ea = Complex64::from_polar(1.0, omega * a);
            (eb - ea) / Complex64::new(0.0, omega)
        };
        acc += v * piece;
    }
    acc
}

/// ∫₀^{t_f} F(t) t e^{iωt} dt, exactly.
pub fn switching_time_moment(f: &SwitchingFunction, omega: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b, v) in f.bounds() {
        if v == 0.0 {
            continue;
        }
        let piece = if omega == 0.0 {
            Complex64::new(0.5 * (b * b - a * a), 0.0)
        } else {
            let anti = |t: f64| {
                Complex64::from_polar(1.0, omega * t)
                    * (Complex64::new(0.0, -t / omega) + 1.0 / (omega * omega))
            };
            anti(b) - anti(a)
        };
        acc += v * piece;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianResponse {
    pub chi: f64,
    pub phi_m: f64,
    pub phi_q: f64,
}

/// Second-order response of the probe to a bath of independent precessing
/// spins, for switching function `f` and each spin's polarization as stored
/// in `bath` at the start of the sequence.
///
/// With `F_ω = ∫F e^{iω_L t}`, `F₀ = ∫F`, `G = ∫F t e^{iω_L t}` and per-spin
/// mean field `m_j = A⊥(p_x Re F_ω − p_y Im F_ω) + A∥ p_z F₀`:
///
/// - `χ = Σ_j [A⊥² |F_ω|² + A∥² F₀² − m_j²] / 8` (connected correlator, so
///   transverse polarization reduces it),
/// - `Φ_m = Σ_j m_j / 2`,
/// - `Φ_q = −¼ Σ_j [p_z A⊥² I₁ + A⊥A∥ (p_x I₂ + p_y I₃)]` with
///   `I₁ = (F₀ − Re F_ω)/ω`, `I₂ = I₁ − Im G`, `I₃ = Im F_ω/ω − Re G`.
pub fn gaussian_response_general(
    f: &SwitchingFunction,
    bath: &BathConfig,
    omega_l: f64,
) -> GaussianResponse {
    let fw = switching_fourier(f, omega_l);
    let f0 = f.integral();
    let g = switching_time_moment(f, omega_l);
    let i1 = (f0 - fw.re) / omega_l;
    let i2 = i1 - g.im;
    let i3 = fw.im / omega_l - g.re;

    let mut chi = 0.0;
    let mut phi_m = 0.0;
    let mut phi_q = 0.0;
    for s in &bath.spins {
        let [px, py, pz] = s.polarization();
        let mean = s.a_perp * (px * fw.re - py * fw.im) + s.a_par * pz * f0;
        chi += (s.a_perp * s.a_perp * fw.norm_sqr() + s.a_par * s.a_par * f0 * f0 - mean * mean)
            / 8.0;
        phi_m += mean / 2.0;
        phi_q -= 0.25 * (pz * s.a_perp * s.a_perp * i1 + s.a_perp * s.a_par * (px * i2 + py * i3));
    }
    GaussianResponse { chi, phi_m, phi_q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{chi_cpmg, chi_hahn, phi_m_hahn, phi_q_cpmg, phi_q_hahn};
    use crate::bath::{epsilon, weighted_axial_polarization, BathSpin, FieldParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const W: f64 = 2.0 * PI * 0.335;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn nv_a_with(p: [f64; 3]) -> BathConfig {
        crate::bath::nv_a().0.uniformly_polarized(p).unwrap()
    }

    #[test]
    fn hahn_is_balanced() {
        let f = SwitchingFunction::hahn(1.2).unwrap();
        assert_abs_diff_eq!(switching_fourier(&f, 0.0).re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.total_time(), 1.2, epsilon = 1e-15);
        for m in 1..9 {
            assert!(SwitchingFunction::cpmg(0.7, m).unwrap().is_balanced(1e-12));
        }
    }

    #[test]
    fn constant_segment_transform() {
        let f = SwitchingFunction::from_segments(vec![Segment {
            duration: 2.5,
            value: 1,
        }])
        .unwrap();
        let w = 1.7;
        let expected = (Complex64::from_polar(1.0, w * 2.5) - 1.0) / Complex64::new(0.0, w);
        assert_abs_diff_eq!((switching_fourier(&f, w) - expected).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn transforms_match_quadrature() {
        let f = SwitchingFunction::cpmg(0.9, 3).unwrap();
        let sign = |t: f64| (PI * t / 0.9).cos().signum();
        let fw = switching_fourier(&f, W);
        let g = switching_time_moment(&f, W);
        // integrate over each constant piece separately to avoid kinks
        let knots = [0.0, 0.45, 1.35, 2.25, 2.7];
        let mut q = [0.0; 4];
        for k in 0..4 {
            let (a, b) = (knots[k], knots[k + 1]);
            let s = sign(0.5 * (a + b));
            q[0] += s * simpson(|t| (W * t).cos(), a, b, 2000);
            q[1] += s * simpson(|t| (W * t).sin(), a, b, 2000);
            q[2] += s * simpson(|t| t * (W * t).cos(), a, b, 2000);
            q[3] += s * simpson(|t| t * (W * t).sin(), a, b, 2000);
        }
        assert_abs_diff_eq!(fw.re, q[0], epsilon = 1e-10);
        assert_abs_diff_eq!(fw.im, q[1], epsilon = 1e-10);
        assert_abs_diff_eq!(g.re, q[2], epsilon = 1e-10);
        assert_abs_diff_eq!(g.im, q[3], epsilon = 1e-10);
    }

    #[test]
    fn hahn_filter_reproduces_chi() {
        let (bath, field) = crate::bath::nv_a();
        let tau = PI / field.omega_l;
        let f = SwitchingFunction::hahn(tau).unwrap();
        let fw = switching_fourier(&f, field.omega_l);
        let chi = bath.sum_a_perp_sq() / 8.0 * fw.norm_sqr();
        let eps = epsilon(&bath, &field);
        assert_abs_diff_eq!(chi, chi_hahn(tau, eps, field.omega_l), epsilon = 1e-12);
    }

    #[test]
    fn hahn_equivalence_with_transverse_polarization() {
        let bath = nv_a_with([0.3, -0.2, 0.5]);
        let field = FieldParams::from_larmor_khz(335.0).unwrap();
        let eps = epsilon(&bath, &field);
        let pz = weighted_axial_polarization(&bath).unwrap();
        for i in 1..200 {
            let tau = i as f64 * 0.04;
            let f = SwitchingFunction::hahn(tau).unwrap();
            let r = gaussian_response_general(&f, &bath, W);
            assert_abs_diff_eq!(r.phi_m, phi_m_hahn(tau, &bath, 0.0, W), epsilon = 1e-10);
            let z_only = nv_a_with([0.0, 0.0, 0.5]);
            let rz = gaussian_response_general(&f, &z_only, W);
            assert_abs_diff_eq!(rz.chi, chi_hahn(tau, eps, W), epsilon = 1e-10);
            assert_abs_diff_eq!(rz.phi_q, phi_q_hahn(tau, eps, pz, W), epsilon = 1e-10);
            assert_abs_diff_eq!(rz.phi_m, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cpmg_equivalence() {
        let bath = nv_a_with([0.0, 0.0, -0.8]);
        let field = FieldParams::from_larmor_khz(335.0).unwrap();
        let eps = epsilon(&bath, &field);
        for m in 1..=8 {
            for i in 1..150 {
                let tau = i as f64 * 0.05;
                let f = SwitchingFunction::cpmg(tau, m).unwrap();
                let r = gaussian_response_general(&f, &bath, W);
                assert_abs_diff_eq!(r.chi, chi_cpmg(tau, m, eps, W), epsilon = 1e-10);
                assert_abs_diff_eq!(r.phi_q, phi_q_cpmg(tau, m, eps, -0.8, W), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn unpolarized_has_no_phase() {
        let (bath, _) = crate::bath::nv_a();
        let f = SwitchingFunction::xy8(0.8, 2).unwrap();
        let r = gaussian_response_general(&f, &bath, W);
        assert_eq!(r.phi_m, 0.0);
        assert_eq!(r.phi_q, 0.0);
        assert!(r.chi > 0.0);
    }

    proptest! {
        #[test]
        fn chi_is_filter_function_for_balanced_f(
            durs in proptest::collection::vec(0.05f64..1.5, 1..6)
        ) {
            // mirror a random pattern to make it balanced
            let mut segs: Vec<Segment> = durs.iter().enumerate()
                .map(|(i, &d)| Segment { duration: d, value: if i % 2 == 0 { 1 } else { -1 } })
                .collect();
            let tail: Vec<Segment> = segs.iter().rev()
                .map(|s| Segment { duration: s.duration, value: -s.value }).collect();
            segs.extend(tail);
            let f = SwitchingFunction::from_segments(segs).unwrap();
            prop_assume!(f.is_balanced(1e-12));
            let bath = nv_a_with([0.0, 0.0, 0.4]);
            let r = gaussian_response_general(&f, &bath, W);
            let expected = bath.sum_a_perp_sq() / 8.0 * switching_fourier(&f, W).norm_sqr();
            prop_assert!((r.chi - expected).abs() < 1e-10);
        }

        #[test]
        fn inverting_polarization_negates_phase(
            px in -0.5f64..0.5, py in -0.5f64..0.5, pz in -0.7f64..0.7, tau in 0.1f64..6.0, m in 1u32..5
        ) {
            let f = SwitchingFunction::cpmg(tau, m).unwrap();
            let a = gaussian_response_general(&f, &nv_a_with([px, py, pz]), W);
            let b = gaussian_response_general(&f, &nv_a_with([-px, -py, -pz]), W);
            prop_assert!((a.phi_q + a.phi_m + b.phi_q + b.phi_m).abs() < 1e-12);
            prop_assert!((a.chi - b.chi).abs() < 1e-12);
        }
    }

    #[test]
    fn single_spin_filter_with_zero_segments() {
        let spin = BathSpin::new(0.3, 0.6, 0.5, 0.0, 0.0).unwrap();
        let bath = BathConfig::new("s", vec![spin]);
        let f = SwitchingFunction::from_segments(vec![
            Segment { duration: 0.5, value: 1 },
            Segment { duration: 0.3, value: 0 },
            Segment { duration: 0.5, value: -1 },
        ])
        .unwrap();
        let r = gaussian_response_general(&f, &bath, W);
        assert!(r.chi.is_finite() && r.phi_q.is_finite());
    }
}
