use crate::bath::BathConfig;

/// Hahn-echo dephasing exponent χ(τ) = 2ε sin⁴(ω_L τ/4).
pub fn chi_hahn(tau: f64, eps: f64, omega_l: f64) -> f64 {
    2.0 * eps * (omega_l * tau / 4.0).sin().powi(4)
}

/// Hahn-echo quench phase Φ_q(τ) = p̄_z ε sin²(ω_L τ/4) sin(ω_L τ/2).
pub fn phi_q_hahn(tau: f64, eps: f64, pz_bar: f64, omega_l: f64) -> f64 {
    pz_bar * eps * (omega_l * tau / 4.0).sin().powi(2) * (omega_l * tau / 2.0).sin()
}

/// Hahn-echo mean-field phase from transverse bath polarization, with each
/// spin's transverse component precessed for `t_wait` before the echo starts.
///
/// Φ_m = (2 sin²(ω_L τ/4) / ω_L) Σ_j A⊥,j (p_x,j sin(ω_L τ/2) + p_y,j cos(ω_L τ/2))
pub fn phi_m_hahn(tau: f64, bath: &BathConfig, t_wait: f64, omega_l: f64) -> f64 {
    let half = omega_l * tau / 2.0;
    let (s, c) = half.sin_cos();
    let sum: f64 = bath
        .spins
        .iter()
        .map(|spin| {
            let [px, py, _] = spin.polarization_at(t_wait, omega_l);
            spin.a_perp * (px * s + py * c)
        })
        .sum();
    2.0 * (omega_l * tau / 4.0).sin().powi(2) / omega_l * sum
}
