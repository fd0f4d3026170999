use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::ops::{embed_spin, hermiticity_error, CMatrix, Mat2, ProbeLevel, Transition, C64, I, ONE, ZERO};
use crate::bath::{BathConfig, FieldParams};
use crate::error::{QpsError, Result};

/// Continuous drive on one probe transition, in the drive's rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinLockDrive {
    /// Rabi frequency Ω (rad/µs).
    pub omega: f64,
    /// Detuning δ (rad/µs).
    pub detuning: f64,
    /// Drive phase (rad); 0 drives about x.
    pub phase: f64,
    pub transition: Transition,
    /// Drop the axial hyperfine terms.
    pub zero_a_par: bool,
}

impl SpinLockDrive {
    /// Resonant Hartmann–Hahn drive (Ω = ω_L) on {0, −1}.
    pub fn hartmann_hahn(omega_l: f64) -> Self {
        Self {
            omega: omega_l,
            detuning: 0.0,
            phase: 0.0,
            transition: Transition::ZERO_MINUS,
            zero_a_par: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianForm {
    /// `ω_L Σ I_z + S_z ⊗ Σ (A∥ I_z + A⊥ I_x)`: probe rotating frame with D and
    /// γ_e B₀ removed, bath in the lab frame.
    SecularLab,
    /// Secular form plus `Ω/2 (e^{−iφ}|a⟩⟨b| + h.c.) − δ/2 (|a⟩⟨a| − |b⟩⟨b|)`.
    SpinLock(SpinLockDrive),
    /// Caller-supplied matrix on the full probe ⊗ bath space.
    Custom(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub form: HamiltonianForm,
    pub bath: BathConfig,
    pub field: FieldParams,
}

impl HamiltonianSpec {
    pub fn secular(bath: &BathConfig, field: &FieldParams) -> Self {
        Self {
            form: HamiltonianForm::SecularLab,
            bath: bath.clone(),
            field: *field,
        }
    }

    pub fn spin_lock(bath: &BathConfig, field: &FieldParams, drive: SpinLockDrive) -> Self {
        Self {
            form: HamiltonianForm::SpinLock(drive),
            bath: bath.clone(),
            field: *field,
        }
    }

    pub fn dim(&self) -> usize {
        3 << self.bath.len()
    }
}

/// Bath-only operator ω_L Σ I_z + m Σ (A∥ I_z + A⊥ I_x).
pub fn conditional_bath_hamiltonian(bath: &BathConfig, omega_l: f64, m: f64, keep_a_par: bool) -> CMatrix {
    let k = bath.len();
    let d = 1usize << k;
    let mut h = CMatrix::zeros(d, d);
    for (j, s) in bath.spins.iter().enumerate() {
        let a_par = if keep_a_par { s.a_par } else { 0.0 };
        h += embed_spin(&single_spin_hamiltonian(omega_l, m, a_par, s.a_perp), j, k);
    }
    h
}

/// ½[(ω_L + m A∥) σ_z + m A⊥ σ_x].
pub fn single_spin_hamiltonian(omega_l: f64, m: f64, a_par: f64, a_perp: f64) -> Mat2 {
    let z = 0.5 * (omega_l + m * a_par);
    let x = 0.5 * m * a_perp;
    [
        [C64::new(z, 0.0), C64::new(x, 0.0)],
        [C64::new(x, 0.0), C64::new(-z, 0.0)],
    ]
}

/// exp(−i h t) for the single-spin Hamiltonian of probe level `m`, in closed form.
pub fn single_spin_propagator(omega_l: f64, m: f64, a_par: f64, a_perp: f64, t: f64) -> Mat2 {
    let bz = omega_l + m * a_par;
    let bx = m * a_perp;
    let b = bz.hypot(bx);
    if b == 0.0 {
        return [[ONE, ZERO], [ZERO, ONE]];
    }
    let (s, c) = (0.5 * b * t).sin_cos();
    let (nz, nx) = (bz / b, bx / b);
    [
        [C64::new(c, -s * nz), -I * (s * nx)],
        [-I * (s * nx), C64::new(c, s * nz)],
    ]
}

fn drive_matrix(drive: &SpinLockDrive) -> Matrix3<C64> {
    let (a, b) = (drive.transition.a.index(), drive.transition.b.index());
    let mut m = Matrix3::<C64>::zeros();
    m[(a, b)] = C64::from_polar(0.5 * drive.omega, -drive.phase);
    m[(b, a)] = C64::from_polar(0.5 * drive.omega, drive.phase);
    m[(a, a)] = C64::new(-0.5 * drive.detuning, 0.0);
    m[(b, b)] = C64::new(0.5 * drive.detuning, 0.0);
    m
}

/// Full probe ⊗ bath Hamiltonian (rad/µs) for `spec`.
pub fn build_hamiltonian(spec: &HamiltonianSpec) -> Result<CMatrix> {
    let k = spec.bath.len();
    let n = spec.dim();
    let d = 1usize << k;
    let w = spec.field.omega_l;
    match &spec.form {
        HamiltonianForm::Custom(h) => {
            if h.nrows() != n || h.ncols() != n {
                return Err(QpsError::DimensionMismatch {
                    expected: n,
                    found: h.nrows(),
                });
            }
            let err = hermiticity_error(h);
            if err > 1e-12 {
                return Err(QpsError::NotHermitian(err));
            }
            Ok(h.clone())
        }
        HamiltonianForm::SecularLab | HamiltonianForm::SpinLock(_) => {
            let keep_a_par = match &spec.form {
                HamiltonianForm::SpinLock(drive) => !drive.zero_a_par,
                _ => true,
            };
            let mut h = CMatrix::zeros(n, n);
            for level in ProbeLevel::ALL {
                let p = level.index();
                let block = conditional_bath_hamiltonian(&spec.bath, w, level.m(), keep_a_par);
                h.view_mut((p * d, p * d), (d, d)).copy_from(&block);
            }
            if let HamiltonianForm::SpinLock(drive) = &spec.form {
                if drive.transition.a == drive.transition.b {
                    return Err(QpsError::InvalidParameter(
                        "drive transition needs two distinct levels".into(),
                    ));
                }
                let dm = drive_matrix(drive);
                for p in 0..3 {
                    for q in 0..3 {
                        let v = dm[(p, q)];
                        if v == ZERO {
                            continue;
                        }
                        for i in 0..d {
                            h[(p * d + i, q * d + i)] += v;
                        }
                    }
                }
            }
            Ok(h)
        }
    }
}
