//! Nuclear spin bath description, field constants and coupling summaries.
//!
//! Couplings are given in configuration files as `A/2π` in kHz. They are
//! converted to angular frequency (rad/µs) once, when a [`BathSpin`] is
//! constructed, and every other routine in the crate works in rad/µs and µs.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QpsError, Result};

/// Planck constant (J·s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// µ0/4π (T·m/A).
pub const MU0_OVER_4PI: f64 = 1.0e-7;
/// ¹³C gyromagnetic ratio γ/2π (kHz/G).
pub const GAMMA_13C_KHZ_PER_GAUSS: f64 = 1.070_84;
/// Electron gyromagnetic ratio γ/2π (MHz/G).
pub const GAMMA_E_MHZ_PER_GAUSS: f64 = 2.802_495;
/// NV ground-state zero-field splitting D/2π (MHz).
pub const NV_ZFS_MHZ: f64 = 2870.0;

const POLARIZATION_SLACK: f64 = 1e-12;

/// Convert a frequency `f/2π` in kHz to angular frequency in rad/µs.
#[inline]
pub fn khz_to_rad_per_us(f_khz: f64) -> f64 {
    TAU * f_khz * 1e-3
}

/// Convert an angular frequency in rad/µs to `f/2π` in kHz.
#[inline]
pub fn rad_per_us_to_khz(w: f64) -> f64 {
    w / TAU * 1e3
}

/// Convert a frequency `f/2π` in MHz to angular frequency in rad/µs.
#[inline]
pub fn mhz_to_rad_per_us(f_mhz: f64) -> f64 {
    TAU * f_mhz
}

/// One spin-½ nucleus: hyperfine couplings (rad/µs) and initial polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpin {
    /// Axial coupling A∥ (rad/µs), signed.
    pub a_par: f64,
    /// Transverse coupling A⊥ (rad/µs), nonnegative.
    pub a_perp: f64,
    /// Axial polarization ⟨2I_z⟩.
    pub p_z: f64,
    /// Transverse polarization magnitude.
    pub p_perp: f64,
    /// Phase of the transverse polarization in the xy plane (rad).
    pub phi0: f64,
}

impl BathSpin {
    /// Build a spin from couplings in angular units, checking invariants.
    pub fn new(a_par: f64, a_perp: f64, p_z: f64, p_perp: f64, phi0: f64) -> Result<Self> {
        let spin = Self {
            a_par,
            a_perp,
            p_z,
            p_perp,
            phi0,
        };
        spin.validate()?;
        Ok(spin)
    }

    /// Unpolarized spin with couplings given as `A/2π` in kHz.
    pub fn from_khz(a_par_khz: f64, a_perp_khz: f64) -> Result<Self> {
        Self::new(
            khz_to_rad_per_us(a_par_khz),
            khz_to_rad_per_us(a_perp_khz),
            0.0,
            0.0,
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a_par, self.a_perp, self.p_z, self.p_perp, self.phi0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(QpsError::InvalidParameter("non-finite spin parameter".into()));
        }
        if self.a_perp < 0.0 {
            return Err(QpsError::InvalidParameter(format!(
                "a_perp must be >= 0, got {}",
                self.a_perp
            )));
        }
        if self.p_perp < 0.0 {
            return Err(QpsError::InvalidParameter(format!(
                "p_perp must be >= 0, got {}",
                self.p_perp
            )));
        }
        let norm2 = self.p_z * self.p_z + self.p_perp * self.p_perp;
        if norm2 > 1.0 + POLARIZATION_SLACK {
            return Err(QpsError::InvalidParameter(format!(
                "polarization vector longer than 1 (|p|^2 = {norm2})"
            )));
        }
        Ok(())
    }

    pub fn a_par_khz(&self) -> f64 {
        rad_per_us_to_khz(self.a_par)
    }

    pub fn a_perp_khz(&self) -> f64 {
        rad_per_us_to_khz(self.a_perp)
    }

    /// Cartesian polarization (p_x, p_y, p_z).
    pub fn polarization(&self) -> [f64; 3] {
        [
            self.p_perp * self.phi0.cos(),
            self.p_perp * self.phi0.sin(),
            self.p_z,
        ]
    }

    /// Polarization after free precession for `t_wait` at `omega_l`:
    /// p_x = p⊥cos(ω t + φ), p_y = p⊥sin(ω t + φ).
    pub fn polarization_at(&self, t_wait: f64, omega_l: f64) -> [f64; 3] {
        let a = omega_l * t_wait + self.phi0;
        [self.p_perp * a.cos(), self.p_perp * a.sin(), self.p_z]
    }

    /// Same couplings with polarization set from a Cartesian vector.
    pub fn with_polarization(&self, p: [f64; 3]) -> Result<Self> {
        let p_perp = p[0].hypot(p[1]);
        let phi0 = if p_perp > 0.0 { p[1].atan2(p[0]) } else { 0.0 };
        Self::new(self.a_par, self.a_perp, p[2], p_perp, phi0)
    }

    /// Largest coupling magnitude max(|A∥|, A⊥), rad/µs.
    pub fn max_coupling(&self) -> f64 {
        self.a_par.abs().max(self.a_perp)
    }
}

/// Magnetic field and gyromagnetic constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    /// Field along the NV axis (G).
    pub b0: f64,
    /// Nuclear Larmor angular frequency (rad/µs).
    pub omega_l: f64,
    /// Nuclear γ/2π (kHz/G).
    pub gamma_n: f64,
    /// Electron γ/2π (MHz/G).
    pub gamma_e: f64,
    /// Zero-field splitting (rad/µs).
    pub d_zfs: f64,
}

impl FieldParams {
    /// ω_L derived from the field: ω_L = 2π·γ_n·B0.
    pub fn from_field(b0: f64, gamma_n: f64, gamma_e: f64) -> Result<Self> {
        Self::with_larmor(b0, None, gamma_n, gamma_e)
    }

    /// Field parameters with an optional explicit Larmor frequency `ω_L/2π` in kHz.
    /// The explicit value takes precedence over `γ_n·B0`.
    pub fn with_larmor(
        b0: f64,
        omega_l_khz: Option<f64>,
        gamma_n: f64,
        gamma_e: f64,
    ) -> Result<Self> {
        let omega_l = match omega_l_khz {
            Some(f) => khz_to_rad_per_us(f),
            None => khz_to_rad_per_us(gamma_n * b0),
        };
        if !(omega_l > 0.0) || !omega_l.is_finite() {
            return Err(QpsError::InvalidParameter(format!(
                "omega_L must be positive, got {omega_l}"
            )));
        }
        Ok(Self {
            b0,
            omega_l,
            gamma_n,
            gamma_e,
            d_zfs: mhz_to_rad_per_us(NV_ZFS_MHZ),
        })
    }

    /// Field with only ω_L specified (kHz); other constants at their ¹³C/NV values.
    pub fn from_larmor_khz(omega_l_khz: f64) -> Result<Self> {
        let b0 = omega_l_khz / GAMMA_13C_KHZ_PER_GAUSS;
        Self::with_larmor(
            b0,
            Some(omega_l_khz),
            GAMMA_13C_KHZ_PER_GAUSS,
            GAMMA_E_MHZ_PER_GAUSS,
        )
    }

    /// Larmor period T_L = 2π/ω_L (µs).
    pub fn larmor_period(&self) -> f64 {
        TAU / self.omega_l
    }
}

/// An ordered set of bath spins.
#[derive(Debug, Clone, PartialEq)]
pub struct BathConfig {
    pub label: String,
    pub spins: Vec<BathSpin>,
}

impl BathConfig {
    pub fn new(label: impl Into<String>, spins: Vec<BathSpin>) -> Self {
        Self {
            label: label.into(),
            spins,
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// All couplings multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let spins = self
            .spins
            .iter()
            .map(|s| BathSpin {
                a_par: s.a_par * lambda,
                a_perp: s.a_perp * lambda.abs(),
                ..*s
            })
            .collect();
        Self {
            label: format!("{} x{lambda}", self.label),
            spins,
        }
    }

    /// Same bath with every A∥ set to zero.
    pub fn without_axial_coupling(&self) -> Self {
        let spins = self
            .spins
            .iter()
            .map(|s| BathSpin { a_par: 0.0, ..*s })
            .collect();
        Self {
            label: format!("{} (A_par=0)", self.label),
            spins,
        }
    }

    /// Same couplings, every spin given the polarization vector `p`.
    pub fn uniformly_polarized(&self, p: [f64; 3]) -> Result<Self> {
        let spins = self
            .spins
            .iter()
            .map(|s| s.with_polarization(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: self.label.clone(),
            spins,
        })
    }

    /// Same couplings with all polarization removed.
    pub fn unpolarized(&self) -> Self {
        let spins = self
            .spins
            .iter()
            .map(|s| BathSpin {
                p_z: 0.0,
                p_perp: 0.0,
                phi0: 0.0,
                ..*s
            })
            .collect();
        Self {
            label: self.label.clone(),
            spins,
        }
    }

    /// Same bath after free precession for `t_wait`: transverse phases advance by ω_L·t_wait.
    pub fn precessed(&self, t_wait: f64, omega_l: f64) -> Self {
        let spins = self
            .spins
            .iter()
            .map(|s| BathSpin {
                phi0: s.phi0 + omega_l * t_wait,
                ..*s
            })
            .collect();
        Self {
            label: self.label.clone(),
            spins,
        }
    }

    /// Σ_j A⊥,j² (rad²/µs²).
    pub fn sum_a_perp_sq(&self) -> f64 {
        self.spins.iter().fold(0.0, |acc, s| acc + s.a_perp * s.a_perp)
    }

    /// Σ_j A⊥,j (rad/µs).
    pub fn sum_a_perp(&self) -> f64 {
        self.spins.iter().fold(0.0, |acc, s| acc + s.a_perp)
    }
}

/// Dimensionless coupling strength ε = Σ_j A⊥,j² / ω_L².
pub fn epsilon(bath: &BathConfig, field: &FieldParams) -> f64 {
    bath.sum_a_perp_sq() / (field.omega_l * field.omega_l)
}

/// Coupling-weighted axial polarization p̄_z = Σ p_z,j A⊥,j² / Σ A⊥,j².
pub fn weighted_axial_polarization(bath: &BathConfig) -> Result<f64> {
    let total = bath.sum_a_perp_sq();
    if total <= 0.0 {
        return Err(QpsError::UndefinedWeighting);
    }
    let weighted: f64 = bath
        .spins
        .iter()
        .map(|s| s.p_z * s.a_perp * s.a_perp)
        .sum();
    Ok(weighted / total)
}

/// Point-dipole coupling constant d/2π in kHz for an electron–nucleus pair at
/// distance `r_nm` (nm).
pub fn dipolar_constant_khz(r_nm: f64, field: &FieldParams) -> Result<f64> {
    if !(r_nm > 0.0) {
        return Err(QpsError::Singularity);
    }
    let gamma_e_hz_per_t = field.gamma_e * 1e6 * 1e4;
    let gamma_n_hz_per_t = field.gamma_n * 1e3 * 1e4;
    let r = r_nm * 1e-9;
    let d_hz = MU0_OVER_4PI * PLANCK * gamma_e_hz_per_t * gamma_n_hz_per_t / (r * r * r);
    Ok(d_hz * 1e-3)
}

/// Hyperfine couplings (A∥/2π, A⊥/2π) in kHz from the nuclear position
/// relative to the NV axis, pure point-dipole interaction.
///
/// Convention, calibrated against the tabulated NV A / NV B values:
/// `A∥ = d (1 − 3cos²θ)` and `A⊥ = 3 d |sin 2θ|`, with `d = (µ0/4π) h γe γn / r³`.
pub fn couplings_from_geometry(r_nm: f64, theta: f64, field: &FieldParams) -> Result<(f64, f64)> {
    let d = dipolar_constant_khz(r_nm, field)?;
    let c = theta.cos();
    let a_par = d * (1.0 - 3.0 * c * c);
    let a_perp = 3.0 * d * (2.0 * theta).sin().abs();
    Ok((a_par, a_perp))
}

/// Polar angle at which the axial dipolar coupling vanishes, acos(1/√3).
pub fn magic_angle() -> f64 {
    (1.0 / 3f64.sqrt()).acos()
}

/// Advisory Gaussian-validity timescale 1 / max_j(|A∥,j|, A⊥,j) in µs, with
/// couplings in angular units (rad/µs), so a 81 kHz coupling gives ≈ 1.96 µs.
pub fn gaussian_validity_horizon(bath: &BathConfig) -> Result<f64> {
    if bath.is_empty() {
        return Err(QpsError::EmptyBath);
    }
    let max = bath
        .spins
        .iter()
        .map(BathSpin::max_coupling)
        .fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / max)
}

// ---------------------------------------------------------------------------
// Configuration files

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub b0_gauss: f64,
    #[serde(rename = "omega_L_khz", default, skip_serializing_if = "Option::is_none")]
    pub omega_l_khz: Option<f64>,
    pub gamma_n_khz_per_gauss: f64,
    pub gamma_e_mhz_per_gauss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_zfs_mhz: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpinFile {
    pub a_par_khz: f64,
    pub a_perp_khz: f64,
    #[serde(default)]
    pub p_z: f64,
    #[serde(default)]
    pub p_perp: f64,
    #[serde(default)]
    pub phi0_rad: f64,
}

/// On-disk bath configuration (JSON).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BathFile {
    pub label: String,
    pub field: FieldFile,
    pub spins: Vec<SpinFile>,
}

impl BathFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            QpsError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Convert to the internal (angular-unit) representation.
    pub fn build(&self) -> Result<(BathConfig, FieldParams)> {
        let mut field = FieldParams::with_larmor(
            self.field.b0_gauss,
            self.field.omega_l_khz,
            self.field.gamma_n_khz_per_gauss,
            self.field.gamma_e_mhz_per_gauss,
        )?;
        if let Some(d) = self.field.d_zfs_mhz {
            field.d_zfs = mhz_to_rad_per_us(d);
        }
        let spins = self
            .spins
            .iter()
            .enumerate()
            .map(|(i, s)| {
                BathSpin::new(
                    khz_to_rad_per_us(s.a_par_khz),
                    khz_to_rad_per_us(s.a_perp_khz),
                    s.p_z,
                    s.p_perp,
                    s.phi0_rad,
                )
                .map_err(|e| QpsError::Config(format!("spins[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((BathConfig::new(self.label.clone(), spins), field))
    }

    /// Inverse of [`BathFile::build`].
    pub fn from_config(bath: &BathConfig, field: &FieldParams) -> Self {
        Self {
            label: bath.label.clone(),
            field: FieldFile {
                b0_gauss: field.b0,
                omega_l_khz: Some(rad_per_us_to_khz(field.omega_l)),
                gamma_n_khz_per_gauss: field.gamma_n,
                gamma_e_mhz_per_gauss: field.gamma_e,
                d_zfs_mhz: None,
            },
            spins: bath
                .spins
                .iter()
                .map(|s| SpinFile {
                    a_par_khz: s.a_par_khz(),
                    a_perp_khz: s.a_perp_khz(),
                    p_z: s.p_z,
                    p_perp: s.p_perp,
                    phi0_rad: s.phi0,
                })
                .collect(),
        }
    }
}

/// Bundled NV A configuration (five nearby ¹³C, 310.8 G).
pub const NV_A_JSON: &str = include_str!("../configs/nv_a.json");
/// Bundled NV B configuration (seven nearby ¹³C, 310.8 G).
pub const NV_B_JSON: &str = include_str!("../configs/nv_b.json");

pub fn nv_a() -> (BathConfig, FieldParams) {
    BathFile::from_json(NV_A_JSON)
        .and_then(|f| f.build())
        .expect("bundled nv_a.json is valid")
}

pub fn nv_b() -> (BathConfig, FieldParams) {
    BathFile::from_json(NV_B_JSON)
        .and_then(|f| f.build())
        .expect("bundled nv_b.json is valid")
}

/// Look up a bundled configuration by name (`nv_a`, `nv_b`).
pub fn preset(name: &str) -> Option<(BathConfig, FieldParams)> {
    match name {
        "nv_a" | "NV_A" | "nv-a" => Some(nv_a()),
        "nv_b" | "NV_B" | "nv-b" => Some(nv_b()),
        _ => None,
    }
}

/// Half a Larmor period in µs, the τ = π/ω_L operating point.
pub fn half_larmor_period(field: &FieldParams) -> f64 {
    PI / field.omega_l
}
