use std::fmt::Write as _;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::ops::{kron_all, CMatrix, Mat2, ProbeLevel, C64, ONE, ZERO};
use crate::bath::BathConfig;
use crate::error::{QpsError, Result};

/// Largest bath handled by the dense propagators.
pub const MAX_BATH_SPINS: usize = 12;

/// Density operator of probe ⊗ bath.
///
/// Row/column index is `p·2^K + b`, where `p` is the probe level index
/// (`+1, 0, −1`) and `b` the bath index with spin 0 as the most significant
/// bit. For each spin, bit 0 is |↑⟩ (I_z = +½).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: CMatrix,
    k: usize,
}

/// ρ = ½(1 + p·σ) for one spin-½.
pub fn spin_density(p: [f64; 3]) -> Mat2 {
    let h = 0.5;
    [
        [C64::new(h * (1.0 + p[2]), 0.0), C64::new(h * p[0], -h * p[1])],
        [C64::new(h * p[0], h * p[1]), C64::new(h * (1.0 - p[2]), 0.0)],
    ]
}

/// Product bath state with each spin's polarization vector from `bath`.
pub fn product_bath_state(bath: &BathConfig) -> CMatrix {
    let factors: Vec<Mat2> = bath
        .spins
        .iter()
        .map(|s| spin_density(s.polarization()))
        .collect();
    kron_all(&factors)
}

pub fn maximally_mixed(k: usize) -> CMatrix {
    let d = 1usize << k;
    CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0)
}

/// Number of spins for a bath matrix of dimension `dim`.
pub fn bath_size(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(QpsError::InvalidParameter(format!(
            "bath dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl QuantumState {
    pub fn new(rho: CMatrix, k: usize) -> Result<Self> {
        if k > MAX_BATH_SPINS {
            return Err(QpsError::InvalidParameter(format!(
                "bath of {k} spins exceeds the supported {MAX_BATH_SPINS}"
            )));
        }
        let n = 3 << k;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(QpsError::DimensionMismatch {
                expected: n,
                found: rho.nrows(),
            });
        }
        Ok(Self { rho, k })
    }

    /// |ψ⟩⟨ψ| ⊗ ρ_bath.
    pub fn from_probe_ket(psi: [C64; 3], bath_rho: &CMatrix) -> Result<Self> {
        let k = bath_size(bath_rho.nrows())?;
        let mut probe = Matrix3::<C64>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                probe[(r, c)] = psi[r] * psi[c].conj();
            }
        }
        Self::from_product(&probe, bath_rho, k)
    }

    pub fn from_product(probe: &Matrix3<C64>, bath_rho: &CMatrix, k: usize) -> Result<Self> {
        let d = 1usize << k;
        if bath_rho.nrows() != d {
            return Err(QpsError::DimensionMismatch {
                expected: d,
                found: bath_rho.nrows(),
            });
        }
        let mut rho = CMatrix::zeros(3 * d, 3 * d);
        for p in 0..3 {
            for q in 0..3 {
                let w = probe[(p, q)];
                if w == ZERO {
                    continue;
                }
                rho.view_mut((p * d, q * d), (d, d))
                    .copy_from(&(bath_rho * w));
            }
        }
        Self::new(rho, k)
    }

    /// Probe in a definite level, bath in `bath_rho`.
    pub fn with_probe_level(level: ProbeLevel, bath_rho: &CMatrix) -> Result<Self> {
        let mut psi = [ZERO; 3];
        psi[level.index()] = ONE;
        Self::from_probe_ket(psi, bath_rho)
    }

    /// Probe in |0⟩, bath in the product state described by `bath`.
    pub fn initial(bath: &BathConfig) -> Result<Self> {
        Self::with_probe_level(ProbeLevel::Zero, &product_bath_state(bath))
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn rho_mut(&mut self) -> &mut CMatrix {
        &mut self.rho
    }

    pub fn into_rho(self) -> CMatrix {
        self.rho
    }

    pub fn bath_spins(&self) -> usize {
        self.k
    }

    pub fn bath_dim(&self) -> usize {
        1 << self.k
    }

    pub fn dim(&self) -> usize {
        3 << self.k
    }

    /// Partial trace over the probe.
    pub fn bath_marginal(&self) -> CMatrix {
        let d = self.bath_dim();
        let mut out = CMatrix::zeros(d, d);
        for p in 0..3 {
            out += self.rho.view((p * d, p * d), (d, d));
        }
        out
    }

    /// Partial trace over the bath.
    pub fn probe_marginal(&self) -> Matrix3<C64> {
        let d = self.bath_dim();
        Matrix3::from_fn(|p, q| {
            (0..d).map(|i| self.rho[(p * d + i, q * d + i)]).sum()
        })
    }

    /// Replace the probe marginal by |ψ⟩⟨ψ|, keeping the bath marginal.
    pub fn reset_probe(&self, psi: [C64; 3]) -> Self {
        Self::from_probe_ket(psi, &self.bath_marginal()).expect("dimensions are consistent")
    }

    /// ⟨O ⊗ 1⟩ for a probe operator `o`.
    pub fn probe_expectation(&self, o: &Matrix3<C64>) -> C64 {
        let m = self.probe_marginal();
        (o * m).trace()
    }

    /// Population of a probe level.
    pub fn probe_population(&self, level: ProbeLevel) -> f64 {
        let i = level.index();
        self.probe_marginal()[(i, i)].re
    }

    /// ρ → (R ⊗ 1) ρ (R ⊗ 1)† for a probe unitary `r`.
    pub fn apply_probe_unitary(&mut self, r: &Matrix3<C64>) {
        let d = self.bath_dim();
        apply_probe_left(&mut self.rho, r, d);
        apply_probe_right_adjoint(&mut self.rho, r, d);
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn check(&self, tol: f64) -> Result<()> {
        let herm = super::ops::hermiticity_error(&self.rho);
        if herm > tol {
            return Err(QpsError::NotHermitian(herm));
        }
        let tr = self.rho.trace();
        if (tr - ONE).norm() > tol {
            return Err(QpsError::InvalidParameter(format!("trace is {tr}")));
        }
        let min = self
            .rho
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(QpsError::InvalidParameter(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// m ← (R ⊗ 1) m, acting on the row blocks of size `d`.
pub(crate) fn apply_probe_left(m: &mut CMatrix, r: &Matrix3<C64>, d: usize) {
    let cols = m.ncols();
    let old = m.clone();
    for p in 0..3 {
        let mut block = m.view_mut((p * d, 0), (d, cols));
        block.fill(ZERO);
        for q in 0..3 {
            let w = r[(p, q)];
            if w != ZERO {
                block += old.view((q * d, 0), (d, cols)) * w;
            }
        }
    }
}

/// m ← m (R ⊗ 1)†, acting on the column blocks of size `d`.
pub(crate) fn apply_probe_right_adjoint(m: &mut CMatrix, r: &Matrix3<C64>, d: usize) {
    let rows = m.nrows();
    let old = m.clone();
    for p in 0..3 {
        let mut block = m.view_mut((0, p * d), (rows, d));
        block.fill(ZERO);
        for q in 0..3 {
            let w = r[(p, q)].conj();
            if w != ZERO {
                block += old.view((0, q * d), (rows, d)) * w;
            }
        }
    }
}

/// Per-spin (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩) = (⟨2I_x⟩, ⟨2I_y⟩, ⟨2I_z⟩) of a bath density matrix.
pub fn spin_polarizations(bath_rho: &CMatrix) -> Result<Vec<[f64; 3]>> {
    let k = bath_size(bath_rho.nrows())?;
    let d = 1usize << k;
    let mut out = vec![[0.0; 3]; k];
    for (j, p) in out.iter_mut().enumerate() {
        let bit = 1usize << (k - 1 - j);
        let mut off = ZERO;
        let mut z = 0.0;
        for i in 0..d {
            if i & bit == 0 {
                off += bath_rho[(i, i | bit)];
                z += bath_rho[(i, i)].re;
            } else {
                z -= bath_rho[(i, i)].re;
            }
        }
        *p = [2.0 * off.re, -2.0 * off.im, z];
    }
    Ok(out)
}

/// Per-spin bath polarization at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationRecord {
    pub t_us: f64,
    pub spins: Vec<[f64; 3]>,
}

impl PolarizationRecord {
    pub fn from_bath(bath_rho: &CMatrix, t_us: f64) -> Result<Self> {
        Ok(Self {
            t_us,
            spins: spin_polarizations(bath_rho)?,
        })
    }

    /// Coupling-weighted axial polarization Σ p_z A⊥² / Σ A⊥².
    pub fn weighted_axial(&self, bath: &BathConfig) -> Result<f64> {
        if bath.len() != self.spins.len() {
            return Err(QpsError::DimensionMismatch {
                expected: bath.len(),
                found: self.spins.len(),
            });
        }
        let total = bath.sum_a_perp_sq();
        if total <= 0.0 {
            return Err(QpsError::UndefinedWeighting);
        }
        Ok(bath
            .spins
            .iter()
            .zip(&self.spins)
            .map(|(s, p)| s.a_perp * s.a_perp * p[2])
            .sum::<f64>()
            / total)
    }

    pub fn max_transverse(&self) -> f64 {
        self.spins
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    pub const CSV_HEADER: &'static str = "spin_index,t_us,px,py,pz";

    /// Rows `spin_index,t_us,px,py,pz`, without header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (j, p) in self.spins.iter().enumerate() {
            let _ = writeln!(
                s,
                "{j},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.t_us, p[0], p[1], p[2]
            );
        }
        s
    }
}

/// CSV document for a time series of records.
pub fn polarization_csv(records: &[PolarizationRecord]) -> String {
    let mut s = String::from(PolarizationRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_rows());
    }
    s
}
