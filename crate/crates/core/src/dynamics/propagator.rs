//! Exact propagators for piecewise-constant Hamiltonians.
//!
//! Two routes: a dense Hermitian eigendecomposition, valid for any
//! Hamiltonian, and a factorized route for the secular form, where every probe
//! level evolves the bath by a Kronecker product of 2×2 closed-form rotations.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_hamiltonian, single_spin_propagator, HamiltonianForm, HamiltonianSpec};
use super::ops::{hermiticity_error, CMatrix, Mat2, ProbeLevel, C64};
use super::state::QuantumState;
use crate::error::{QpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PropagatorRoute {
    /// Factorized propagation whenever the Hamiltonian is secular, dense otherwise.
    #[default]
    Auto,
    /// Always diagonalize the full matrix.
    Dense,
}

#[derive(Debug, Clone)]
enum Inner {
    Dense {
        values: DVector<f64>,
        vectors: CMatrix,
    },
    Secular {
        omega_l: f64,
        couplings: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    k: usize,
    inner: Inner,
}

impl Propagator {
    pub fn new(spec: &HamiltonianSpec, route: PropagatorRoute) -> Result<Self> {
        let k = spec.bath.len();
        match (&spec.form, route) {
            (HamiltonianForm::SecularLab, PropagatorRoute::Auto) => Ok(Self {
                dim: 3 << k,
                k,
                inner: Inner::Secular {
                    omega_l: spec.field.omega_l,
                    couplings: spec.bath.spins.iter().map(|s| (s.a_par, s.a_perp)).collect(),
                },
            }),
            _ => {
                let mut p = Self::dense(&build_hamiltonian(spec)?)?;
                p.k = k;
                Ok(p)
            }
        }
    }

    /// Eigendecomposition of an arbitrary Hermitian matrix.
    pub fn dense(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(QpsError::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let err = hermiticity_error(h);
        if err > 1e-12 {
            return Err(QpsError::NotHermitian(err));
        }
        let n = h.nrows();
        let eig = SymmetricEigen::new(h.clone());
        Ok(Self {
            dim: n,
            k: if n % 3 == 0 && (n / 3).is_power_of_two() {
                (n / 3).trailing_zeros() as usize
            } else {
                0
            },
            inner: Inner::Dense {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self.inner, Inner::Secular { .. })
    }

    /// e^{−iHt} as a dense matrix.
    pub fn unitary(&self, t: f64) -> CMatrix {
        let mut u = CMatrix::identity(self.dim, self.dim);
        self.apply_left(&mut u, t);
        u
    }

    fn level_factors(omega_l: f64, couplings: &[(f64, f64)], m: f64, t: f64) -> Vec<Mat2> {
        couplings
            .iter()
            .map(|&(ap, at)| single_spin_propagator(omega_l, m, ap, at, t))
            .collect()
    }

    /// m ← e^{−iHt} m.
    pub fn apply_left(&self, m: &mut CMatrix, t: f64) {
        match &self.inner {
            Inner::Dense { values, vectors } => {
                let phases = values.map(|e| C64::from_polar(1.0, -e * t));
                let mut tmp = vectors.adjoint() * &*m;
                for c in 0..tmp.ncols() {
                    for (r, ph) in phases.iter().enumerate() {
                        tmp[(r, c)] *= *ph;
                    }
                }
                *m = vectors * tmp;
            }
            Inner::Secular { omega_l, couplings } => {
                let d = 1usize << self.k;
                for level in ProbeLevel::ALL {
                    let base = level.index() * d;
                    let factors = Self::level_factors(*omega_l, couplings, level.m(), t);
                    for (j, u) in factors.iter().enumerate() {
                        let bit = 1usize << (self.k - 1 - j);
                        for c in 0..m.ncols() {
                            for i in 0..d {
                                if i & bit != 0 {
                                    continue;
                                }
                                let (r0, r1) = (base + i, base + (i | bit));
                                let (a, b) = (m[(r0, c)], m[(r1, c)]);
                                m[(r0, c)] = u[0][0] * a + u[0][1] * b;
                                m[(r1, c)] = u[1][0] * a + u[1][1] * b;
                            }
                        }
                    }
                }
            }
        }
    }

    /// m ← m e^{+iHt}.
    pub fn apply_right_adjoint(&self, m: &mut CMatrix, t: f64) {
        match &self.inner {
            Inner::Dense { .. } => {
                let mut adj = m.adjoint();
                self.apply_left(&mut adj, t);
                *m = adj.adjoint();
            }
            Inner::Secular { omega_l, couplings } => {
                let d = 1usize << self.k;
                for level in ProbeLevel::ALL {
                    let base = level.index() * d;
                    let factors = Self::level_factors(*omega_l, couplings, level.m(), t);
                    for (j, u) in factors.iter().enumerate() {
                        let bit = 1usize << (self.k - 1 - j);
                        for i in 0..d {
                            if i & bit != 0 {
                                continue;
                            }
                            let (c0, c1) = (base + i, base + (i | bit));
                            for r in 0..m.nrows() {
                                let (a, b) = (m[(r, c0)], m[(r, c1)]);
                                m[(r, c0)] = a * u[0][0].conj() + b * u[0][1].conj();
                                m[(r, c1)] = a * u[1][0].conj() + b * u[1][1].conj();
                            }
                        }
                    }
                }
            }
        }
    }

    /// ρ → e^{−iHt} ρ e^{iHt}.
    pub fn evolve(&self, state: &QuantumState, t: f64) -> Result<QuantumState> {
        if state.dim() != self.dim {
            return Err(QpsError::DimensionMismatch {
                expected: self.dim,
                found: state.dim(),
            });
        }
        let mut out = state.clone();
        self.evolve_in_place(out.rho_mut(), t);
        Ok(out)
    }

    pub(crate) fn evolve_in_place(&self, rho: &mut CMatrix, t: f64) {
        if t == 0.0 {
            return;
        }
        self.apply_left(rho, t);
        self.apply_right_adjoint(rho, t);
    }
}

/// One-shot evolution under an arbitrary Hermitian `h`.
pub fn evolve(state: &QuantumState, h: &CMatrix, t: f64) -> Result<QuantumState> {
    Propagator::dense(h)?.evolve(state, t)
}
