//! Pulse schedules: piecewise-constant evolution plus instantaneous probe
//! rotations, and their reduction to channels on the bath alone.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::hamiltonian::HamiltonianSpec;
use super::ops::{CMatrix, Transition, C64, ZERO};
use super::propagator::{Propagator, PropagatorRoute};
use super::state::{apply_probe_left, bath_size, QuantumState};
use crate::error::{QpsError, Result};

/// Instantaneous rotation exp(−iθ/2 (cos φ σ_x + sin φ σ_y)) on one probe transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRotation {
    pub transition: Transition,
    pub angle: f64,
    pub phase: f64,
}

impl ProbeRotation {
    pub fn new(transition: Transition, angle: f64, phase: f64) -> Self {
        Self {
            transition,
            angle,
            phase,
        }
    }

    pub fn matrix(&self) -> Matrix3<C64> {
        self.transition.rotation(self.angle, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Evolve under `hamiltonians[hamiltonian]` for `duration` µs.
    Evolve { hamiltonian: usize, duration: f64 },
    Rotate(ProbeRotation),
}

/// Quadrature measurement at the end of a schedule. `frame` is the net
/// refocusing rotation, undone before reading σ_x and σ_y on `transition`.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub transition: Transition,
    pub frame: Matrix3<C64>,
}

impl Readout {
    /// (P σ_x P†, P σ_y P†).
    pub fn observables(&self) -> (Matrix3<C64>, Matrix3<C64>) {
        let p = &self.frame;
        let pa = p.adjoint();
        (
            p * self.transition.sigma_x() * pa,
            p * self.transition.sigma_y() * pa,
        )
    }
}

/// ⟨X⟩ and ⟨Y⟩ of the probe qubit; W = X − iY.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratures {
    pub x: f64,
    pub y: f64,
}

impl Quadratures {
    pub fn w_mag(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Φ with W = |W| e^{−iΦ}.
    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseSchedule {
    hamiltonians: Vec<HamiltonianSpec>,
    steps: Vec<Step>,
    readout: Option<Readout>,
}

impl PulseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a Hamiltonian and return its index. Equal specs share an index,
    /// so each distinct Hamiltonian is diagonalized once.
    pub fn hamiltonian(&mut self, spec: HamiltonianSpec) -> usize {
        if let Some(i) = self.hamiltonians.iter().position(|h| *h == spec) {
            return i;
        }
        if let Some(first) = self.hamiltonians.first() {
            assert_eq!(first.dim(), spec.dim(), "all Hamiltonians in a schedule share one space");
        }
        self.hamiltonians.push(spec);
        self.hamiltonians.len() - 1
    }

    pub fn evolve(&mut self, hamiltonian: usize, duration: f64) -> Result<&mut Self> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(QpsError::InvalidParameter(format!(
                "evolution duration must be finite and >= 0, got {duration}"
            )));
        }
        if hamiltonian >= self.hamiltonians.len() {
            return Err(QpsError::InvalidParameter(format!(
                "unknown Hamiltonian index {hamiltonian}"
            )));
        }
        if duration > 0.0 {
            self.steps.push(Step::Evolve {
                hamiltonian,
                duration,
            });
        }
        Ok(self)
    }

    pub fn rotate(&mut self, r: ProbeRotation) -> &mut Self {
        self.steps.push(Step::Rotate(r));
        self
    }

    pub fn set_readout(&mut self, readout: Readout) -> &mut Self {
        self.readout = Some(readout);
        self
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn readout(&self) -> Option<&Readout> {
        self.readout.as_ref()
    }

    /// Total evolution time (µs).
    pub fn duration(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Evolve { duration, .. } => *duration,
                Step::Rotate(_) => 0.0,
            })
            .sum()
    }

    pub fn dim(&self) -> Option<usize> {
        self.hamiltonians.first().map(|h| h.dim())
    }

    pub fn compile(&self, route: PropagatorRoute) -> Result<CompiledSchedule> {
        let propagators = self
            .hamiltonians
            .iter()
            .map(|h| Propagator::new(h, route))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledSchedule {
            schedule: self.clone(),
            propagators,
        })
    }
}

/// A schedule with its propagators prepared.
#[derive(Debug, Clone)]
pub struct CompiledSchedule {
    schedule: PulseSchedule,
    propagators: Vec<Propagator>,
}

impl CompiledSchedule {
    pub fn schedule(&self) -> &PulseSchedule {
        &self.schedule
    }

    /// Apply every step to `state`; returns the final state and, if the
    /// schedule has a readout, the measured quadratures.
    pub fn run(&self, state: &QuantumState) -> Result<(QuantumState, Option<Quadratures>)> {
        if let Some(n) = self.schedule.dim() {
            if n != state.dim() {
                return Err(QpsError::DimensionMismatch {
                    expected: n,
                    found: state.dim(),
                });
            }
        }
        let mut out = state.clone();
        for step in &self.schedule.steps {
            match step {
                Step::Evolve {
                    hamiltonian,
                    duration,
                } => self.propagators[*hamiltonian].evolve_in_place(out.rho_mut(), *duration),
                Step::Rotate(r) => out.apply_probe_unitary(&r.matrix()),
            }
        }
        let q = self.schedule.readout.as_ref().map(|r| {
            let (ox, oy) = r.observables();
            Quadratures {
                x: out.probe_expectation(&ox).re,
                y: out.probe_expectation(&oy).re,
            }
        });
        Ok((out, q))
    }

    /// Product of all step unitaries on the full space of dimension `n`.
    pub fn unitary(&self, n: usize) -> CMatrix {
        let d = n / 3;
        let mut u = CMatrix::identity(n, n);
        for step in &self.schedule.steps {
            match step {
                Step::Evolve {
                    hamiltonian,
                    duration,
                } => self.propagators[*hamiltonian].apply_left(&mut u, *duration),
                Step::Rotate(r) => apply_probe_left(&mut u, &r.matrix(), d),
            }
        }
        u
    }
}

/// One segment of a repeated protocol: the probe is prepared in a pure state,
/// the schedule runs, and the probe is then discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub probe_init: [C64; 3],
    pub schedule: PulseSchedule,
}

#[derive(Debug, Clone)]
struct CompiledStage {
    kraus: Vec<CMatrix>,
    effects: Option<(CMatrix, CMatrix)>,
}

/// A sequence of stages reduced to Kraus operators on the bath.
///
/// For a stage with full unitary U and probe preparation |ψ⟩ the bath map is
/// ρ ↦ Σ_k K_k ρ K_k† with K_k = ⟨k|U|ψ⟩. Readouts become effect operators
/// E_O = Σ_{kl} O_{lk} K_l† K_k, so ⟨O⟩ = Tr(E_O ρ).
#[derive(Debug, Clone)]
pub struct BathChannel {
    k: usize,
    stages: Vec<CompiledStage>,
}

impl BathChannel {
    pub fn compile(stages: &[Stage], route: PropagatorRoute) -> Result<Self> {
        let mut k = None;
        let mut out: Vec<CompiledStage> = Vec::with_capacity(stages.len());
        for stage in stages {
            let n = stage
                .schedule
                .dim()
                .ok_or_else(|| QpsError::InvalidParameter("stage has no Hamiltonian".into()))?;
            let d = n / 3;
            let kk = bath_size(d)?;
            if *k.get_or_insert(kk) != kk {
                return Err(QpsError::DimensionMismatch {
                    expected: k.unwrap(),
                    found: kk,
                });
            }
            let u = stage.schedule.compile(route)?.unitary(n);
            let psi = stage.probe_init;
            let mut kraus = Vec::with_capacity(3);
            for row in 0..3 {
                let mut kr = CMatrix::zeros(d, d);
                for (col, amp) in psi.iter().enumerate() {
                    if *amp != ZERO {
                        kr += u.view((row * d, col * d), (d, d)) * *amp;
                    }
                }
                if kr.norm() > 1e-14 {
                    kraus.push((row, kr));
                }
            }
            let effects = stage.schedule.readout().map(|r| {
                let (ox, oy) = r.observables();
                let effect = |o: &Matrix3<C64>| {
                    let mut e = CMatrix::zeros(d, d);
                    for (l, kl) in &kraus {
                        for (kidx, kk) in &kraus {
                            let w = o[(*l, *kidx)];
                            if w != ZERO {
                                e += kl.adjoint() * kk * w;
                            }
                        }
                    }
                    e
                };
                (effect(&ox), effect(&oy))
            });
            let kraus: Vec<CMatrix> = kraus.into_iter().map(|(_, m)| m).collect();
            // A unitary stage without readout folds into the previous stage;
            // earlier effect operators are unchanged since K†U†UK = K†K.
            if let (1, None, Some(prev)) = (kraus.len(), &effects, out.last_mut()) {
                let u: &CMatrix = &kraus[0];
                for kr in prev.kraus.iter_mut() {
                    *kr = u * &*kr;
                }
                continue;
            }
            out.push(CompiledStage { kraus, effects });
        }
        Ok(Self {
            k: k.unwrap_or(0),
            stages: out,
        })
    }

    pub fn bath_spins(&self) -> usize {
        self.k
    }

    /// Apply every stage once; returns the new bath state and the readout of
    /// each measuring stage in order.
    pub fn apply(&self, rho: &CMatrix) -> (CMatrix, Vec<Quadratures>) {
        let mut r = rho.clone();
        let mut reads = Vec::new();
        for st in &self.stages {
            if let Some((ex, ey)) = &st.effects {
                reads.push(Quadratures {
                    x: (ex * &r).trace().re,
                    y: (ey * &r).trace().re,
                });
            }
            let mut next = CMatrix::zeros(r.nrows(), r.ncols());
            for kr in &st.kraus {
                next += kr * &r * kr.adjoint();
            }
            r = next;
        }
        (r, reads)
    }
}
