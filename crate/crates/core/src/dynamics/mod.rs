//! Exact simulation of the probe ⊗ bath system.
//!
//! Full-space indices are `p · 2^K + b` with probe levels ordered (+1, 0, −1)
//! and bath spin 0 the most significant bit of `b`; bit value 0 is spin up.

pub mod hamiltonian;
pub mod ops;
pub mod propagator;
pub mod protocols;
pub mod schedule;
pub mod state;

pub use hamiltonian::{build_hamiltonian, HamiltonianForm, HamiltonianSpec, SpinLockDrive};
pub use ops::{trace_distance, CMatrix, ProbeLevel, Transition, C64};
pub use propagator::{evolve, Propagator, PropagatorRoute};
pub use protocols::{
    bath_polarization, larmor_period_grid, steady_state_cycle, CseOutcome, CseParams, CycleParams, EchoParams,
    NovelParams, PseOutcome, SpinLockVariant, SpinSystem, SteadyState, STEADY_MAX_ITERS, STEADY_TOL,
};
pub use schedule::{BathChannel, ProbeRotation, PulseSchedule, Quadratures, Readout, Stage};
pub use state::{maximally_mixed, PolarizationRecord, QuantumState};
