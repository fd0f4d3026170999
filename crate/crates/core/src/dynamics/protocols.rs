//! Experimental protocols: polarization transfer by spin locking, phase-resolved
//! and compensating echoes, XY8 spectroscopy and repeated-cycle steady states.
//!
//! States returned by the protocol runners carry the probe re-pumped to |0⟩
//! with the bath marginal left as the protocol produced it.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{HamiltonianSpec, SpinLockDrive};
use super::ops::{probe_ket, trace_distance_below, CMatrix, ProbeLevel, Transition, C64};
use super::propagator::{Propagator, PropagatorRoute};
use super::schedule::{BathChannel, ProbeRotation, PulseSchedule, Quadratures, Readout, Stage};
use super::state::{maximally_mixed, PolarizationRecord, QuantumState, MAX_BATH_SPINS};
use crate::bath::{BathConfig, FieldParams};
use crate::error::{QpsError, Result};
use crate::trace::{CoherenceTrace, TracePoint};

/// XY8 pulse phases: X Y X Y Y X Y X.
pub const XY8_PHASES: [f64; 8] = [0.0, FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0];

/// `[τ/2 − π − τ/2]^M` echo on one probe transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoParams {
    /// Interval between π pulses (µs).
    pub tau: f64,
    pub pulses: u32,
    pub transition: Transition,
    /// Phase of the π pulses (0 = about x).
    pub pulse_phase: f64,
}

impl EchoParams {
    /// Measurement echo in {0, −1}.
    pub fn pse(tau: f64, pulses: u32) -> Self {
        Self {
            tau,
            pulses,
            transition: Transition::ZERO_MINUS,
            pulse_phase: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(QpsError::InvalidParameter("pulse count must be >= 1".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(QpsError::InvalidParameter("tau must be >= 0".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.pulses as f64 * self.tau
    }
}

/// Compensating echo in {0, +1}, starting `spacing` µs after the measurement echo started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CseParams {
    pub tau: f64,
    pub pulses: u32,
    pub spacing: f64,
}

/// Repeated spin-lock polarization transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NovelParams {
    /// Spin-lock duration per repetition (µs).
    pub t_sl: f64,
    /// Spin-lock Rabi frequency (rad/µs).
    pub omega_sl: f64,
    pub detuning: f64,
    /// +1 locks along |+X⟩, −1 along |−X⟩.
    pub init_sign: f64,
    pub repetitions: u32,
    pub transition: Transition,
}

impl NovelParams {
    /// Hartmann–Hahn matched (Ω = ω_L) locking on {0, −1} from |+X⟩.
    pub fn resonant(omega_l: f64, t_sl: f64, repetitions: u32) -> Self {
        Self {
            t_sl,
            omega_sl: omega_l,
            detuning: 0.0,
            init_sign: 1.0,
            repetitions,
            transition: Transition::ZERO_MINUS,
        }
    }
}

/// The four spin-lock Hamiltonians used to trace the origin of transverse polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinLockVariant {
    /// Drive on {0, −1}, all hyperfine terms.
    Full,
    /// Drive on {0, −1}, A∥ = 0.
    NoAxial,
    /// Drive on {+1, −1}, all hyperfine terms.
    BalancedBasis,
    /// Drive on {+1, −1}, A∥ = 0.
    Both,
}

impl SpinLockVariant {
    pub const ALL: [SpinLockVariant; 4] = [
        SpinLockVariant::Full,
        SpinLockVariant::NoAxial,
        SpinLockVariant::BalancedBasis,
        SpinLockVariant::Both,
    ];

    pub fn transition(self) -> Transition {
        match self {
            SpinLockVariant::Full | SpinLockVariant::NoAxial => Transition::ZERO_MINUS,
            _ => Transition::PLUS_MINUS,
        }
    }

    pub fn zero_a_par(self) -> bool {
        matches!(self, SpinLockVariant::NoAxial | SpinLockVariant::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            SpinLockVariant::Full => "full",
            SpinLockVariant::NoAxial => "no-apar",
            SpinLockVariant::BalancedBasis => "balanced-basis",
            SpinLockVariant::Both => "both",
        }
    }
}

/// One full preparation + measurement cycle, timed from the end of the last
/// polarization pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleParams {
    pub novel: NovelParams,
    /// Free precession between the last spin-lock pulse and the measurement echo.
    pub t_wait: f64,
    pub echo: EchoParams,
    /// Start of the compensating echo relative to the measurement echo start.
    pub cse_spacing: Option<f64>,
    /// Time from the end of the last spin-lock pulse to the start of the next cycle.
    pub t_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseOutcome {
    pub quadratures: Quadratures,
    pub state: QuantumState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CseOutcome {
    pub state: QuantumState,
    /// `spacing / T_L`.
    pub larmor_periods: f64,
    /// Set when the spacing is not an integer number of Larmor periods.
    pub warning: Option<String>,
}

/// Converged repeated-cycle result.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub bath: CMatrix,
    pub polarization: PolarizationRecord,
    /// Readouts of every iteration, one entry per measuring stage.
    pub readings: Vec<Vec<Quadratures>>,
    pub iterations: usize,
    pub residual: f64,
}

impl SteadyState {
    pub fn last_reading(&self) -> Option<Quadratures> {
        self.readings.last().and_then(|r| r.first().copied())
    }
}

/// A bath and field with the propagation route to use.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    bath: BathConfig,
    field: FieldParams,
    route: PropagatorRoute,
}

impl SpinSystem {
    pub fn new(bath: BathConfig, field: FieldParams) -> Result<Self> {
        if bath.is_empty() {
            return Err(QpsError::EmptyBath);
        }
        if bath.len() > MAX_BATH_SPINS {
            return Err(QpsError::InvalidParameter(format!(
                "bath of {} spins exceeds the supported {MAX_BATH_SPINS}",
                bath.len()
            )));
        }
        Ok(Self {
            bath,
            field,
            route: PropagatorRoute::Auto,
        })
    }

    pub fn with_route(mut self, route: PropagatorRoute) -> Self {
        self.route = route;
        self
    }

    pub fn bath(&self) -> &BathConfig {
        &self.bath
    }

    pub fn field(&self) -> &FieldParams {
        &self.field
    }

    pub fn larmor_period(&self) -> f64 {
        self.field.larmor_period()
    }

    pub fn secular(&self) -> HamiltonianSpec {
        HamiltonianSpec::secular(&self.bath, &self.field)
    }

    /// Probe |0⟩ with the bath in the product state given by the configured polarizations.
    pub fn initial_state(&self) -> Result<QuantumState> {
        QuantumState::initial(&self.bath)
    }

    /// π/2 preparation, π pulses with the given phases separated by τ, and
    /// optionally a quadrature readout in the toggling frame.
    pub fn echo_schedule(
        &self,
        tau: f64,
        phases: &[f64],
        transition: Transition,
        readout: bool,
    ) -> Result<PulseSchedule> {
        if phases.is_empty() {
            return Err(QpsError::InvalidParameter("echo needs at least one pulse".into()));
        }
        let mut s = PulseSchedule::new();
        let h = s.hamiltonian(self.secular());
        s.rotate(ProbeRotation::new(transition, FRAC_PI_2, FRAC_PI_2));
        s.evolve(h, tau / 2.0)?;
        let mut frame = Matrix3::<C64>::identity();
        for (i, &phase) in phases.iter().enumerate() {
            let pulse = ProbeRotation::new(transition, PI, phase);
            frame = pulse.matrix() * frame;
            s.rotate(pulse);
            let gap = if i + 1 < phases.len() { tau } else { tau / 2.0 };
            s.evolve(h, gap)?;
        }
        if readout {
            s.set_readout(Readout { transition, frame });
        }
        Ok(s)
    }

    fn echo_for(&self, p: &EchoParams, readout: bool) -> Result<PulseSchedule> {
        p.validate()?;
        let phases = vec![p.pulse_phase; p.pulses as usize];
        self.echo_schedule(p.tau, &phases, p.transition, readout)
    }

    /// Free evolution with the probe in |0⟩.
    pub fn free_schedule(&self, t: f64) -> Result<PulseSchedule> {
        let mut s = PulseSchedule::new();
        let h = s.hamiltonian(self.secular());
        s.evolve(h, t)?;
        Ok(s)
    }

    /// One spin-lock pulse: π/2 to |±X⟩ on the drive transition, then locking.
    pub fn novel_schedule(&self, p: &NovelParams) -> Result<PulseSchedule> {
        let drive = SpinLockDrive {
            omega: p.omega_sl,
            detuning: p.detuning,
            phase: 0.0,
            transition: p.transition,
            zero_a_par: false,
        };
        let mut s = PulseSchedule::new();
        let h = s.hamiltonian(HamiltonianSpec::spin_lock(&self.bath, &self.field, drive));
        let phase = if p.init_sign >= 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
        s.rotate(ProbeRotation::new(p.transition, FRAC_PI_2, phase));
        s.evolve(h, p.t_sl)?;
        Ok(s)
    }

    fn require_probe_zero(state: &QuantumState) -> Result<()> {
        let pop = state.probe_population(ProbeLevel::Zero);
        if (pop - 1.0).abs() > 1e-9 {
            return Err(QpsError::InvalidParameter(format!(
                "probe must start in |0>, population is {pop}"
            )));
        }
        Ok(())
    }

    /// Phase-resolved echo: returns both quadratures and the state after
    /// readout and re-pumping of the probe.
    pub fn run_pse(&self, state: &QuantumState, p: &EchoParams) -> Result<PseOutcome> {
        Self::require_probe_zero(state)?;
        let sched = self.echo_for(p, true)?.compile(self.route)?;
        let (out, q) = sched.run(state)?;
        Ok(PseOutcome {
            quadratures: q.expect("echo schedule has a readout"),
            state: out.reset_probe(probe_ket(ProbeLevel::Zero)),
        })
    }

    /// Compensating echo in {0, +1}, applied to the state right after a
    /// measurement echo of the same τ and pulse count.
    pub fn run_cse(&self, state: &QuantumState, p: &CseParams) -> Result<CseOutcome> {
        let echo = EchoParams {
            tau: p.tau,
            pulses: p.pulses,
            transition: Transition::ZERO_PLUS,
            pulse_phase: 0.0,
        };
        let wait = p.spacing - echo.duration();
        if wait < -1e-12 {
            return Err(QpsError::InvalidParameter(format!(
                "spacing {} is shorter than the echo ({})",
                p.spacing,
                echo.duration()
            )));
        }
        let periods = p.spacing / self.larmor_period();
        let warning = if (periods - periods.round()).abs() > 1e-9 || periods.round() < 1.0 {
            Some(format!(
                "spacing is {periods:.4} Larmor periods; compensation needs a positive integer"
            ))
        } else {
            None
        };
        let zero = probe_ket(ProbeLevel::Zero);
        let mut s = state.reset_probe(zero);
        s = self.free_schedule(wait.max(0.0))?.compile(self.route)?.run(&s)?.0;
        s = self.echo_for(&echo, false)?.compile(self.route)?.run(&s)?.0;
        Ok(CseOutcome {
            state: s.reset_probe(zero),
            larmor_periods: periods,
            warning,
        })
    }

    /// `repetitions` spin-lock pulses, re-pumping the probe before each.
    pub fn run_novel(&self, state: &QuantumState, p: &NovelParams) -> Result<QuantumState> {
        if p.repetitions == 0 {
            return Err(QpsError::InvalidParameter("repetitions must be >= 1".into()));
        }
        let sched = self.novel_schedule(p)?.compile(self.route)?;
        let zero = probe_ket(ProbeLevel::Zero);
        let mut s = state.clone();
        for _ in 0..p.repetitions {
            s = sched.run(&s.reset_probe(zero))?.0;
        }
        Ok(s.reset_probe(zero))
    }

    /// XY8-`repeats` coherence versus pulse spacing.
    pub fn run_xy8(&self, state: &QuantumState, taus: &[f64], repeats: u32) -> Result<CoherenceTrace> {
        Self::require_probe_zero(state)?;
        if repeats == 0 {
            return Err(QpsError::InvalidParameter("repeats must be >= 1".into()));
        }
        let phases: Vec<f64> = XY8_PHASES.iter().cycle().take(8 * repeats as usize).copied().collect();
        let mut points = Vec::with_capacity(taus.len());
        for &tau in taus {
            let sched = self
                .echo_schedule(tau, &phases, Transition::ZERO_MINUS, true)?
                .compile(self.route)?;
            let q = sched.run(state)?.1.expect("readout present");
            points.push(TracePoint { control: tau, x: q.x, y: q.y });
        }
        Ok(CoherenceTrace::new("tau_us", points))
    }

    /// Measurement-echo quadratures versus τ, from the same initial state each time.
    pub fn pse_tau_sweep(&self, state: &QuantumState, taus: &[f64], pulses: u32) -> Result<CoherenceTrace> {
        let points = taus
            .iter()
            .map(|&tau| {
                let q = self.run_pse(state, &EchoParams::pse(tau, pulses))?.quadratures;
                Ok(TracePoint { control: tau, x: q.x, y: q.y })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoherenceTrace::new("tau_us", points))
    }

    /// Bath polarization during a single spin-lock pulse from a maximally
    /// mixed bath, probe prepared in |+X⟩ on the variant's transition.
    pub fn spinlock_variant(
        &self,
        variant: SpinLockVariant,
        omega_sl: f64,
        times: &[f64],
    ) -> Result<Vec<PolarizationRecord>> {
        let drive = SpinLockDrive {
            omega: omega_sl,
            detuning: 0.0,
            phase: 0.0,
            transition: variant.transition(),
            zero_a_par: variant.zero_a_par(),
        };
        let spec = HamiltonianSpec::spin_lock(&self.bath, &self.field, drive);
        let prop = Propagator::new(&spec, self.route)?;
        let init = QuantumState::from_probe_ket(
            variant.transition().superposition(0.0),
            &maximally_mixed(self.bath.len()),
        )?;
        times
            .iter()
            .map(|&t| {
                let s = prop.evolve(&init, t)?;
                PolarizationRecord::from_bath(&s.bath_marginal(), t)
            })
            .collect()
    }

    fn stage(&self, probe_init: [C64; 3], schedule: PulseSchedule) -> Stage {
        Stage {
            probe_init,
            schedule,
        }
    }

    pub fn free_stage(&self, t: f64) -> Result<Stage> {
        Ok(self.stage(probe_ket(ProbeLevel::Zero), self.free_schedule(t)?))
    }

    pub fn echo_stage(&self, p: &EchoParams, readout: bool) -> Result<Stage> {
        Ok(self.stage(probe_ket(ProbeLevel::Zero), self.echo_for(p, readout)?))
    }

    pub fn novel_stage(&self, p: &NovelParams) -> Result<Stage> {
        Ok(self.stage(probe_ket(ProbeLevel::Zero), self.novel_schedule(p)?))
    }

    /// Measurement echo, wait, compensating echo: the stages whose bath map
    /// the compensation argument is about. The wait is `spacing − M τ`.
    pub fn pse_cse_stages(&self, echo: &EchoParams, spacing: Option<f64>) -> Result<Vec<Stage>> {
        let mut stages = vec![self.echo_stage(echo, true)?];
        if let Some(spacing) = spacing {
            let cse = EchoParams {
                transition: Transition::ZERO_PLUS,
                ..*echo
            };
            let wait = spacing - echo.duration();
            if wait < -1e-12 {
                return Err(QpsError::InvalidParameter(
                    "compensating echo would start before the measurement echo ends".into(),
                ));
            }
            stages.push(self.free_stage(wait.max(0.0))?);
            stages.push(self.echo_stage(&cse, false)?);
        }
        Ok(stages)
    }

    /// Stages of one full cycle: N spin-lock pulses, wait, measurement echo,
    /// optional compensating echo, free evolution up to `t_sum`.
    pub fn protocol_cycle(&self, p: &CycleParams) -> Result<Vec<Stage>> {
        let mut stages = Vec::new();
        let novel = self.novel_stage(&p.novel)?;
        for _ in 0..p.novel.repetitions {
            stages.push(novel.clone());
        }
        stages.push(self.free_stage(p.t_wait)?);
        stages.extend(self.pse_cse_stages(&p.echo, p.cse_spacing)?);
        let used = p.t_wait
            + match p.cse_spacing {
                Some(spacing) => spacing + p.echo.duration(),
                None => p.echo.duration(),
            };
        let rest = p.t_sum - used;
        if rest < -1e-12 {
            return Err(QpsError::InvalidParameter(format!(
                "t_sum = {} is shorter than the cycle content ({used})",
                p.t_sum
            )));
        }
        stages.push(self.free_stage(rest.max(0.0))?);
        Ok(stages)
    }

    pub fn channel(&self, stages: &[Stage]) -> Result<BathChannel> {
        BathChannel::compile(stages, self.route)
    }

    /// Trace distance between the bath after a measurement echo (plus optional
    /// compensating echo) and the bath after the same block with all couplings
    /// switched off, starting from the configured product state.
    pub fn compensation_residual(&self, echo: &EchoParams, cse_spacing: Option<f64>) -> Result<f64> {
        let free = SpinSystem {
            bath: self.bath.scaled(0.0),
            ..self.clone()
        };
        let rho = super::state::product_bath_state(&self.bath);
        let (a, _) = self.channel(&self.pse_cse_stages(echo, cse_spacing)?)?.apply(&rho);
        let (b, _) = free.channel(&free.pse_cse_stages(echo, cse_spacing)?)?.apply(&rho);
        Ok(super::ops::trace_distance(&a, &b))
    }

    /// Steady-state measurement-echo ⟨Y⟩ averaged over waiting times, each
    /// cycle iterated from a maximally mixed bath. Returns the mean ⟨Y⟩ and
    /// the largest iteration count.
    pub fn averaged_steady_y(
        &self,
        cycle: &CycleParams,
        t_waits: &[f64],
        tol: f64,
        max_iters: usize,
    ) -> Result<(f64, usize)> {
        if t_waits.is_empty() {
            return Err(QpsError::InvalidParameter("need at least one waiting time".into()));
        }
        let rho0 = maximally_mixed(self.bath.len());
        let mut sum = 0.0;
        let mut iters = 0;
        for &t_wait in t_waits {
            let stages = self.protocol_cycle(&CycleParams { t_wait, ..*cycle })?;
            let ss = steady_state_cycle(&self.channel(&stages)?, &rho0, tol, max_iters)?;
            sum += ss.last_reading().map(|q| q.y).unwrap_or(0.0);
            iters = iters.max(ss.iterations);
        }
        Ok((sum / t_waits.len() as f64, iters))
    }
}

/// Per-spin polarization of the bath marginal of `state`.
pub fn bath_polarization(state: &QuantumState, t_us: f64) -> Result<PolarizationRecord> {
    PolarizationRecord::from_bath(&state.bath_marginal(), t_us)
}

/// Iterate `channel` from `rho0` until successive bath states are closer
/// than `tol` in trace distance.
pub fn steady_state_cycle(
    channel: &BathChannel,
    rho0: &CMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<SteadyState> {
    let mut rho = rho0.clone();
    let mut readings = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let (next, reads) = channel.apply(&rho);
        readings.push(reads);
        let (done, res) = trace_distance_below(&next, &rho, tol);
        residual = res;
        rho = next;
        if done {
            let polarization = PolarizationRecord::from_bath(&rho, 0.0)?;
            return Ok(SteadyState {
                bath: rho,
                polarization,
                readings,
                iterations: it,
                residual,
            });
        }
    }
    Err(QpsError::NoConvergence {
        iterations: max_iters,
        residual,
    })
}

/// Default steady-state tolerance (trace distance).
pub const STEADY_TOL: f64 = 1e-8;
/// Default iteration cap.
pub const STEADY_MAX_ITERS: usize = 10_000;

/// `count` equally spaced waiting times covering one Larmor period.
pub fn larmor_period_grid(field: &FieldParams, count: usize) -> Vec<f64> {
    let tl = TAU / field.omega_l;
    (0..count).map(|i| i as f64 * tl / count as f64).collect()
}
