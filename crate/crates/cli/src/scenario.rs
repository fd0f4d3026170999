//! Named sweep definitions. Built-ins cover the standard echo, polarization and
//! compensation studies; custom scenarios are JSON files with the same schema.

use serde::{Deserialize, Serialize};

use crate::CliError;

fn one() -> u32 {
    1
}
fn two() -> u32 {
    2
}
fn three() -> u32 {
    3
}
fn rel_threshold() -> f64 {
    0.15
}
fn t_sum_center() -> f64 {
    41.25
}
fn t_sum_offsets() -> Vec<f64> {
    vec![-1.0 / 3.0, 0.0, 1.0 / 3.0]
}
fn sixteen() -> usize {
    16
}
fn cse_spacing() -> f64 {
    2.0
}
fn t_sl() -> f64 {
    4.0
}
fn steady_tol() -> f64 {
    1e-8
}
fn max_iters() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sequence {
    /// Exact measurement echo (⟨X⟩, ⟨Y⟩) versus τ.
    PseTau {
        #[serde(default = "one")]
        pulses: u32,
        /// Uniform bath polarization (p_x, p_y, p_z); the config's own values if absent.
        #[serde(default)]
        polarization: Option<[f64; 3]>,
    },
    /// Exact measurement echo versus free precession time before the echo.
    Twait {
        /// Echo interval; π/ω_L if absent.
        #[serde(default)]
        tau_us: Option<f64>,
        #[serde(default)]
        polarization: Option<[f64; 3]>,
    },
    /// Gaussian-bath closed form versus τ.
    Gaussian {
        #[serde(default = "one")]
        pulses: u32,
        #[serde(default)]
        polarization: Option<[f64; 3]>,
    },
    /// Exact Hahn echo against the Gaussian prediction.
    Deviation {
        #[serde(default)]
        polarization: Option<[f64; 3]>,
        /// Allowed |Δ⟨Y⟩| as a fraction of the peak Gaussian |⟨Y⟩|.
        #[serde(default = "rel_threshold")]
        threshold: f64,
    },
    /// XY8-N coherence versus pulse spacing.
    Xy8 {
        #[serde(default = "two")]
        repeats: u32,
    },
    /// Bath polarization during one spin-lock pulse for the four drive variants.
    SpinlockVariants {
        /// Rabi frequency in kHz; ω_L if absent.
        #[serde(default)]
        omega_sl_khz: Option<f64>,
    },
    /// Steady-state ⟨Y⟩ of the repeated polarize-and-measure cycle, with and
    /// without the compensating echo, for several cycle lengths.
    CseCompare {
        #[serde(default = "t_sum_center")]
        t_sum_center_us: f64,
        /// Cycle-length offsets in Larmor periods.
        #[serde(default = "t_sum_offsets")]
        t_sum_offsets_larmor: Vec<f64>,
        #[serde(default = "sixteen")]
        t_wait_points: usize,
        #[serde(default = "cse_spacing")]
        cse_spacing_larmor: f64,
        #[serde(default = "three")]
        novel_reps: u32,
        #[serde(default = "t_sl")]
        t_sl_us: f64,
        #[serde(default = "steady_tol")]
        tol: f64,
        #[serde(default = "max_iters")]
        max_iters: usize,
    },
}

impl Sequence {
    pub fn kind(&self) -> &'static str {
        match self {
            Sequence::PseTau { .. } => "pse-tau",
            Sequence::Twait { .. } => "twait",
            Sequence::Gaussian { .. } => "gaussian",
            Sequence::Deviation { .. } => "deviation",
            Sequence::Xy8 { .. } => "xy8",
            Sequence::SpinlockVariants { .. } => "spinlock-variants",
            Sequence::CseCompare { .. } => "cse-compare",
        }
    }

    /// Name of the swept variable.
    pub fn axis(&self) -> &'static str {
        match self {
            Sequence::Twait { .. } => "t_wait_us",
            Sequence::SpinlockVariants { .. } => "t_us",
            _ => "tau_us",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Preset name or config path; `--config` takes precedence.
    pub bath: String,
    pub sequence: Sequence,
    pub sweep: SweepAxis,
    /// Columns to emit, in order; all columns if empty.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Standard deviation of additive noise on ⟨X⟩ and ⟨Y⟩.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl Scenario {
    pub fn from_json(text: &str, source: &str) -> Result<Self, CliError> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| {
            CliError::Input(format!("{source}: line {}, column {}: {e}", e.line(), e.column()))
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        let bad = |m: String| Err(CliError::Input(format!("scenario {}: {m}", self.name)));
        if s.variable != self.sequence.axis() {
            return bad(format!(
                "sweep variable `{}` does not match `{}` for kind {}",
                s.variable,
                self.sequence.axis(),
                self.sequence.kind()
            ));
        }
        if s.steps < 2 {
            return bad(format!("sweep needs at least 2 steps, got {}", s.steps));
        }
        if !(s.start.is_finite() && s.stop.is_finite()) || s.stop <= s.start {
            return bad(format!("sweep range [{}, {}] is empty", s.start, s.stop));
        }
        if s.start < 0.0 {
            return bad("sweep values must be >= 0".into());
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma must be finite and >= 0".into());
        }
        Ok(())
    }
}

fn scenario(name: &str, description: &str, bath: &str, sequence: Sequence, sweep: (f64, f64, usize)) -> Scenario {
    let variable = sequence.axis().to_string();
    Scenario {
        name: name.into(),
        description: description.into(),
        bath: bath.into(),
        sequence,
        sweep: SweepAxis {
            variable,
            start: sweep.0,
            stop: sweep.1,
            steps: sweep.2,
        },
        outputs: Vec::new(),
        noise_sigma: 0.0,
    }
}

const Z_POLARIZED: Option<[f64; 3]> = Some([0.0, 0.0, 1.0]);

/// The built-in scenarios, in listing order.
pub fn builtins() -> Vec<Scenario> {
    vec![
        scenario(
            "pse-tau",
            "NV A, z-polarized bath: exact Hahn echo quadratures versus tau",
            "nv_a",
            Sequence::PseTau { pulses: 1, polarization: Z_POLARIZED },
            (0.1, 6.0, 60),
        ),
        scenario(
            "pse-tau-m3",
            "NV A, z-polarized bath: exact three-pulse echo versus tau",
            "nv_a",
            Sequence::PseTau { pulses: 3, polarization: Z_POLARIZED },
            (0.05, 3.0, 60),
        ),
        scenario(
            "twait",
            "NV B at tau = pi/omega_L: echo quadratures versus precession time",
            "nv_b",
            Sequence::Twait { tau_us: None, polarization: Some([0.3 * 1f64.cos(), 0.3 * 1f64.sin(), 0.9]) },
            (0.0, 6.0, 48),
        ),
        scenario(
            "gaussian-hahn",
            "NV A Gaussian-bath closed form versus tau",
            "nv_a",
            Sequence::Gaussian { pulses: 1, polarization: Z_POLARIZED },
            (0.0, 6.0, 121),
        ),
        scenario(
            "deviation",
            "NV A exact versus Gaussian Hahn echo",
            "nv_a",
            Sequence::Deviation { polarization: Z_POLARIZED, threshold: 0.15 },
            (0.05, 6.0, 120),
        ),
        scenario(
            "xy8",
            "NV A XY8-2 coherence versus pulse spacing",
            "nv_a",
            Sequence::Xy8 { repeats: 2 },
            (0.2, 3.0, 281),
        ),
        scenario(
            "spinlock-variants",
            "NV A spin-lock polarization for the four drive variants",
            "nv_a",
            Sequence::SpinlockVariants { omega_sl_khz: None },
            (0.0, 10.0, 101),
        ),
        scenario(
            "cse-compare",
            "NV A steady-state <Y> over three cycle lengths, with and without compensation",
            "nv_a",
            Sequence::CseCompare {
                t_sum_center_us: t_sum_center(),
                t_sum_offsets_larmor: t_sum_offsets(),
                t_wait_points: sixteen(),
                cse_spacing_larmor: cse_spacing(),
                novel_reps: three(),
                t_sl_us: t_sl(),
                tol: steady_tol(),
                max_iters: max_iters(),
            },
            (0.5, 2.0, 4),
        ),
    ]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtins().into_iter().find(|s| s.name == name)
}

/// Built-in name, or a path to a scenario JSON file.
pub fn resolve(name_or_path: &str) -> Result<Scenario, CliError> {
    if let Some(s) = builtin(name_or_path) {
        return Ok(s);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {name_or_path}: {e}")))?;
        return Scenario::from_json(&text, name_or_path);
    }
    Err(CliError::Input(format!(
        "unknown scenario `{name_or_path}` (see `qps scenarios list`)"
    )))
}
