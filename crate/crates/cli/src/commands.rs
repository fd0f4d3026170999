use std::f64::consts::PI;
use std::fmt::Write as _;

use clap::ValueEnum;
use qps_core::bath::{epsilon, gaussian_validity_horizon, rad_per_us_to_khz};
use qps_core::reconstruction::{fit_epsilon, fit_tau_sweep, fit_twait, FitResult, TwaitSetup};
use qps_core::trace::CoherenceTrace;

use crate::config::LoadedConfig;
use crate::scenario::builtins;
use crate::CliError;

/// A coupling at or above this fraction of ω_L is flagged as outside the
/// Gaussian regime.
pub const STRONG_COUPLING_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    /// ε from ⟨X⟩ of a Hahn τ sweep.
    Epsilon,
    /// (p̄_z, p̃_⊥, φ) from ⟨Y⟩ versus precession time.
    Twait,
    /// (ε, p̄_z) from an M-pulse τ sweep.
    TauSweep,
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub model: FitKind,
    pub pulses: u32,
    /// Echo interval for the t_wait model; π/ω_L if absent.
    pub tau: Option<f64>,
    /// ε for the t_wait model; the config value if absent.
    pub eps: Option<f64>,
    pub eps_ci: f64,
}

/// Fit a trace. A fit that ran but did not converge is returned as `Ok`;
/// the caller decides the exit status from `converged`.
pub fn fit(csv: &str, cfg: &LoadedConfig, args: &FitArgs) -> Result<FitResult, CliError> {
    let trace = CoherenceTrace::from_csv(csv)?;
    let w = cfg.field.omega_l;
    let res = match args.model {
        FitKind::Epsilon => fit_epsilon(&trace, w)?,
        FitKind::TauSweep => fit_tau_sweep(&trace, args.pulses, w)?,
        FitKind::Twait => {
            let setup = TwaitSetup {
                tau: args.tau.unwrap_or(PI / w),
                eps: args.eps.unwrap_or_else(|| epsilon(&cfg.bath, &cfg.field)),
                eps_ci: args.eps_ci,
                a_perp_sum: cfg.bath.sum_a_perp(),
                omega_l: w,
            };
            fit_twait(&trace, &setup)?
        }
    };
    Ok(res)
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub epsilon: f64,
    pub horizon_us: Option<f64>,
    pub warnings: Vec<String>,
    pub text: String,
}

pub fn validate(cfg: &LoadedConfig) -> ValidationReport {
    let (bath, field) = (&cfg.bath, &cfg.field);
    let eps = epsilon(bath, field);
    let horizon = gaussian_validity_horizon(bath).ok();
    let mut warnings = Vec::new();
    let mut t = String::new();
    let _ = writeln!(t, "config: {}", cfg.source);
    let _ = writeln!(t, "label: {}", bath.label);
    let _ = writeln!(t, "omega_L_khz: {}", rad_per_us_to_khz(field.omega_l));
    let _ = writeln!(t, "spins: {}", bath.len());
    let _ = writeln!(t, "epsilon: {eps:.6}");
    match horizon {
        Some(h) => {
            let _ = writeln!(t, "gaussian_horizon_us: {h:.4}");
        }
        None => {
            let _ = writeln!(t, "gaussian_horizon_us: n/a");
        }
    }
    if !bath.is_empty() {
        let _ = writeln!(t, "spin  a_par_khz  a_perp_khz  max/omega_L  p_z  p_perp");
    }
    for (i, s) in bath.spins.iter().enumerate() {
        let ratio = s.max_coupling() / field.omega_l;
        let _ = writeln!(
            t,
            "{i:>4}  {:>9.3}  {:>10.3}  {:>11.4}  {:>4}  {:>6}",
            s.a_par_khz(),
            s.a_perp_khz(),
            ratio,
            s.p_z,
            s.p_perp
        );
        if ratio >= STRONG_COUPLING_FRACTION {
            warnings.push(format!(
                "spin {i}: coupling is {ratio:.2} omega_L; Gaussian predictions are unreliable"
            ));
        }
    }
    if eps >= 1.0 {
        warnings.push(format!("epsilon = {eps:.3} >= 1; strong-coupling regime"));
    }
    for w in &warnings {
        let _ = writeln!(t, "warning: {w}");
    }
    ValidationReport {
        epsilon: eps,
        horizon_us: horizon,
        warnings,
        text: t,
    }
}

pub fn list_scenarios() -> String {
    let mut t = String::new();
    for s in builtins() {
        let _ = writeln!(
            t,
            "{:<18} {:<18} {:<5} {}",
            s.name,
            s.sequence.kind(),
            s.bath,
            s.description
        );
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_with(spins: &str) -> LoadedConfig {
        let text = format!(
            r#"{{"label": "t", "field": {{"b0_gauss": 310.8, "omega_L_khz": 335.0, "gamma_n_khz_per_gauss": 1.07084, "gamma_e_mhz_per_gauss": 2.802495}}, "spins": [{spins}]}}"#
        );
        LoadedConfig::from_text("mem", text).unwrap()
    }

    #[test]
    fn validate_nv_a() {
        let r = validate(&LoadedConfig::load("nv_a").unwrap());
        assert!((r.epsilon - 0.094).abs() < 0.002, "{}", r.epsilon);
        assert!((r.horizon_us.unwrap() - 2.0).abs() < 0.1);
        assert!(r.warnings.is_empty());
        assert!(r.text.contains("epsilon: 0.09"));
    }

    #[test]
    fn validate_empty_and_strong() {
        let r = validate(&cfg_with(""));
        assert_eq!(r.epsilon, 0.0);
        assert!(r.warnings.is_empty());
        assert!(r.text.contains("n/a"));
        let r = validate(&cfg_with(r#"{"a_par_khz": 0.0, "a_perp_khz": 335.0}"#));
        assert_eq!(r.warnings.len(), 2, "{:?}", r.warnings);
        assert!(r.text.contains("warning: spin 0"));
    }

    #[test]
    fn fit_reports_parse_line() {
        let cfg = LoadedConfig::load("nv_a").unwrap();
        let args = FitArgs { model: FitKind::Epsilon, pulses: 1, tau: None, eps: None, eps_ci: 0.0 };
        let err = fit("tau_us,x,y\n0.1,1,0\n0.2,oops,0\n", &cfg, &args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = fit("tau_us,x\n0.1,1\n", &cfg, &args).unwrap_err();
        assert!(err.to_string().contains("`y`"), "{err}");
    }
}
