use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions, LmSolution};
use crate::analytics::{chi_cpmg, chi_hahn, phi_q_cpmg};
use crate::error::{QpsError, Result};
use crate::trace::{CoherenceTrace, TracePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// ⟨X⟩ = exp(−2ε sin⁴(ω_L τ/4)) versus τ.
    Epsilon,
    /// ⟨Y⟩ versus t_wait at fixed τ: quench offset plus precessing mean field.
    Twait,
    /// Joint ⟨X⟩, ⟨Y⟩ versus τ for an M-pulse CPMG sequence.
    TauSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    /// 1σ half-width; `None` when the parameter is not resolvable.
    pub ci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub parameters: Vec<FitParameter>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub rms: f64,
    pub points: usize,
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub flags: Vec<String>,
}

impl FitResult {
    fn from_solution(model: FitModel, names: &[&str], sol: &LmSolution) -> Self {
        let cov = sol.covariance();
        let parameters = names
            .iter()
            .enumerate()
            .map(|(i, n)| FitParameter {
                name: (*n).to_string(),
                value: sol.x[i],
                ci: Some(cov[(i, i)].max(0.0).sqrt()),
            })
            .collect();
        let n = sol.residuals.len();
        Self {
            model,
            parameters,
            residual_norm: sol.residuals.norm(),
            rms: sol.residuals.norm() / (n as f64).sqrt(),
            points: n,
            covariance: (0..cov.nrows()).map(|r| cov.row(r).iter().copied().collect()).collect(),
            iterations: sol.iterations,
            converged: sol.converged,
            flags: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn ci(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|p| p.ci)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn flag_pz_range(&mut self) {
        if let Some(pz) = self.value("pz_bar") {
            if pz.abs() > 1.0 {
                self.flags.push(format!("pz_bar = {pz:.4} lies outside [-1, 1]"));
            }
        }
    }
}

fn check_finite(trace: &CoherenceTrace) -> Result<()> {
    if trace.points.iter().any(|p| !(p.control.is_finite() && p.x.is_finite() && p.y.is_finite())) {
        return Err(QpsError::InvalidParameter("trace contains non-finite values".into()));
    }
    Ok(())
}

/// Unit-ε Hahn dephasing weight 2 sin⁴(ω_L τ/4).
fn hahn_weight(tau: f64, omega_l: f64) -> f64 {
    chi_hahn(tau, 1.0, omega_l)
}

/// Fit ε to ⟨X⟩(τ) of a Hahn echo, ignoring the phase.
///
/// Needs at least 8 points and a sweep reaching τ ≥ T_L/2 (the model is
/// pinned to X = 1 at τ = 0).
pub fn fit_epsilon(trace: &CoherenceTrace, omega_l: f64) -> Result<FitResult> {
    check_finite(trace)?;
    if !(omega_l > 0.0) {
        return Err(QpsError::InvalidParameter("omega_L must be > 0".into()));
    }
    if trace.len() < 8 {
        return Err(QpsError::DegenerateSampling(format!("{} points, need >= 8", trace.len())));
    }
    let taus = trace.controls();
    let xs = trace.xs();
    let tmax = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if tmax < PI / omega_l * (1.0 - 1e-9) {
        return Err(QpsError::DegenerateSampling(
            "sweep must reach half a Larmor period".into(),
        ));
    }
    let w: Vec<f64> = taus.iter().map(|&t| hahn_weight(t, omega_l)).collect();
    if w.iter().map(|v| v * v).sum::<f64>() < 1e-12 {
        return Err(QpsError::DegenerateSampling("all τ sit on echo revivals".into()));
    }
    // −ln X / weight over well-conditioned points
    let guesses: Vec<f64> = w
        .iter()
        .zip(&xs)
        .filter(|(w, x)| **w > 0.2 && **x > 1e-3)
        .map(|(w, x)| -x.ln() / w)
        .collect();
    let eps0 = if guesses.is_empty() {
        0.1
    } else {
        guesses.iter().sum::<f64>() / guesses.len() as f64
    };
    let sol = levenberg_marquardt(
        |p| {
            let mut r = DVector::zeros(xs.len());
            let mut j = DMatrix::zeros(xs.len(), 1);
            for i in 0..xs.len() {
                let m = (-p[0] * w[i]).exp();
                r[i] = m - xs[i];
                j[(i, 0)] = -w[i] * m;
            }
            (r, j)
        },
        DVector::from_vec(vec![eps0]),
        &LmOptions::default(),
    )?;
    Ok(FitResult::from_solution(FitModel::Epsilon, &["eps"], &sol))
}

/// Known quantities for the t_wait fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwaitSetup {
    /// Echo interval τ (µs); the standard choice is π/ω_L.
    pub tau: f64,
    pub eps: f64,
    /// 1σ uncertainty of ε, propagated into the p̄_z interval.
    pub eps_ci: f64,
    /// Σ_j A⊥,j (rad/µs).
    pub a_perp_sum: f64,
    pub omega_l: f64,
}

impl TwaitSetup {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(QpsError::InvalidParameter("eps must be > 0".into()));
        }
        if !(self.a_perp_sum > 0.0) {
            return Err(QpsError::InvalidParameter("sum of A_perp must be > 0".into()));
        }
        if !(self.omega_l > 0.0) || !(self.tau > 0.0) || !(self.eps_ci >= 0.0) {
            return Err(QpsError::InvalidParameter("need omega_L > 0, tau > 0, eps_ci >= 0".into()));
        }
        Ok(())
    }

    /// (e^{−χ}, quench gain h, mean-field gain g, echo phase b):
    /// Y = e^{−χ} sin(p̄ ε h + S p̃ g sin(ω t + φ + b)).
    fn gains(&self) -> (f64, f64, f64, f64) {
        let q = self.omega_l * self.tau / 4.0;
        let decay = (-chi_hahn(self.tau, self.eps, self.omega_l)).exp();
        let h = self.eps * q.sin().powi(2) * (2.0 * q).sin();
        let g = self.a_perp_sum * 2.0 * q.sin().powi(2) / self.omega_l;
        (decay, h, g, 2.0 * q)
    }

    /// Model ⟨Y⟩ at `t_wait` for (p̄_z, p̃_⊥, φ).
    pub fn model_y(&self, t_wait: f64, pz_bar: f64, p_perp: f64, phi: f64) -> f64 {
        let (decay, h, g, b) = self.gains();
        decay * (pz_bar * h + p_perp * g * (self.omega_l * t_wait + phi + b).sin()).sin()
    }

    /// Noiseless trace of the model.
    pub fn synthesize(&self, t_waits: &[f64], pz_bar: f64, p_perp: f64, phi: f64) -> CoherenceTrace {
        let (decay, h, g, b) = self.gains();
        let points = t_waits
            .iter()
            .map(|&t| {
                let arg = pz_bar * h + p_perp * g * (self.omega_l * t + phi + b).sin();
                TracePoint { control: t, x: decay * arg.cos(), y: decay * arg.sin() }
            })
            .collect();
        CoherenceTrace::new("t_wait_us", points)
    }
}

/// Fit ⟨Y⟩(t_wait) to a constant quench phase plus a mean-field phase
/// precessing at ω_L, with ε held fixed. Transverse polarization is assumed
/// uniform across the bath.
pub fn fit_twait(trace: &CoherenceTrace, setup: &TwaitSetup) -> Result<FitResult> {
    check_finite(trace)?;
    setup.validate()?;
    let n = trace.len();
    if n < 12 {
        return Err(QpsError::DegenerateSampling(format!("{n} points, need >= 12")));
    }
    let ts = trace.controls();
    let ys = trace.ys();
    let (tmin, tmax) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let period = 2.0 * PI / setup.omega_l;
    let coverage = (tmax - tmin) * n as f64 / (n - 1) as f64;
    if coverage < period * (1.0 - 1e-9) {
        return Err(QpsError::DegenerateSampling("t_wait sweep must cover one Larmor period".into()));
    }
    let (decay, h, g, b) = setup.gains();
    let w = setup.omega_l;

    // Seed by projecting arcsin(Y/decay) onto {1, cos ωt, sin ωt}.
    let mut a = DMatrix::zeros(n, 3);
    let mut u = DVector::zeros(n);
    for i in 0..n {
        let (s, c) = (w * ts[i]).sin_cos();
        a[(i, 0)] = 1.0;
        a[(i, 1)] = c;
        a[(i, 2)] = s;
        u[i] = (ys[i] / decay).clamp(-1.0, 1.0).asin();
    }
    let coef = super::lm::pseudo_inverse(&(a.transpose() * &a)) * (a.transpose() * u);
    // B sin(ωt + ψ) = B sin ψ cos ωt + B cos ψ sin ωt
    let amp = coef[1].hypot(coef[2]);
    let psi = coef[1].atan2(coef[2]);
    let x0 = DVector::from_vec(vec![coef[0] / h, amp / g, psi - b]);

    let sol = levenberg_marquardt(
        |p| {
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, 3);
            for i in 0..n {
                let ang = w * ts[i] + p[2] + b;
                let (sa, ca) = ang.sin_cos();
                let arg = p[0] * h + p[1] * g * sa;
                let (s, c) = arg.sin_cos();
                r[i] = decay * s - ys[i];
                j[(i, 0)] = decay * c * h;
                j[(i, 1)] = decay * c * g * sa;
                j[(i, 2)] = decay * c * p[1] * g * ca;
            }
            (r, j)
        },
        x0,
        &LmOptions::default(),
    )?;
    let mut x = sol.x.clone();
    // canonical sign: p̃_⊥ ≥ 0, φ ∈ (−π, π]
    if x[1] < 0.0 {
        x[1] = -x[1];
        x[2] += PI;
    }
    x[2] = (x[2] + PI).rem_euclid(2.0 * PI) - PI;
    let sol = LmSolution { x, ..sol };

    let mut fit = FitResult::from_solution(FitModel::Twait, &["pz_bar", "p_perp", "phi"], &sol);
    let pz = sol.x[0];
    let pz_ci = fit.parameters[0].ci.unwrap_or(0.0);
    fit.parameters[0].ci = Some(pz_ci.hypot(pz.abs() * setup.eps_ci / setup.eps));
    let amp_ci = fit.parameters[1].ci.unwrap_or(0.0);
    if sol.x[1] * g * decay <= (2.0 * amp_ci * g * decay).max(1e-9) {
        fit.parameters[2].ci = None;
        fit.flags.push("transverse amplitude unresolved; phase undetermined".into());
    }
    fit.flag_pz_range();
    Ok(fit)
}

/// Noiseless CPMG-M trace of (⟨X⟩, ⟨Y⟩) versus τ.
pub fn synthesize_tau_sweep(taus: &[f64], pulses: u32, eps: f64, pz_bar: f64, omega_l: f64) -> CoherenceTrace {
    let points = taus
        .iter()
        .map(|&tau| {
            let m = (-chi_cpmg(tau, pulses, eps, omega_l)).exp();
            let ph = phi_q_cpmg(tau, pulses, eps, pz_bar, omega_l);
            TracePoint { control: tau, x: m * ph.cos(), y: m * ph.sin() }
        })
        .collect();
    CoherenceTrace::new("tau_us", points)
}

fn tau_sweep_solve(trace: &CoherenceTrace, pulses: u32, omega_l: f64) -> Result<LmSolution> {
    let taus = trace.controls();
    let (xs, ys) = (trace.xs(), trace.ys());
    let n = taus.len();
    // unit-ε, unit-p̄ profiles; both quantities are linear in ε
    let c1: Vec<f64> = taus.iter().map(|&t| chi_cpmg(t, pulses, 1.0, omega_l)).collect();
    let f1: Vec<f64> = taus.iter().map(|&t| phi_q_cpmg(t, pulses, 1.0, 1.0, omega_l)).collect();

    let eps_g: Vec<f64> = (0..n)
        .filter(|&i| c1[i] > 0.05)
        .map(|i| -xs[i].hypot(ys[i]).max(1e-6).ln() / c1[i])
        .collect();
    let eps0 = median(&eps_g).unwrap_or(0.1).max(1e-4);
    let pz_g: Vec<f64> = (0..n)
        .filter(|&i| f1[i].abs() > 0.05)
        .map(|i| ys[i].atan2(xs[i]) / (eps0 * f1[i]))
        .collect();
    let pz0 = median(&pz_g).unwrap_or(0.0);

    levenberg_marquardt(
        |p| {
            let mut r = DVector::zeros(2 * n);
            let mut j = DMatrix::zeros(2 * n, 2);
            for i in 0..n {
                let m = (-p[0] * c1[i]).exp();
                let ph = p[0] * p[1] * f1[i];
                let (s, c) = ph.sin_cos();
                r[2 * i] = m * c - xs[i];
                r[2 * i + 1] = m * s - ys[i];
                // ∂/∂ε and ∂/∂p̄
                let dph_de = p[1] * f1[i];
                let dph_dp = p[0] * f1[i];
                j[(2 * i, 0)] = -c1[i] * m * c - m * s * dph_de;
                j[(2 * i, 1)] = -m * s * dph_dp;
                j[(2 * i + 1, 0)] = -c1[i] * m * s + m * c * dph_de;
                j[(2 * i + 1, 1)] = m * c * dph_dp;
            }
            (r, j)
        },
        DVector::from_vec(vec![eps0, pz0]),
        &LmOptions::default(),
    )
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    Some(s[s.len() / 2])
}

/// Joint fit of ε and p̄_z to an M-pulse CPMG τ sweep. Residuals are taken on
/// ⟨X⟩ and ⟨Y⟩, which carry the same information as |W| and Φ without phase
/// wrapping. Neighbouring pulse counts are also tried; a clearly better one
/// is reported as a flag.
pub fn fit_tau_sweep(trace: &CoherenceTrace, pulses: u32, omega_l: f64) -> Result<FitResult> {
    check_finite(trace)?;
    if pulses == 0 {
        return Err(QpsError::InvalidParameter("pulse count must be >= 1".into()));
    }
    if !(omega_l > 0.0) {
        return Err(QpsError::InvalidParameter("omega_L must be > 0".into()));
    }
    if trace.len() < 4 {
        return Err(QpsError::DegenerateSampling(format!("{} points, need >= 4", trace.len())));
    }
    let informative = trace
        .controls()
        .iter()
        .filter(|&&t| chi_cpmg(t, pulses, 1.0, omega_l) > 1e-3)
        .count();
    if informative < 2 {
        return Err(QpsError::DegenerateSampling("τ grid sits on decoupled points only".into()));
    }
    let sol = tau_sweep_solve(trace, pulses, omega_l)?;
    let mut fit = FitResult::from_solution(FitModel::TauSweep, &["eps", "pz_bar"], &sol);
    let rss = sol.rss();
    for alt in [pulses.saturating_sub(1), pulses + 1] {
        if alt == 0 || alt == pulses {
            continue;
        }
        if let Ok(other) = tau_sweep_solve(trace, alt, omega_l) {
            if other.rss() < 0.25 * rss && fit.rms > 1e-6 {
                fit.flags.push(format!(
                    "pulse-count mismatch: M = {alt} fits with residual {:.3e} vs {:.3e}",
                    other.rss().sqrt(),
                    rss.sqrt()
                ));
            }
        }
    }
    fit.flag_pz_range();
    Ok(fit)
}
