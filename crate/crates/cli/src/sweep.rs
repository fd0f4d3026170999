//! Scenario execution: sweep points are spread over a bounded worker pool and
//! collected back in sweep order, so the CSV never depends on scheduling.

use std::fmt::Write as _;
use std::f64::consts::PI;

use qps_core::analytics::{chi_cpmg, phi_q_cpmg};
use qps_core::bath::{epsilon, khz_to_rad_per_us, weighted_axial_polarization, BathConfig};
use qps_core::dynamics::{
    CycleParams, EchoParams, NovelParams, PolarizationRecord, SpinLockVariant, SpinSystem,
};
use qps_core::reconstruction::add_gaussian_noise;
use qps_core::trace::{CoherenceTrace, TracePoint};
use rayon::prelude::*;

use crate::config::LoadedConfig;
use crate::scenario::{Scenario, Sequence};
use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub seed: u64,
    pub threads: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { seed: 0, threads: 1 }
    }
}

/// Column names plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn select(self, wanted: &[String]) -> Result<Self, CliError> {
        if wanted.is_empty() {
            return Ok(self);
        }
        let idx = wanted
            .iter()
            .map(|w| {
                self.columns.iter().position(|c| c == w).ok_or_else(|| {
                    CliError::Input(format!("unknown output `{w}`; available: {}", self.columns.join(", ")))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
        })
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn polarized(bath: &BathConfig, p: Option<[f64; 3]>) -> Result<BathConfig, CliError> {
    match p {
        Some(p) => Ok(bath.uniformly_polarized(p)?),
        None => Ok(bath.clone()),
    }
}

fn trace_table(trace: &CoherenceTrace) -> Table {
    let columns = vec![
        trace.control_name.clone(),
        "x".into(),
        "y".into(),
        "w_mag".into(),
        "phi".into(),
    ];
    let rows = trace
        .points
        .iter()
        .map(|p| vec![num(p.control), num(p.x), num(p.y), num(p.w_mag()), num(p.phi())])
        .collect();
    Table { columns, rows }
}

fn parallel<T, F>(pool: &rayon::ThreadPool, xs: &[f64], f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(f64) -> Result<T, CliError> + Sync,
{
    pool.install(|| xs.par_iter().map(|&x| f(x)).collect())
}

fn point(control: f64, x: f64, y: f64) -> TracePoint {
    TracePoint { control, x, y }
}

/// Run a scenario and return its table.
pub fn run_table(sc: &Scenario, cfg: &LoadedConfig, opts: &SweepOptions) -> Result<Table, CliError> {
    sc.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    let xs = sc.sweep.values();
    let field = cfg.field;
    let w = field.omega_l;
    let axis = sc.sequence.axis();

    let trace = |points: Vec<TracePoint>| CoherenceTrace::new(axis, points);
    let noisy = |t: CoherenceTrace| -> Result<CoherenceTrace, CliError> {
        if sc.noise_sigma > 0.0 {
            Ok(add_gaussian_noise(&t, sc.noise_sigma, opts.seed)?)
        } else {
            Ok(t)
        }
    };
    let no_noise = || -> Result<(), CliError> {
        if sc.noise_sigma > 0.0 {
            return Err(CliError::Input(format!(
                "noise_sigma is not supported for kind {}",
                sc.sequence.kind()
            )));
        }
        Ok(())
    };

    let table = match &sc.sequence {
        Sequence::PseTau { pulses, polarization } => {
            let sys = SpinSystem::new(polarized(&cfg.bath, *polarization)?, field)?;
            let s0 = sys.initial_state()?;
            let pts = parallel(&pool, &xs, |tau| {
                let q = sys.run_pse(&s0, &EchoParams::pse(tau, *pulses))?.quadratures;
                Ok(point(tau, q.x, q.y))
            })?;
            trace_table(&noisy(trace(pts))?)
        }
        Sequence::Twait { tau_us, polarization } => {
            let sys = SpinSystem::new(polarized(&cfg.bath, *polarization)?, field)?;
            let s0 = sys.initial_state()?;
            let tau = tau_us.unwrap_or(PI / w);
            let pts = parallel(&pool, &xs, |tw| {
                let s = sys.free_schedule(tw)?.compile(Default::default())?.run(&s0)?.0;
                let q = sys.run_pse(&s, &EchoParams::pse(tau, 1))?.quadratures;
                Ok(point(tw, q.x, q.y))
            })?;
            trace_table(&noisy(trace(pts))?)
        }
        Sequence::Gaussian { pulses, polarization } => {
            let bath = polarized(&cfg.bath, *polarization)?;
            let eps = epsilon(&bath, &field);
            let pz = if eps > 0.0 { weighted_axial_polarization(&bath)? } else { 0.0 };
            let pts = xs
                .iter()
                .map(|&tau| {
                    let m = (-chi_cpmg(tau, *pulses, eps, w)).exp();
                    let ph = phi_q_cpmg(tau, *pulses, eps, pz, w);
                    point(tau, m * ph.cos(), m * ph.sin())
                })
                .collect();
            trace_table(&noisy(trace(pts))?)
        }
        Sequence::Deviation { polarization, threshold } => {
            no_noise()?;
            let bath = polarized(&cfg.bath, *polarization)?;
            let sys = SpinSystem::new(bath.clone(), field)?;
            let s0 = sys.initial_state()?;
            let exact = trace(parallel(&pool, &xs, |tau| {
                let q = sys.run_pse(&s0, &EchoParams::pse(tau, 1))?.quadratures;
                Ok(point(tau, q.x, q.y))
            })?);
            let gauss = trace(
                xs.iter()
                    .map(|&tau| {
                        let g = qps_core::analytics::hahn_point(tau, &bath, &field, 0.0)?;
                        Ok(point(tau, g.x, g.y))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?,
            );
            let d = qps_core::reconstruction::gaussian_deviation(
                &exact,
                &gauss,
                qps_core::reconstruction::Threshold::RelativeToPeak(*threshold),
            )?;
            let peak = gauss.points.iter().map(|p| p.y.abs()).fold(0.0, f64::max);
            let columns = ["tau_us", "x_exact", "y_exact", "x_gauss", "y_gauss", "d_w_mag", "d_phi", "d_y", "exceeds"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows = (0..xs.len())
                .map(|i| {
                    let (e, g) = (exact.points[i], gauss.points[i]);
                    vec![
                        num(xs[i]),
                        num(e.x),
                        num(e.y),
                        num(g.x),
                        num(g.y),
                        num(d.d_w_mag[i]),
                        num(d.d_phi[i]),
                        num(d.d_y[i]),
                        u8::from(d.d_y[i] > threshold * peak).to_string(),
                    ]
                })
                .collect();
            Table { columns, rows }
        }
        Sequence::Xy8 { repeats } => {
            let sys = SpinSystem::new(cfg.bath.clone(), field)?;
            let s0 = sys.initial_state()?;
            let pts = parallel(&pool, &xs, |tau| Ok(sys.run_xy8(&s0, &[tau], *repeats)?.points[0]))?;
            trace_table(&noisy(trace(pts))?)
        }
        Sequence::SpinlockVariants { omega_sl_khz } => {
            no_noise()?;
            let sys = SpinSystem::new(cfg.bath.clone(), field)?;
            let omega = omega_sl_khz.map(khz_to_rad_per_us).unwrap_or(w);
            let series: Vec<(SpinLockVariant, Vec<PolarizationRecord>)> = pool.install(|| {
                SpinLockVariant::ALL
                    .par_iter()
                    .map(|&v| Ok((v, sys.spinlock_variant(v, omega, &xs)?)))
                    .collect::<Result<Vec<_>, CliError>>()
            })?;
            let columns = ["variant", "spin_index", "t_us", "px", "py", "pz"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let mut rows = Vec::new();
            for (v, recs) in &series {
                for r in recs {
                    for (j, p) in r.spins.iter().enumerate() {
                        rows.push(vec![v.name().to_string(), j.to_string(), num(r.t_us), num(p[0]), num(p[1]), num(p[2])]);
                    }
                }
            }
            Table { columns, rows }
        }
        Sequence::CseCompare {
            t_sum_center_us,
            t_sum_offsets_larmor,
            t_wait_points,
            cse_spacing_larmor,
            novel_reps,
            t_sl_us,
            tol,
            max_iters,
        } => {
            no_noise()?;
            if t_sum_offsets_larmor.is_empty() || *t_wait_points == 0 {
                return Err(CliError::Input("need at least one t_sum and one t_wait".into()));
            }
            let sys = SpinSystem::new(cfg.bath.clone(), field)?;
            let tl = field.larmor_period();
            let t_sums: Vec<f64> = t_sum_offsets_larmor.iter().map(|o| t_sum_center_us + o * tl).collect();
            let t_waits: Vec<f64> = (0..*t_wait_points).map(|i| i as f64 * tl / *t_wait_points as f64).collect();
            let novel = NovelParams::resonant(w, *t_sl_us, *novel_reps);
            let per_tau = parallel(&pool, &xs, |tau| {
                let mut with = Vec::new();
                let mut without = Vec::new();
                let mut iters = 0;
                for &t_sum in &t_sums {
                    for (spacing, out) in [(None, &mut without), (Some(cse_spacing_larmor * tl), &mut with)] {
                        let cycle = CycleParams {
                            novel,
                            t_wait: 0.0,
                            echo: EchoParams::pse(tau, 1),
                            cse_spacing: spacing,
                            t_sum,
                        };
                        let (y, it) = sys.averaged_steady_y(&cycle, &t_waits, *tol, *max_iters)?;
                        out.push(y);
                        iters = iters.max(it);
                    }
                }
                Ok((without, with, iters))
            })?;
            let spread = |v: &[f64]| {
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
            };
            let mut columns = vec!["tau_us".to_string()];
            for i in 0..t_sums.len() {
                columns.push(format!("y_nocse_{i}"));
            }
            for i in 0..t_sums.len() {
                columns.push(format!("y_cse_{i}"));
            }
            columns.extend(["spread_nocse", "spread_cse", "spread_ratio", "max_iterations"].map(String::from));
            let rows = xs
                .iter()
                .zip(&per_tau)
                .map(|(&tau, (without, with, iters))| {
                    let mut r = vec![num(tau)];
                    r.extend(without.iter().map(|&y| num(y)));
                    r.extend(with.iter().map(|&y| num(y)));
                    let (sn, sc) = (spread(without), spread(with));
                    r.extend([num(sn), num(sc), num(sn / sc), iters.to_string()]);
                    r
                })
                .collect();
            Table { columns, rows }
        }
    };
    table.select(&sc.outputs)
}

/// Run a scenario and render CSV with a `#` metadata block.
pub fn run_csv(sc: &Scenario, cfg: &LoadedConfig, opts: &SweepOptions) -> Result<String, CliError> {
    let table = run_table(sc, cfg, opts)?;
    let mut out = String::new();
    let _ = writeln!(out, "# scenario: {}", sc.name);
    let _ = writeln!(out, "# kind: {}", sc.sequence.kind());
    let _ = writeln!(out, "# config: {}", cfg.source);
    let _ = writeln!(out, "# config_sha256: {}", cfg.sha256());
    let _ = writeln!(out, "# seed: {}", opts.seed);
    let _ = writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "# sweep: {} from {} to {} in {} steps",
        sc.sweep.variable, sc.sweep.start, sc.sweep.stop, sc.sweep.steps
    );
    if sc.noise_sigma > 0.0 {
        let _ = writeln!(out, "# noise_sigma: {}", sc.noise_sigma);
    }
    let _ = writeln!(out, "{}", table.columns.join(","));
    for r in &table.rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    Ok(out)
}
