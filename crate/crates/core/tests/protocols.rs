use std::f64::consts::PI;

use qps_core::analytics::hahn_point;
use qps_core::bath::{nv_a, weighted_axial_polarization, BathConfig, BathSpin, FieldParams};
use qps_core::dynamics::{
    bath_polarization, maximally_mixed, steady_state_cycle, CycleParams, EchoParams, NovelParams,
    SpinSystem,
};

fn local_minima(ys: &[f64], depth: f64) -> usize {
    (1..ys.len() - 1)
        .filter(|&i| ys[i] < ys[i - 1] && ys[i] <= ys[i + 1] && ys[i] < 1.0 - depth)
        .count()
}

#[test]
fn xy8_shows_coupling_dips_for_nv_a() {
    let (bath, field) = nv_a();
    let sys = SpinSystem::new(bath, field).unwrap();
    let s0 = sys.initial_state().unwrap();
    let taus: Vec<f64> = (0..281).map(|i| 0.2 + 0.01 * i as f64).collect();
    let t = sys.run_xy8(&s0, &taus, 2).unwrap();
    let xs = t.xs();
    assert!(local_minima(&xs, 0.05) >= 5, "{}", local_minima(&xs, 0.05));
    assert!(xs.iter().all(|x| x.abs() <= 1.0 + 1e-12));
}

#[test]
fn single_spin_xy8_dip_sits_near_half_larmor_period() {
    let field = FieldParams::from_larmor_khz(335.0).unwrap();
    let bath = BathConfig::new("one", vec![BathSpin::from_khz(10.0, 40.0).unwrap()]);
    let sys = SpinSystem::new(bath, field).unwrap();
    let s0 = sys.initial_state().unwrap();
    let center = PI / field.omega_l;
    let taus: Vec<f64> = (0..201).map(|i| center * (0.7 + 0.003 * i as f64)).collect();
    let xs = sys.run_xy8(&s0, &taus, 2).unwrap().xs();
    let (imin, xmin) = xs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, &x)| if x < a.1 { (i, x) } else { a });
    assert!(xmin < 0.5, "{xmin}");
    assert!((taus[imin] / center - 1.0).abs() < 0.1, "{}", taus[imin] / center);
}

#[test]
fn repeated_spin_lock_builds_axial_polarization() {
    let (bath, field) = nv_a();
    let sys = SpinSystem::new(bath.clone(), field).unwrap();
    // the bundled config is unpolarized, so this is |0⟩ ⊗ maximally mixed
    let mixed = sys.initial_state().unwrap();
    let pz = |reps| {
        let s = sys.run_novel(&mixed, &NovelParams::resonant(field.omega_l, 4.0, reps)).unwrap();
        let rec = bath_polarization(&s, 0.0).unwrap();
        let polarized = BathConfig::new(
            "p",
            bath.spins
                .iter()
                .zip(&rec.spins)
                .map(|(b, p)| b.with_polarization(*p).unwrap())
                .collect(),
        );
        weighted_axial_polarization(&polarized).unwrap()
    };
    let (one, three) = (pz(1), pz(3));
    assert!(one.abs() > 0.01, "{one}");
    assert!(three.abs() > one.abs(), "{one} {three}");
}

#[test]
fn zero_coupling_removes_back_action() {
    let (bath, field) = nv_a();
    let bath = bath.uniformly_polarized([0.3, 0.2, 0.6]).unwrap();
    let sys = SpinSystem::new(bath.scaled(0.0), field).unwrap();
    let echo = EchoParams::pse(1.0, 1);
    let r = sys.compensation_residual(&echo, Some(2.0 * field.larmor_period())).unwrap();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn zero_coupling_steady_state_is_immediate() {
    let (bath, field) = nv_a();
    let sys = SpinSystem::new(bath.scaled(0.0), field).unwrap();
    let cycle = CycleParams {
        novel: NovelParams::resonant(field.omega_l, 4.0, 3),
        t_wait: 0.3,
        echo: EchoParams::pse(1.0, 1),
        cse_spacing: Some(2.0 * field.larmor_period()),
        t_sum: 41.25,
    };
    let ch = sys.channel(&sys.protocol_cycle(&cycle).unwrap()).unwrap();
    let ss = steady_state_cycle(&ch, &maximally_mixed(bath.len()), 1e-10, 10).unwrap();
    assert_eq!(ss.iterations, 1);
    assert!(ss.last_reading().unwrap().y.abs() < 1e-12);
}

#[test]
fn spin_lock_leaves_transverse_polarization_on_axially_coupled_spins() {
    let (bath, field) = nv_a();
    let sys = SpinSystem::new(bath.clone(), field).unwrap();
    let recs = sys
        .spinlock_variant(qps_core::dynamics::SpinLockVariant::Full, field.omega_l, &[4.0])
        .unwrap();
    let strong = bath
        .spins
        .iter()
        .zip(&recs[0].spins)
        .filter(|(s, _)| s.a_par_khz().abs() > 20.0)
        .map(|(_, p)| p[0].hypot(p[1]))
        .fold(0.0, f64::max);
    assert!(strong > 1e-3, "{strong}");
}

#[test]
fn hahn_echo_near_gaussian_at_short_tau() {
    let (bath, field) = nv_a();
    let bath = bath.uniformly_polarized([0.0, 0.0, 1.0]).unwrap();
    let sys = SpinSystem::new(bath.clone(), field).unwrap();
    let s0 = sys.initial_state().unwrap();
    let q = sys.run_pse(&s0, &EchoParams::pse(1.5, 1)).unwrap().quadratures;
    let g = hahn_point(1.5, &bath, &field, 0.0).unwrap();
    assert!((q.y - g.y).abs() <= 0.1 * g.y.abs(), "{} {}", q.y, g.y);
    assert!((q.x - g.x).abs() <= 0.1 * g.x.abs(), "{} {}", q.x, g.x);
}
