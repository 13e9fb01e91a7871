use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trimirror::constants::HBAR;
use trimirror::coupling::{default_window, quadratic_coupling};
use trimirror::dynamics::*;
use trimirror::modespectrum::{Branch, CavityGeometry, CavityMode};

fn table_one() -> (CavityGeometry, CavityMode, MechanicalOscillator) {
    let g = CavityGeometry::new(5e-3, 1e-4, 1e-5).unwrap();
    let m = CavityMode::number(&g, 10_000).unwrap();
    let mech = MechanicalOscillator::new(1e-9, 2.0 * std::f64::consts::PI * 2500.0, 2e-11, 300.0, 0.0).unwrap();
    (g, m, mech)
}

/// Characteristic-polynomial coefficients by Faddeev-LeVerrier, highest power first.
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * c[k - 1];
        let am = a * &m;
        c.push(-am.trace() / k as f64);
    }
    c
}

/// Hurwitz determinants of a quartic (a0 s^4 + ... + a4).
fn hurwitz_quartic(c: &[f64]) -> bool {
    let (a0, a1, a2, a3, a4) = (c[0], c[1], c[2], c[3], c[4]);
    let d2 = a1 * a2 - a0 * a3;
    let d3 = a3 * d2 - a1 * a1 * a4;
    a0 > 0.0 && a1 > 0.0 && d2 > 0.0 && d3 > 0.0 && a4 > 0.0
}

#[test]
fn random_drift_matrices_routh_hurwitz_agrees_with_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut stable_count = 0;
    for _ in 0..10_000 {
        let mut s = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let signs: [f64; 6] = [s(), s(), s(), s(), s(), s()];
        let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let (g2, d, k, gam, c1, c2) = (u(0.1, 2.0), u(0.0, 3.0), u(0.1, 3.0), u(0.01, 1.0), u(0.0, 1.0), u(0.0, 1.0));
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            signs[0] * g2, d,             0.0,              0.0,
            -d,            signs[1] * g2, signs[2] * c1,    0.0,
            signs[3] * c2, 0.0,           0.0,              1.0,
            0.0,           0.0,           signs[4] * k,     signs[5] * gam,
        ]);
        let r = stability(&a);
        // skip near-marginal draws where either verdict is roundoff
        if r.max_real.abs() < 1e-6 * r.spectral_radius.max(1.0) {
            continue;
        }
        checked += 1;
        stable_count += r.stable as usize;
        assert_eq!(r.stable, r.routh_hurwitz, "{a}");
        assert_eq!(r.stable, hurwitz_quartic(&char_poly(&a)), "{a}");
    }
    assert!(checked > 9_000);
    assert!(stable_count > 100 && stable_count < checked);
}

#[test]
fn eigenvalues_match_trace_and_determinant() {
    let (g, m, mech) = table_one();
    let drive = DriveField::new(1e-3, 0.3 * g.gamma(), Branch::Odd).unwrap();
    let sys = quadratic_system(&g, &m, &mech, &drive).unwrap();
    let r = stability(&sys.drift);
    let sum: f64 = r.eigenvalues.iter().map(|e| e.re).sum();
    assert!((sum - sys.drift.trace()).abs() < 1e-9 * sys.drift.trace().abs());
    assert!(r.stable);
}

#[test]
fn quadratic_damping_is_intrinsic_and_zero_power_is_bare() {
    let (g, m, mech) = table_one();
    let off = DriveField::new(0.0, 0.0, Branch::Odd).unwrap();
    let r = effective_params_quadratic(&g, &m, &mech, &off).unwrap();
    assert_eq!(r.omega_sq, mech.omega_m.powi(2));
    assert_eq!(r.damping, mech.damping);
    let on = DriveField::new(1e-3, 0.0, Branch::Odd).unwrap();
    let r = effective_params_quadratic(&g, &m, &mech, &on).unwrap();
    assert_eq!(r.damping, mech.damping);
    assert_eq!(r.regime(), ResponseRegime::QuadraticConstant);
    // independent oracle: 2 xi_Q gamma P / (m omega_n (gamma^2/4))
    let xi = quadratic_coupling(&g, &m).unwrap();
    let spring = 8.0 * xi * on.power / (mech.mass * m.omega() * g.gamma());
    assert!(((r.omega_sq - mech.omega_m.powi(2)) / spring - 1.0).abs() < 1e-12);
}

#[test]
fn matrix_spring_equals_effective_frequency() {
    let (g, m, mech) = table_one();
    let drive = DriveField::new(2e-3, -0.7 * g.gamma(), Branch::Odd).unwrap();
    let sys = quadratic_system(&g, &m, &mech, &drive).unwrap();
    let k = -sys.drift[(3, 2)];
    let r = effective_params_quadratic(&g, &m, &mech, &drive).unwrap();
    assert!((k / mech.mass / r.omega_sq - 1.0).abs() < 1e-12);
}

#[test]
fn resonant_trap_spring_ratio_is_two() {
    let (g, m, mech) = table_one();
    let drive = DriveField::new(8e-3, 0.0, Branch::Odd).unwrap();
    let t = max_trap_frequency(&g, &m, &mech, &drive).unwrap();
    assert!((t.spring_ratio - 2.0).abs() < 1e-12);
    assert!(t.resonant_limit > t.quoted);
}

#[test]
fn even_branch_is_refused_in_quadratic_regime() {
    let (g, m, mech) = table_one();
    let drive = DriveField::new(1e-3, 0.0, Branch::Even).unwrap();
    assert_eq!(
        quadratic_system(&g, &m, &mech, &drive).unwrap_err(),
        trimirror::Error::AntitrappingConfiguration
    );
}

#[test]
fn static_force_restoring_with_single_zero() {
    let (g, m, mech) = table_one();
    let drive = DriveField::new(1e-3, 0.0, Branch::Odd).unwrap();
    let w = default_window(&m);
    let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * w / 50.0).collect();
    let scan = static_force_scan(&g, &m, &mech, &drive, &grid).unwrap();
    assert_eq!(force_zeros(&scan), vec![0.0]);
    for p in &scan {
        assert!(p.force * p.q <= 0.0);
    }
    // factor 2 of the radiation-pressure force at the centre
    let xi = quadratic_coupling(&g, &m).unwrap();
    let b2 = g.gamma() * drive.input_amplitude(&m).powi(2) / (0.25 * g.gamma().powi(2));
    let centre = scan[50];
    assert!((centre.stiffness - mech.mass * mech.omega_m.powi(2) - 2.0 * HBAR * xi * b2).abs() < 1e-9 * centre.stiffness);
}

#[test]
fn linear_beam_damping_sign_follows_detuning() {
    let (g, _, mech) = table_one();
    let beam = |d: f64| LinearBeam { coupling: 1e15, power: 1e-5, detuning: d };
    let w = mech.omega_m;
    let red = linear_response(&g, &mech, vec![beam(0.5 * g.gamma())]);
    let blue = linear_response(&g, &mech, vec![beam(-0.5 * g.gamma())]);
    assert!(red.damping_at(w) > mech.damping);
    assert!(blue.damping_at(w) < mech.damping);
    let added = red.damping_at(w) - mech.damping;
    assert!((blue.damping_at(w) - mech.damping + added).abs() < 1e-12 * added);
    assert_eq!(linear_response(&g, &mech, vec![beam(0.0)]).damping_at(w), mech.damping);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn resonant_quadratic_drive_is_stable(
        power in 1e-9f64..1.0,
        t in 1e-6f64..0.9,
        length in 1e-4f64..1e-1,
        omega in 1e1f64..1e7,
        q_factor in 1e1f64..1e9,
    ) {
        let g = CavityGeometry::new(length, t, 1e-5).unwrap();
        let m = CavityMode::from_wavelength(1.064e-6).unwrap();
        let mech = MechanicalOscillator::with_quality_factor(1e-9, omega, q_factor, 300.0, 0.0).unwrap();
        let drive = DriveField::new(power, 0.0, Branch::Odd).unwrap();
        let r = stability(&quadratic_system(&g, &m, &mech, &drive).unwrap().drift);
        prop_assert!(r.stable);
        prop_assert!(r.max_real < 0.0);
    }

    #[test]
    fn quadratic_trap_stiffens_monotonically(p1 in 1e-9f64..1e-2, factor in 1.01f64..100.0, det in -3.0f64..3.0) {
        let (g, m, mech) = table_one();
        let d = det * g.gamma();
        let a = effective_params_quadratic(&g, &m, &mech, &DriveField::new(p1, d, Branch::Odd).unwrap()).unwrap();
        let b = effective_params_quadratic(&g, &m, &mech, &DriveField::new(p1 * factor, d, Branch::Odd).unwrap()).unwrap();
        prop_assert!(b.omega_sq > a.omega_sq);
        prop_assert!(a.omega_sq > mech.omega_m.powi(2));
    }

    #[test]
    fn linear_response_even_in_probe_frequency(w in 1e2f64..1e8, det in -5.0f64..5.0) {
        let (g, _, mech) = table_one();
        let r = linear_response(&g, &mech, vec![LinearBeam { coupling: 1e15, power: 1e-3, detuning: det * g.gamma() }]);
        prop_assert!((r.omega_eff_sq(w) - r.omega_eff_sq(-w)).abs() <= 1e-12 * r.omega_eff_sq(w).abs());
        prop_assert!((r.damping_at(w) - r.damping_at(-w)).abs() <= 1e-12 * r.damping_at(w).abs());
    }
}
