use std::f64::consts::PI;

use nalgebra::DMatrix;
use trimirror::constants::BOLTZMANN;
use trimirror::coupling::{bare_coupling, linear_coupling_at};
use trimirror::dynamics::*;
use trimirror::langevin::*;
use trimirror::modespectrum::{CavityGeometry, CavityMode};
use trimirror::thermometry::variance_integral_analytic;

const M: f64 = 1e-9;
const T_E: f64 = 300.0;

fn omega_m() -> f64 {
    2.0 * PI * 2500.0
}

/// Bare mechanical oscillator with `Q = 20`.
fn bare_oscillator(temperature: f64) -> (LinearizedSystem, MechanicalOscillator) {
    let mech = MechanicalOscillator::with_quality_factor(M, omega_m(), 20.0, temperature, 0.0).unwrap();
    let mut a = DMatrix::zeros(2, 2);
    a[(0, 1)] = 1.0 / M;
    a[(1, 0)] = -M * omega_m().powi(2);
    a[(1, 1)] = -mech.damping / M;
    (LinearizedSystem { drift: a, optical_modes: 0 }, mech)
}

fn thermal_run(temperature: f64, seed: u64, dt: f64, integrator: Integrator) -> VarianceEstimate {
    thermal_run_n(temperature, seed, dt, integrator, 200)
}

fn thermal_run_n(temperature: f64, seed: u64, dt: f64, integrator: Integrator, n_traj: usize) -> VarianceEstimate {
    let (sys, mech) = bare_oscillator(temperature);
    let noise = NoiseSpec::new(0.0, &mech, seed);
    let steps = (0.2 / dt).round() as usize;
    let cfg = SimulationConfig {
        dt,
        duration: 0.2,
        n_traj,
        integrator,
        decimation: (steps / 10_000).max(1),
        record: Record::Position,
        initial: InitialState::Stationary,
        ..Default::default()
    };
    let ens = simulate(&sys, &noise, &cfg).unwrap();
    estimate_variance(&ens, 0.0).unwrap()
}

#[test]
fn noiseless_optical_block_rotates_and_decays() {
    let (g, d) = (2.0e5, 7.0e5);
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 0)] = -0.5 * g;
    a[(1, 1)] = -0.5 * g;
    a[(0, 1)] = d;
    a[(1, 0)] = -d;
    a[(2, 3)] = 1.0 / M;
    a[(3, 2)] = -M * omega_m().powi(2);
    a[(3, 3)] = -1e-12;
    let sys = LinearizedSystem { drift: a, optical_modes: 1 };
    let noise = NoiseSpec { vacuum_rate: 0.0, thermal_strength: 0.0, seed: 1 };
    let cfg = SimulationConfig {
        dt: 1e-7,
        duration: 2e-5,
        n_traj: 1,
        initial: InitialState::Fixed(vec![1.0, 0.0, 0.0, 0.0]),
        ..Default::default()
    };
    let ens = simulate(&sys, &noise, &cfg).unwrap();
    let (x, y) = (ens.series(0, 0).unwrap(), ens.series(0, 1).unwrap());
    for (i, (xi, yi)) in x.iter().zip(&y).enumerate() {
        let t = i as f64 * 1e-7;
        let e = (-0.5 * g * t).exp();
        assert!((xi - e * (d * t).cos()).abs() < 1e-12, "t={t}");
        assert!((yi + e * (d * t).sin()).abs() < 1e-12);
    }
}

#[test]
fn thermal_variance_is_equipartition() {
    let v = thermal_run(T_E, 11, 2e-5, Integrator::ExactOu);
    let expected = BOLTZMANN * T_E / (M * omega_m().powi(2));
    assert!((v.mean - expected).abs() < 3.0 * v.std_error, "{} ± {} vs {expected}", v.mean, v.std_error);
    // the same number through the susceptibility integral
    let (_, mech) = bare_oscillator(T_E);
    let quad = mech.thermal_noise_strength() / (2.0 * PI) * variance_integral_analytic(M, omega_m(), mech.damping).unwrap();
    assert!((quad / expected - 1.0).abs() < 1e-12);
}

#[test]
fn variance_linear_in_bath_temperature() {
    let a = thermal_run(T_E, 5, 2e-5, Integrator::ExactOu);
    let b = thermal_run(2.0 * T_E, 5, 2e-5, Integrator::ExactOu);
    assert!((b.mean / a.mean - 2.0).abs() < 1e-10);
    let z = thermal_run(0.0, 5, 2e-5, Integrator::ExactOu);
    assert_eq!(z.mean, 0.0);
}

#[test]
fn halving_step_within_statistical_error() {
    let a = thermal_run(T_E, 21, 2e-5, Integrator::ExactOu);
    let b = thermal_run(T_E, 22, 1e-5, Integrator::ExactOu);
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 3.0 * se);
}

/// Stationary covariance of the Euler-Maruyama recursion
/// `u' = (1 + A dt) u + sqrt(Q dt) z`, by doubling.
fn em_stationary_position_variance(a: &DMatrix<f64>, q: &DMatrix<f64>, dt: f64) -> f64 {
    let n = a.nrows();
    let mut phi = DMatrix::identity(n, n) + a * dt;
    let mut s = q * dt;
    for _ in 0..64 {
        s = &s + &phi * &s * phi.transpose();
        phi = &phi * &phi;
    }
    s[(0, 0)]
}

#[test]
fn euler_maruyama_bias_matches_discrete_recursion() {
    // relative bias of the explicit scheme ~ omega^2 dt / Gamma = omega dt Q = 0.05
    let dt = 0.05 / (omega_m() * 20.0);
    let dt = 0.2 / (0.2 / dt).ceil();
    let em = thermal_run_n(T_E, 3, dt, Integrator::EulerMaruyama, 60);
    let (sys, mech) = bare_oscillator(T_E);
    let q = NoiseSpec::new(0.0, &mech, 0).diffusion(&sys);
    let predicted = em_stationary_position_variance(&sys.drift, &q, dt);
    let exact = BOLTZMANN * T_E / (M * omega_m().powi(2));
    assert!((predicted / exact - 1.05).abs() < 0.01, "{}", predicted / exact);
    assert!((em.mean - predicted).abs() < 3.0 * em.std_error, "{} ± {} vs {predicted}", em.mean, em.std_error);
}

#[test]
fn fluctuation_dissipation_without_drive() {
    let (sys, mech) = bare_oscillator(T_E);
    let noise = NoiseSpec::new(0.0, &mech, 99);
    let cfg = SimulationConfig {
        dt: 2e-5,
        duration: 0.2,
        n_traj: 300,
        record: Record::Position,
        initial: InitialState::Stationary,
        ..Default::default()
    };
    let ens = simulate(&sys, &noise, &cfg).unwrap();
    let v = estimate_variance(&ens, 0.0).unwrap();
    let (t, se) = equipartition_temperature(M, omega_m(), &v);
    assert!((t - T_E).abs() < 3.0 * se, "{t} ± {se}");
    let s = estimate_spectrum(&ens, M, &SpectrumConfig::default()).unwrap();
    assert!((s.damping - mech.damping).abs() < 3.0 * s.damping_se, "{} ± {}", s.damping, s.damping_se);
    assert!((s.omega_eff / omega_m() - 1.0).abs() < 0.02);
}

#[test]
fn spectrum_refuses_unresolved_peak() {
    let (sys, mech) = bare_oscillator(T_E);
    let noise = NoiseSpec::new(0.0, &mech, 1);
    let cfg = SimulationConfig {
        dt: 2e-5,
        duration: 0.2,
        n_traj: 20,
        record: Record::Position,
        initial: InitialState::Stationary,
        ..Default::default()
    };
    let ens = simulate(&sys, &noise, &cfg).unwrap();
    let coarse = SpectrumConfig { segment_len: Some(64), ..Default::default() };
    assert!(matches!(estimate_spectrum(&ens, M, &coarse), Err(trimirror::Error::Fit(_))));
}

/// Both branches pumped at `q0 = lambda/8`; the optical damping is set to
/// half the intrinsic one at `+gamma/2`.
fn linear_setup(sign: f64) -> (LinearizedSystem, MechanicalOscillator, EffectiveResponse, CavityGeometry) {
    let g = CavityGeometry::new(5e-3, 1e-4, 1e-5).unwrap();
    let mode = CavityMode::number(&g, 10_000).unwrap();
    let mech = MechanicalOscillator::with_quality_factor(M, omega_m(), 20.0, T_E, 0.0).unwrap();
    let xi_l = linear_coupling_at(&g, &mode, mode.wavelength() / 8.0).unwrap();
    let gamma = g.gamma();
    let detuning = sign * 0.5 * gamma;
    let probe = LinearBeam { coupling: xi_l * xi_l / bare_coupling(&g, &mode), power: 1.0, detuning };
    let unit = linear_response(&g, &mech, vec![probe]);
    let power = 0.5 * mech.damping / unit.beam_damping(&probe, omega_m()).abs();
    let beam = LinearBeam { power, ..probe };
    let resp = linear_response(&g, &mech, vec![beam]);
    let sys = symmetric_linear_system(&g, &mode, &mech, xi_l, power, detuning).unwrap();
    (sys, mech, resp, g)
}

fn linear_fit(sign: f64) -> (SpectrumEstimate, EffectiveResponse, MechanicalOscillator) {
    let (sys, mech, resp, g) = linear_setup(sign);
    let noise = NoiseSpec::new(g.gamma(), &mech, 7);
    let cfg = SimulationConfig {
        dt: 2e-5,
        duration: 0.5,
        n_traj: 200,
        record: Record::Position,
        initial: InitialState::Stationary,
        ..Default::default()
    };
    let ens = simulate(&sys, &noise, &cfg).unwrap();
    (estimate_spectrum(&ens, M, &SpectrumConfig::default()).unwrap(), resp, mech)
}

#[test]
fn red_detuning_adds_damping_as_predicted() {
    let (s, resp, mech) = linear_fit(1.0);
    let predicted = resp.damping_at(s.omega_eff);
    assert!(s.damping > mech.damping);
    assert!((s.damping / predicted - 1.0).abs() < 0.1, "{} vs {predicted}", s.damping);
}

#[test]
fn detuning_sign_flips_added_damping() {
    let (red, _, mech) = linear_fit(1.0);
    let (blue, resp, _) = linear_fit(-1.0);
    assert!(red.damping - mech.damping > 0.0);
    assert!(blue.damping - mech.damping < 0.0);
    let predicted = resp.damping_at(blue.omega_eff);
    assert!((blue.damping / predicted - 1.0).abs() < 0.1);
}
