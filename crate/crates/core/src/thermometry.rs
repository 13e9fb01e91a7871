//! Mechanical susceptibility, displacement variance, effective temperature
//! and phonon occupation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{BOLTZMANN, HBAR};
use crate::dynamics::{EffectiveResponse, MechanicalOscillator};
use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with_breakpoints, QuadOptions};
use crate::numerics::roots::bracketed_newton;

/// `chi(omega) = 1 / (m (omega_eff^2(omega) - omega^2) - i D_eff(omega) omega)`.
pub fn susceptibility_at(resp: &EffectiveResponse, omega: f64) -> Complex64 {
    let re = resp.mass * (resp.omega_eff_sq(omega) - omega * omega);
    let im = -resp.damping_at(omega) * omega;
    Complex64::new(re, im).inv()
}

/// `|chi(omega)|^2`, evaluated without forming the complex inverse.
pub fn susceptibility_sq(resp: &EffectiveResponse, omega: f64) -> f64 {
    let re = resp.mass * (resp.omega_eff_sq(omega) - omega * omega);
    let im = resp.damping_at(omega) * omega;
    1.0 / (re * re + im * im)
}

/// `∫|chi|^2 d omega = pi / (m omega_eff^2 D_eff)` over the real line, for
/// constant parameters (residues of the two upper-half-plane poles).
pub fn variance_integral_analytic(mass: f64, omega_eff: f64, damping: f64) -> Result<f64> {
    if !(damping > 0.0) {
        return Err(Error::DivergentIntegral(damping));
    }
    if !(mass > 0.0 && omega_eff > 0.0) {
        return Err(Error::param("omega_eff", "mass and effective frequency must be positive"));
    }
    Ok(PI / (mass * omega_eff * omega_eff * damping))
}

/// Absolute error floor of the numeric integral, relative to the summed
/// Lorentzian weight of its resonances.
pub const ROUNDOFF_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    /// Initial half-window, in units of the highest resonance frequency.
    pub initial_window: f64,
    /// Stop expanding once the last doubling added less than this fraction.
    pub tail_tol: f64,
    pub max_doublings: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            initial_window: 20.0,
            tail_tol: 1e-9,
            max_doublings: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericIntegral {
    pub value: f64,
    pub error: f64,
    /// Half-width `W` of the final window `[-W, W]`.
    pub window: f64,
    /// Positive resonance frequencies found, `omega^2 = omega_eff^2(omega)`.
    pub resonances: Vec<f64>,
}

fn resonance_residual(resp: &EffectiveResponse, w: f64) -> f64 {
    resp.omega_eff_sq(w) - w * w
}

/// Positive roots of `omega_eff^2(omega) = omega^2`, located on a log grid
/// and polished by bisection.
pub fn resonances(resp: &EffectiveResponse) -> Vec<f64> {
    if resp.beams.is_empty() {
        return if resp.omega_sq > 0.0 { vec![resp.omega_sq.sqrt()] } else { Vec::new() };
    }
    let mut scale = resp.omega_sq.abs().sqrt().max(resp.gamma);
    for b in &resp.beams {
        scale = scale.max(b.detuning.abs());
    }
    let hi = 1e3 * scale.max(resp.omega_eff_sq(0.0).abs().sqrt());
    let lo = hi * 1e-12;
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect();
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (fa, fb) = (resonance_residual(resp, w[0]), resonance_residual(resp, w[1]));
        if fa.signum() != fb.signum() {
            let f = |x: f64| {
                let h = 1e-7 * x;
                let d = (resonance_residual(resp, x + h) - resonance_residual(resp, x - h)) / (2.0 * h);
                (resonance_residual(resp, x), d)
            };
            if let Ok(r) = bracketed_newton(f, w[0], w[1], 1e-14) {
                out.push(r);
            }
        }
    }
    out
}

/// Adaptive quadrature of `∫|chi|^2 d omega` over `[-W, W]`, doubling `W`
/// until the last doubling contributes less than `tail_tol` of the total.
/// The integrand is even, so the half line is integrated and doubled.
pub fn variance_integral_numeric(resp: &EffectiveResponse, cfg: &QuadConfig) -> Result<NumericIntegral> {
    let peaks = resonances(resp);
    if peaks.is_empty() {
        return Err(Error::IntegrationFailure("no mechanical resonance: net spring is not restoring".into()));
    }
    let mut points = vec![0.0];
    for &p in &peaks {
        let width = resp.damping_at(p) / resp.mass;
        if !(width > 0.0) {
            return Err(Error::DivergentIntegral(resp.damping_at(p)));
        }
        // resonance and its decades of linewidths
        for k in [1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4] {
            for s in [-1.0, 1.0] {
                let x = p + s * k * width;
                if x > 0.0 {
                    points.push(x);
                }
            }
        }
        points.push(p);
    }
    for b in &resp.beams {
        // optical features of the retarded response
        for k in [-3.0, -1.0, 0.0, 1.0, 3.0] {
            let x = b.detuning.abs() + k * 0.5 * resp.gamma;
            if x > 0.0 {
                points.push(x);
            }
        }
    }
    let top = peaks.iter().copied().fold(0.0, f64::max);
    let mut w = cfg.initial_window * top;
    points.retain(|x| *x < w);
    points.push(w);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));

    // Near a resonance of quality Q the integrand is only known to ~Q eps
    // relative accuracy, so very sharp peaks get an absolute floor tied to
    // their Lorentzian weight.
    let scale: f64 = peaks
        .iter()
        .map(|&p| PI / (2.0 * resp.mass * p * p * resp.damping_at(p)))
        .sum();
    let opts = QuadOptions {
        rel_tol: cfg.rel_tol,
        abs_tol: ROUNDOFF_FLOOR * scale,
        max_intervals: 50_000,
    };
    let f = |x: f64| susceptibility_sq(resp, x);
    let first = integrate_with_breakpoints(f, &points, opts)?;
    let (mut total, mut err) = (first.value, first.error);
    for _ in 0..cfg.max_doublings {
        let tail = integrate_with_breakpoints(f, &[w, 2.0 * w], opts)?;
        total += tail.value;
        err += tail.error;
        w *= 2.0;
        if tail.value.abs() < cfg.tail_tol * total.abs() {
            return Ok(NumericIntegral {
                value: 2.0 * total,
                error: 2.0 * err,
                window: w,
                resonances: peaks,
            });
        }
    }
    Err(Error::IntegrationFailure(format!(
        "tail still above {:e} of the total at window {w:e}",
        cfg.tail_tol
    )))
}

/// `<δq^2> = (N / 2 pi) ∫|chi|^2 d omega`.
pub fn displacement_variance(noise_strength: f64, integral: f64) -> f64 {
    noise_strength / (2.0 * PI) * integral
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegralMethod {
    /// Parameters frozen at `omega_M`, closed-form integral.
    Analytic,
    /// Full frequency dependence, adaptive quadrature.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureEstimate {
    pub t_eff: f64,
    /// Frequency used in the equipartition relation.
    pub omega_eff: f64,
    pub variance: f64,
    pub integral: f64,
}

/// Equipartition temperature `k_B T_eff = m omega_eff^2 <δq^2>` for thermal
/// force noise of intensity `noise_strength` (`2 D_M k_B T_e` at high temperature).
///
/// The analytic path freezes a frequency-dependent response at `omega_M`
/// (zeroth-order Taylor); the numeric path integrates the full response and
/// uses the resonance it finds as `omega_eff`.
pub fn effective_temperature(
    mech: &MechanicalOscillator,
    resp: &EffectiveResponse,
    noise_strength: f64,
    method: IntegralMethod,
) -> Result<TemperatureEstimate> {
    let (omega_eff, integral) = match method {
        IntegralMethod::Analytic => {
            let frozen = resp.frozen_at(mech.omega_m);
            if !(frozen.omega_sq > 0.0) {
                return Err(Error::DegenerateParameters("net spring constant is not restoring".into()));
            }
            let w = frozen.omega_sq.sqrt();
            (w, variance_integral_analytic(resp.mass, w, frozen.damping)?)
        }
        IntegralMethod::Numeric => {
            let num = variance_integral_numeric(resp, &QuadConfig::default())?;
            if num.resonances.len() != 1 {
                log::warn!("{} resonances found; using the highest", num.resonances.len());
            }
            let w = num.resonances.iter().copied().fold(0.0, f64::max);
            (w, num.value)
        }
    };
    let variance = displacement_variance(noise_strength, integral);
    Ok(TemperatureEstimate {
        t_eff: resp.mass * omega_eff * omega_eff * variance / BOLTZMANN,
        omega_eff,
        variance,
        integral,
    })
}

/// `n_M = k_B T_eff / (hbar omega_eff)`.
pub fn occupation(t_eff: f64, omega_eff: f64) -> Result<f64> {
    if !(omega_eff > 0.0) {
        return Err(Error::param("omega_eff", "must be positive"));
    }
    Ok(BOLTZMANN * t_eff / (HBAR * omega_eff))
}

/// Parameters of a single linearly coupled beam for the Taylor analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorParams {
    pub omega_m: f64,
    pub gamma: f64,
    pub detuning: f64,
    /// `V = 4 xi gamma P_in / (m L)` [s^-5]
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorCoefficients {
    pub v: f64,
    /// `omega_eff^2(omega_M)` including the bare `omega_M^2`.
    pub omega_eff_sq: f64,
    /// Optical part alone (the `omega_M^2`-neglected form).
    pub omega_eff_sq_optical: f64,
    /// Slope `d omega_eff^2 / d omega` at `omega_M`.
    pub slope: f64,
}

fn taylor_pieces(p: &TaylorParams) -> Result<(f64, f64, f64, f64)> {
    let (w, g, d) = (p.omega_m, p.gamma, p.detuning);
    let (w2, g2, d2) = (w * w, g * g, d * d);
    let a = g2 + 4.0 * d2;
    let bracket = 16.0 * w2 * w2 + 8.0 * w2 * (g2 - 4.0 * d2) + a * a;
    let inner = 16.0 * w2 * w2 - 3.0 * g2 * g2 - 8.0 * g2 * d2 + 16.0 * d2 * d2 - 8.0 * w2 * a;
    if a == 0.0 || bracket == 0.0 || w == 0.0 {
        return Err(Error::DegenerateParameters("gamma, delta and omega_M must not all vanish".into()));
    }
    Ok((a, bracket, inner, w2))
}

pub fn taylor_coefficients(p: &TaylorParams) -> Result<TaylorCoefficients> {
    let (a, bracket, inner, w2) = taylor_pieces(p)?;
    let (v, d) = (p.v, p.detuning);
    let optical = -16.0 * v * d * (-4.0 * w2 + a) / (a * bracket);
    let slope = -128.0 * v * p.omega_m * d * inner / (a * bracket * bracket);
    Ok(TaylorCoefficients {
        v,
        omega_eff_sq: w2 + optical,
        omega_eff_sq_optical: optical,
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalFrequency {
    /// Where the linear Taylor term matches the constant one.
    pub full: f64,
    /// `omega_M (1 + (delta/omega_M)^2 / 2)`.
    pub approx: f64,
    /// `|delta| >= gamma/2` and `gamma/2 >= 10 omega_M`.
    pub hierarchy_ok: bool,
}

pub fn critical_frequency(p: &TaylorParams) -> Result<CriticalFrequency> {
    let (a, bracket, inner, w2) = taylor_pieces(p)?;
    let w = p.omega_m;
    if inner == 0.0 {
        return Err(Error::DegenerateParameters("slope coefficient vanishes".into()));
    }
    let full = w - (4.0 * w2 - a) * bracket / (8.0 * w * inner);
    let approx = w * (1.0 + 0.5 * (p.detuning / w).powi(2));
    Ok(CriticalFrequency {
        full,
        approx,
        hierarchy_ok: p.detuning.abs() >= 0.5 * p.gamma && 0.5 * p.gamma >= 10.0 * w,
    })
}

/// Validity threshold on `omega_eff(omega_M) / omega_c`.
pub const VALIDITY_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalSummary {
    pub t_eff: f64,
    pub n_m: f64,
    pub omega_eff: f64,
    pub damping: f64,
    pub omega_c: Option<f64>,
    pub validity_ok: bool,
}

/// Effective temperature and occupation with the constant-parameter
/// (frozen at `omega_M`) integral, plus the Taylor validity check against the
/// smallest critical frequency over the beams.
pub fn thermal_summary(mech: &MechanicalOscillator, resp: &EffectiveResponse) -> Result<ThermalSummary> {
    let est = effective_temperature(mech, resp, mech.thermal_noise_strength(), IntegralMethod::Analytic)?;
    let mut omega_c: Option<f64> = None;
    for b in &resp.beams {
        let p = TaylorParams {
            omega_m: mech.omega_m,
            gamma: resp.gamma,
            detuning: b.detuning,
            v: 4.0 * b.coupling * resp.gamma * b.power / (resp.mass * resp.length),
        };
        let c = critical_frequency(&p)?.full.abs();
        omega_c = Some(omega_c.map_or(c, |o| o.min(c)));
    }
    let validity_ok = omega_c.is_none_or(|c| est.omega_eff / c < VALIDITY_RATIO);
    Ok(ThermalSummary {
        t_eff: est.t_eff,
        n_m: occupation(est.t_eff, est.omega_eff)?,
        omega_eff: est.omega_eff,
        damping: resp.frozen_at(mech.omega_m).damping,
        omega_c,
        validity_ok,
    })
}

/// Thermal force-noise spectral density
/// `D_M hbar omega [1 + coth(hbar omega / 2 k_B T)]`, per `d omega / 2 pi`.
/// Its high-temperature limit is the white level `2 D_M k_B T`.
pub fn thermal_force_spectrum(damping: f64, temperature: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        return 2.0 * damping * BOLTZMANN * temperature;
    }
    let e = HBAR * omega;
    if temperature == 0.0 {
        return damping * e * (1.0 + omega.signum());
    }
    let x = e / (2.0 * BOLTZMANN * temperature);
    damping * e * (1.0 + 1.0 / x.tanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_scalings() {
        let a = variance_integral_analytic(1e-9, 1e4, 1e-11).unwrap();
        let b = variance_integral_analytic(1e-9, 1e4, 2e-11).unwrap();
        let c = variance_integral_analytic(1e-9, 1e5, 1e-11).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
        assert!((a / c - 100.0).abs() < 1e-11);
        assert_eq!(variance_integral_analytic(1.0, 1.0, 0.0), Err(Error::DivergentIntegral(0.0)));
    }

    #[test]
    fn susceptibility_symmetry() {
        let r = EffectiveResponse::constant(2.0, 3.0, 0.5);
        let z = susceptibility_at(&r, 1.7);
        assert_eq!(susceptibility_at(&r, -1.7), z.conj());
        assert_eq!(susceptibility_at(&r, 0.0), Complex64::new(1.0 / 18.0, 0.0));
        assert!((susceptibility_sq(&r, 1.7) - z.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn numeric_matches_analytic_constant() {
        for (m, w, d) in [(1e-9, 1.57e4, 1.57e-11), (1.0, 3.0, 0.5), (1e-12, 1e6, 1e-10)] {
            let r = EffectiveResponse::constant(m, w, d);
            let num = variance_integral_numeric(&r, &QuadConfig::default()).unwrap();
            let an = variance_integral_analytic(m, w, d).unwrap();
            assert!((num.value / an - 1.0).abs() < 1e-8, "{} vs {}", num.value, an);
        }
    }

    #[test]
    fn no_cooling_keeps_bath_temperature() {
        let mech = MechanicalOscillator::with_quality_factor(1e-9, 1e4, 1e3, 300.0, 0.0).unwrap();
        let r = EffectiveResponse::constant(mech.mass, mech.omega_m, mech.damping);
        let t = effective_temperature(&mech, &r, mech.thermal_noise_strength(), IntegralMethod::Analytic).unwrap();
        assert!((t.t_eff / 300.0 - 1.0).abs() < 1e-14);
        let cooled = EffectiveResponse::constant(mech.mass, mech.omega_m, 1e6 * mech.damping);
        let t = effective_temperature(&mech, &cooled, mech.thermal_noise_strength(), IntegralMethod::Analytic).unwrap();
        assert!((t.t_eff / 300e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupation_unit() {
        let w = 2.0 * PI * 1e5;
        assert!((occupation(HBAR * w / BOLTZMANN, w).unwrap() - 1.0).abs() < 1e-15);
        assert!(occupation(1.0, 0.0).is_err());
    }

    #[test]
    fn taylor_limits() {
        let p = TaylorParams { omega_m: 1e4, gamma: 1e6, detuning: 5e5, v: 0.0 };
        let t = taylor_coefficients(&p).unwrap();
        assert_eq!(t.omega_eff_sq, 1e8);
        assert_eq!(t.slope, 0.0);
        let neg = TaylorParams { detuning: -5e5, v: 1e20, ..p };
        let pos = TaylorParams { v: 1e20, ..p };
        assert_eq!(
            taylor_coefficients(&neg).unwrap().slope,
            -taylor_coefficients(&pos).unwrap().slope
        );
        assert!(taylor_coefficients(&TaylorParams { omega_m: 0.0, gamma: 0.0, detuning: 0.0, v: 1.0 }).is_err());
    }

    #[test]
    fn critical_frequency_resonant_drive() {
        let p = TaylorParams { omega_m: 1e4, gamma: 1e6, detuning: 0.0, v: 1.0 };
        assert_eq!(critical_frequency(&p).unwrap().approx, 1e4);
    }

    #[test]
    fn coth_high_temperature_limit() {
        let s = thermal_force_spectrum(1e-11, 300.0, 1e5);
        let white = 2.0 * 1e-11 * BOLTZMANN * 300.0;
        assert!((s / white - 1.0).abs() < 1e-5);
        assert_eq!(thermal_force_spectrum(1e-11, 300.0, 0.0), white);
        assert_eq!(thermal_force_spectrum(1.0, 0.0, -1.0), 0.0);
    }
}
