//! Optomechanical coupling constants in the linear and quadratic regimes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modespectrum::{quarter_waves, BranchAngles, CavityGeometry, CavityMode};

/// Default half-width of the quadratic window around each quarter-wave point,
/// as a fraction of the mode wavelength.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Linear,
    Quadratic,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Linear => "linear",
            Regime::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingConstants {
    pub xi: f64,
    pub xi_l: f64,
    /// `None` for a perfectly reflecting middle mirror, where the quadratic
    /// expansion does not exist.
    pub xi_q: Option<f64>,
    pub delta_e: f64,
    pub delta_o: f64,
    pub detuning_quadratic: f64,
    pub regime: Regime,
}

impl CouplingConstants {
    pub fn evaluate(geom: &CavityGeometry, mode: &CavityMode, q0: f64, window: f64) -> Result<Self> {
        let (delta_e, delta_o) = shifts_at(geom, mode, q0);
        let xi_q = match quadratic_coupling(geom, mode) {
            Ok(v) => Some(v),
            Err(Error::DivergentCoupling) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            xi: bare_coupling(geom, mode),
            xi_l: linear_coupling_at(geom, mode, q0)?,
            xi_q,
            delta_e,
            delta_o,
            detuning_quadratic: quadratic_detuning(geom),
            regime: coupling_regime(mode, q0, window)?,
        })
    }
}

/// `xi = omega_n / L`.
pub fn bare_coupling(geom: &CavityGeometry, mode: &CavityMode) -> f64 {
    mode.omega() / geom.length()
}

/// Even- and odd-mode shifts `(delta_e, delta_o)` at rest position `q0`,
/// with `omega_e = omega_n - delta_e` and `omega_o = omega_n + delta_o`.
/// No regime check.
pub fn shifts_at(geom: &CavityGeometry, mode: &CavityMode, q0: f64) -> (f64, f64) {
    let a = BranchAngles::new(geom.transmissivity(), quarter_waves(mode, q0));
    let tau = geom.tau();
    (a.even_shift / tau, a.odd_shift / tau)
}

/// [`shifts_at`], refusing rest positions inside the quadratic window.
pub fn linear_shifts(geom: &CavityGeometry, mode: &CavityMode, q0: f64, window: f64) -> Result<(f64, f64)> {
    require_linear(mode, q0, window)?;
    Ok(shifts_at(geom, mode, q0))
}

/// Signed linear coupling `xi_L = xi sin(2 k q0) / sqrt(1/(1-T) - cos^2(2 k q0))`.
/// Even branch slope is `-xi_L`, odd branch `+xi_L`. No regime check.
pub fn linear_coupling_at(geom: &CavityGeometry, mode: &CavityMode, q0: f64) -> Result<f64> {
    let a = BranchAngles::new(geom.transmissivity(), quarter_waves(mode, q0));
    let xi = bare_coupling(geom, mode);
    if a.sin_beta == 0.0 {
        // T = 0 exactly at a branch crossing: the see-saw has a kink
        return Err(Error::DegenerateParameters(
            "linear coupling undefined at a crossing of a perfectly reflecting mirror".into(),
        ));
    }
    if a.sin_phi == 0.0 {
        return Ok(0.0);
    }
    Ok(xi * a.s * a.sin_phi / a.sin_beta)
}

pub fn linear_coupling(geom: &CavityGeometry, mode: &CavityMode, q0: f64, window: f64) -> Result<f64> {
    require_linear(mode, q0, window)?;
    linear_coupling_at(geom, mode, q0)
}

/// Largest `|xi_L|` over rest positions, `xi sqrt(1-T)`, reached at `q0 = lambda/8`.
pub fn peak_linear_coupling(geom: &CavityGeometry, mode: &CavityMode) -> (f64, f64) {
    (
        mode.wavelength() / 8.0,
        bare_coupling(geom, mode) * (1.0 - geom.transmissivity()).sqrt(),
    )
}

/// Splitting of the doublet at a quarter-wave point, `(2/tau) acos sqrt(1-T)`.
pub fn quadratic_detuning(geom: &CavityGeometry) -> f64 {
    let t = geom.transmissivity();
    2.0 * t.sqrt().atan2((1.0 - t).sqrt()) / geom.tau()
}

/// `xi_Q = (tau xi^2 / 2) sqrt((1-T)/T)`; the branches curve as `-/+ xi_Q (q - q0)^2`.
pub fn quadratic_coupling(geom: &CavityGeometry, mode: &CavityMode) -> Result<f64> {
    let t = geom.transmissivity();
    if t == 0.0 {
        return Err(Error::DivergentCoupling);
    }
    let xi = bare_coupling(geom, mode);
    Ok(0.5 * geom.tau() * xi * xi * ((1.0 - t) / t).sqrt())
}

/// Distance from `q0` to the nearest quarter-wave point `j lambda / 4`.
pub fn quarter_wave_distance(mode: &CavityMode, q0: f64) -> f64 {
    let x = quarter_waves(mode, q0);
    (x - x.round()).abs() * mode.wavelength() / 4.0
}

/// Quadratic iff `q0` lies strictly within `window` of a quarter-wave point.
pub fn coupling_regime(mode: &CavityMode, q0: f64, window: f64) -> Result<Regime> {
    if !(window > 0.0) {
        return Err(Error::param("window", "must be positive"));
    }
    Ok(if quarter_wave_distance(mode, q0) < window {
        Regime::Quadratic
    } else {
        Regime::Linear
    })
}

pub fn default_window(mode: &CavityMode) -> f64 {
    DEFAULT_WINDOW_FRACTION * mode.wavelength()
}

fn require_linear(mode: &CavityMode, q0: f64, window: f64) -> Result<()> {
    match coupling_regime(mode, q0, window)? {
        Regime::Linear => Ok(()),
        Regime::Quadratic => Err(Error::WrongRegime {
            q0,
            expected: "linear",
            found: "quadratic",
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCouplingRow {
    pub t: f64,
    pub q0: f64,
    pub xi_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticCouplingRow {
    pub t: f64,
    pub detuning: f64,
    pub xi_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSweep {
    pub linear: Vec<LinearCouplingRow>,
    pub quadratic: Vec<QuadraticCouplingRow>,
}

/// Tabulates `xi_L(q0)` for every transmissivity, and `(Delta_o, xi_Q)` versus `T`.
pub fn coupling_sweep(geom: &CavityGeometry, mode: &CavityMode, t_list: &[f64], q0_grid: &[f64]) -> Result<CouplingSweep> {
    let mut linear = Vec::with_capacity(t_list.len() * q0_grid.len());
    let mut quadratic = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let g = geom.with_transmissivity(t)?;
        let rows: Vec<LinearCouplingRow> = q0_grid
            .par_iter()
            .map(|&q0| {
                Ok(LinearCouplingRow {
                    t,
                    q0,
                    xi_l: linear_coupling_at(&g, mode, q0)?,
                })
            })
            .collect::<Result<_>>()?;
        linear.extend(rows);
        quadratic.push(QuadraticCouplingRow {
            t,
            detuning: quadratic_detuning(&g),
            xi_q: quadratic_coupling(&g, mode).ok(),
        });
    }
    Ok(CouplingSweep { linear, quadratic })
}
