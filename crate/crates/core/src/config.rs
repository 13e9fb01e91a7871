//! JSON run configuration.
//!
//! SI base units throughout. Angular frequencies carry an explicit
//! `_rad_s` suffix; the same quantity may instead be given in ordinary
//! frequency with `_hz` and is multiplied by 2π on load. Detunings may also
//! be given in cavity linewidths (`detuning_linewidths`). Unknown keys are
//! rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::coupling::{coupling_regime, default_window, linear_coupling, Regime};
use crate::dynamics::{
    effective_params_quadratic, linear_response, linear_system, quadratic_system, DriveField, EffectiveResponse,
    LinearBeam, LinearModeDrive, LinearizedSystem, MechanicalOscillator,
};
use crate::error::{Error, Result};
use crate::langevin::{SimulationConfig, SpectrumConfig};
use crate::modespectrum::{Branch, CavityGeometry, CavityMode};

const TABLE_ONE: &str = include_str!("../configs/table_one.json");
const COOLING: &str = include_str!("../configs/linear_cooling.json");
const SDE_DEMO: &str = include_str!("../configs/sde_demo.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub length: f64,
    pub transmissivity: f64,
    pub end_transmissivity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finesse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_hz: Option<f64>,
    /// `D_M` [kg/s]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    pub bath_temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_linewidths: Option<f64>,
    pub branch: Branch,
}

/// Rest position of the middle mirror, in metres or in mode wavelengths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0_wavelengths: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::Config("grid must have at least one point".into()));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!("bad grid bounds [{}, {}]", self.min, self.max)));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.min + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<i64>>,
    /// Mirror positions in metres; defaults to ±λ/4 on 201 points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Grid>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmissivities: Option<Vec<f64>>,
    /// Rest positions in metres; defaults to ±λ/2 on 401 points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Grid>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveOptions {
    /// Forces a regime; otherwise inferred from the placement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_rad_s: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_hz: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeOptions {
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    /// Decimated trajectory dump: every n-th stored sample of the first trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_every: Option<usize>,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self {
            simulation: SimulationConfig::default(),
            burn_in: 0.0,
            seed: 0,
            spectrum: SpectrumConfig::default(),
            dump_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignOptions {
    /// Damp wavelength; the configured mode's wavelength if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_d: Option<f64>,
    pub trap: DriveConfig,
    pub damp: DriveConfig,
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
}

fn default_sweep_points() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub mode: ModeConfig,
    pub mechanics: MechanicsConfig,
    #[serde(default)]
    pub drives: Vec<DriveConfig>,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub coupling: CouplingOptions,
    #[serde(default)]
    pub effective: EffectiveOptions,
    #[serde(default)]
    pub sde: SdeOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignOptions>,
}

/// Validated physical objects of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub geometry: CavityGeometry,
    pub mode: CavityMode,
    pub mechanics: MechanicalOscillator,
    pub drives: Vec<DriveField>,
    pub q0: f64,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Picks exactly one of the alternative spellings of a quantity.
fn one_of(name: &str, options: &[(&str, Option<f64>)]) -> Result<Option<f64>> {
    let given: Vec<_> = options.iter().filter(|(_, v)| v.is_some()).collect();
    match given.len() {
        0 => Ok(None),
        1 => Ok(given[0].1),
        _ => Err(Error::Config(format!(
            "{name}: give only one of {}",
            options.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn hz(v: Option<f64>) -> Option<f64> {
    v.map(|f| 2.0 * PI * f)
}

impl DriveConfig {
    pub fn resolve(&self, gamma: f64) -> Result<DriveField> {
        let d = one_of(
            "detuning",
            &[
                ("detuning_rad_s", self.detuning_rad_s),
                ("detuning_hz", hz(self.detuning_hz)),
                ("detuning_linewidths", self.detuning_linewidths.map(|x| x * gamma)),
            ],
        )?
        .unwrap_or(0.0);
        DriveField::new(self.power, d, self.branch).map_err(config_err)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The bundled default: reference parameters, odd mode driven at `q0 = 0`.
    pub fn table_one() -> Self {
        Self::from_json(TABLE_ONE).expect("bundled config parses")
    }

    /// Single-wavelength linear cooling: 5 mW trap at `-2.5 gamma`, 10 µW
    /// cooling at `+0.5 gamma`, finesse 1e5, `q0 = -lambda/2 + lambda/10`.
    pub fn linear_cooling() -> Self {
        Self::from_json(COOLING).expect("bundled config parses")
    }

    /// Quadratic configuration for stochastic runs: 1 µW on resonance lifts
    /// `omega_eff` to ~3.8 `omega_M`; `D_M` is raised so that the effective
    /// quality factor is ~20 and a run spans many relaxation times.
    pub fn sde_demo() -> Self {
        Self::from_json(SDE_DEMO).expect("bundled config parses")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let g = &self.geometry;
        let mut geometry =
            CavityGeometry::new(g.length, g.transmissivity, g.end_transmissivity).map_err(config_err)?;
        let rate = one_of(
            "decay rate",
            &[
                ("decay_rate_rad_s", g.decay_rate_rad_s),
                ("decay_rate_hz", hz(g.decay_rate_hz)),
                ("finesse", g.finesse),
            ],
        )?;
        if let Some(r) = rate {
            geometry = if g.finesse.is_some() {
                geometry.with_finesse(r)
            } else {
                geometry.with_decay_rate(r)
            }
            .map_err(config_err)?;
        }
        let mode = match (self.mode.number, self.mode.wavelength) {
            (Some(n), None) => CavityMode::number(&geometry, n),
            (None, Some(w)) => CavityMode::from_wavelength(w),
            _ => return Err(Error::Config("mode: give exactly one of number, wavelength".into())),
        }
        .map_err(config_err)?;

        let m = &self.mechanics;
        let omega_m = one_of("omega_m", &[("omega_m_rad_s", m.omega_m_rad_s), ("omega_m_hz", hz(m.omega_m_hz))])?
            .ok_or_else(|| Error::Config("mechanics: omega_m_rad_s or omega_m_hz is required".into()))?;
        let q0 = one_of(
            "placement",
            &[
                ("q0", self.placement.q0),
                ("q0_wavelengths", self.placement.q0_wavelengths.map(|x| x * mode.wavelength())),
            ],
        )?
        .unwrap_or(0.0);
        let mechanics = match (m.damping, m.quality_factor) {
            (Some(d), None) => MechanicalOscillator::new(m.mass, omega_m, d, m.bath_temperature, q0),
            (None, Some(qf)) => MechanicalOscillator::with_quality_factor(m.mass, omega_m, qf, m.bath_temperature, q0),
            _ => return Err(Error::Config("mechanics: give exactly one of damping, quality_factor".into())),
        }
        .map_err(config_err)?;
        let gamma = geometry.gamma();
        let drives = self.drives.iter().map(|d| d.resolve(gamma)).collect::<Result<_>>()?;
        let resolved = Resolved {
            geometry,
            mode,
            mechanics,
            drives,
            q0,
        };
        self.validate_options(&resolved)?;
        Ok(resolved)
    }

    fn validate_options(&self, r: &Resolved) -> Result<()> {
        if let Some(g) = &self.spectrum.q {
            g.values()?;
        }
        if let Some(g) = &self.coupling.q0 {
            g.values()?;
        }
        if let Some(ts) = &self.coupling.transmissivities {
            if ts.is_empty() || ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::Config("coupling.transmissivities must be non-empty values in [0, 1]".into()));
            }
        }
        self.omega_grid(r)?;
        if let Some(d) = &self.design {
            d.trap.resolve(r.geometry.gamma())?;
            d.damp.resolve(r.geometry.gamma())?;
        }
        Ok(())
    }

    /// Probe-frequency grid for the effective response; `0.1..10 omega_M` by default.
    pub fn omega_grid(&self, r: &Resolved) -> Result<Vec<f64>> {
        let e = &self.effective;
        let grid = match (&e.omega_rad_s, &e.omega_hz) {
            (Some(_), Some(_)) => return Err(Error::Config("effective: give only one of omega_rad_s, omega_hz".into())),
            (Some(g), None) => *g,
            (None, Some(g)) => Grid {
                min: 2.0 * PI * g.min,
                max: 2.0 * PI * g.max,
                points: g.points,
            },
            (None, None) => Grid {
                min: 0.1 * r.mechanics.omega_m,
                max: 10.0 * r.mechanics.omega_m,
                points: 100,
            },
        };
        grid.values()
    }
}

impl Resolved {
    /// Regime at the configured rest position with the default window.
    pub fn regime(&self) -> Result<Regime> {
        coupling_regime(&self.mode, self.q0, default_window(&self.mode))
    }

    fn xi_l(&self) -> Result<f64> {
        linear_coupling(&self.geometry, &self.mode, self.q0, default_window(&self.mode))
    }

    /// Effective response of all configured drives. Quadratic drives add
    /// their optical springs; linear ones enter as beams with `|xi_L|` at `q0`.
    pub fn response(&self, regime: Regime) -> Result<EffectiveResponse> {
        let mut resp = linear_response(&self.geometry, &self.mechanics, Vec::new());
        match regime {
            Regime::Quadratic => {
                for d in &self.drives {
                    let r = effective_params_quadratic(&self.geometry, &self.mode, &self.mechanics, d)?;
                    resp.omega_sq += r.omega_sq - self.mechanics.omega_m.powi(2);
                }
            }
            Regime::Linear => {
                let xi_l = self.xi_l()?;
                resp.beams = self
                    .drives
                    .iter()
                    .map(|d| LinearBeam { coupling: xi_l.abs(), power: d.power, detuning: d.detuning })
                    .collect();
            }
        }
        Ok(resp)
    }

    /// Drift matrix for the stochastic model. The quadratic regime takes at
    /// most one drive; in the linear regime each drive pumps its own branch.
    pub fn system(&self, regime: Regime) -> Result<LinearizedSystem> {
        let (g, mode, mech) = (&self.geometry, &self.mode, &self.mechanics);
        match regime {
            Regime::Quadratic => match self.drives.as_slice() {
                [] => {
                    let mut a = DMatrix::zeros(2, 2);
                    a[(0, 1)] = 1.0 / mech.mass;
                    a[(1, 0)] = -mech.mass * mech.omega_m.powi(2);
                    a[(1, 1)] = -mech.damping / mech.mass;
                    Ok(LinearizedSystem { drift: a, optical_modes: 0 })
                }
                [d] => quadratic_system(g, mode, mech, d),
                _ => Err(Error::Config("the quadratic stochastic model takes a single drive".into())),
            },
            Regime::Linear => {
                let xi_l = self.xi_l()?;
                let drives: Vec<LinearModeDrive> = self
                    .drives
                    .iter()
                    .map(|d| LinearModeDrive {
                        slope: match d.branch {
                            Branch::Even => -xi_l,
                            Branch::Odd => xi_l,
                        },
                        drive: *d,
                    })
                    .collect();
                linear_system(g, mode, mech, &drives, None)
            }
        }
    }
}
