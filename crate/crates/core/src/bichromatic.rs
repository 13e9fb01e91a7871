//! Two-colour scheme: one beam traps through the quadratic coupling of one
//! mode, a second beam cools through the linear coupling of another.

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{BOLTZMANN, HBAR};
use crate::coupling::{coupling_regime, default_window, linear_coupling_at, quadratic_coupling, Regime};
use crate::dynamics::{
    effective_params_quadratic, linear_response, linear_system, max_trap_frequency, stability, DriveField,
    LinearBeam, LinearModeDrive, MechanicalOscillator, StabilityReport, TrapFrequencyReport,
};
use crate::error::{Error, Result};
use crate::modespectrum::{Branch, CavityGeometry, CavityMode};

/// Trap-to-damp wavelength ratio of the standard placement.
pub const WAVELENGTH_RATIO: f64 = 0.8;
/// Required mode separation in cavity linewidths.
pub const SEPARATION_FACTOR: f64 = 10.0;
pub const MIN_MODE_INDEX: f64 = 1e3;

/// Powers [W] and detunings [rad/s] of the two beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignDrives {
    pub trap_power: f64,
    pub trap_detuning: f64,
    pub damp_power: f64,
    pub damp_detuning: f64,
}

impl DesignDrives {
    /// 8 mW on resonance for the trap, 10 µW at `+gamma/2` for cooling.
    pub fn standard(gamma: f64) -> Self {
        Self {
            trap_power: 8e-3,
            trap_detuning: 0.0,
            damp_power: 10e-6,
            damp_detuning: 0.5 * gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BichromaticDesign {
    pub lambda_t: f64,
    pub lambda_d: f64,
    /// Mirror rest position, at a minimum of the trap mode's odd branch.
    pub q0: f64,
    /// `|omega_t - omega_d|` [rad/s]
    pub mode_separation: f64,
    /// Distance of `q0` to the right of the damp mode's even-branch maximum.
    pub damp_offset: f64,
    pub trap_mode: CavityMode,
    pub damp_mode: CavityMode,
    /// Signed `xi_L` of the damp mode at `q0`; the driven even branch has slope `-xi_L`.
    pub damp_coupling: f64,
    pub trap_coupling: f64,
    pub trap_drive: DriveField,
    pub damp_drive: DriveField,
}

pub fn design(geom: &CavityGeometry, lambda_d: f64, drives: &DesignDrives) -> Result<BichromaticDesign> {
    design_with_ratio(geom, lambda_d, WAVELENGTH_RATIO, drives)
}

/// Placement for an arbitrary `lambda_t / lambda_d`: the mirror sits at
/// `q0 = -lambda_t / 2`, which is `(lambda_d - lambda_t) / 2` right of the
/// damp mode's maximum at `-lambda_d / 2`.
pub fn design_with_ratio(
    geom: &CavityGeometry,
    lambda_d: f64,
    ratio: f64,
    drives: &DesignDrives,
) -> Result<BichromaticDesign> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param("ratio", format!("must lie in (0, 1], got {ratio}")));
    }
    let damp_mode = CavityMode::from_wavelength(lambda_d)?;
    let n_d = damp_mode.index(geom);
    if n_d < MIN_MODE_INDEX {
        return Err(Error::param(
            "lambda_d",
            format!("mode index {n_d:.1} is below {MIN_MODE_INDEX}; the placement assumes a high-order mode"),
        ));
    }
    let lambda_t = ratio * lambda_d;
    let trap_mode = CavityMode::from_wavelength(lambda_t)?;
    let gamma = geom.gamma();
    let mode_separation = (trap_mode.omega() - damp_mode.omega()).abs();
    if mode_separation <= SEPARATION_FACTOR * gamma {
        return Err(Error::DesignInfeasible(format!(
            "mode separation {mode_separation:e} rad/s is not above {SEPARATION_FACTOR} linewidths ({:e} rad/s)",
            SEPARATION_FACTOR * gamma
        )));
    }
    let q0 = -0.5 * lambda_t;
    let damp_offset = q0 + 0.5 * lambda_d;

    if coupling_regime(&trap_mode, q0, default_window(&trap_mode))? != Regime::Quadratic {
        return Err(Error::Placement("trap mode is not quadratically coupled at q0".into()));
    }
    if coupling_regime(&damp_mode, q0, default_window(&damp_mode))? != Regime::Linear {
        return Err(Error::Placement(format!(
            "damp mode is not linearly coupled {damp_offset:e} m from its maximum"
        )));
    }
    let damp_coupling = linear_coupling_at(geom, &damp_mode, q0)?;
    if damp_coupling == 0.0 {
        return Err(Error::DesignInfeasible("damp mode has no linear coupling at q0".into()));
    }
    let trap_coupling = quadratic_coupling(geom, &trap_mode)?;
    let d = BichromaticDesign {
        lambda_t,
        lambda_d,
        q0,
        mode_separation,
        damp_offset,
        trap_mode,
        damp_mode,
        damp_coupling,
        trap_coupling,
        trap_drive: DriveField::new(drives.trap_power, drives.trap_detuning, Branch::Odd)?,
        damp_drive: DriveField::new(drives.damp_power, drives.damp_detuning, Branch::Even)?,
    };
    check_placement(&d)?;
    Ok(d)
}

fn check_placement(d: &BichromaticDesign) -> Result<()> {
    let tol = 1e-12 * d.lambda_d;
    // q0 on an even multiple of lambda_t/4: odd-branch minimum
    let j = d.q0 / (0.25 * d.lambda_t);
    if (j - j.round()).abs() * 0.25 * d.lambda_t > tol || (j.round() as i64) % 2 != 0 {
        return Err(Error::Placement(format!("q0 = {:e} m is not an odd-branch minimum of the trap mode", d.q0)));
    }
    if ((d.q0 + 0.5 * d.lambda_d) - 0.5 * (d.lambda_d - d.lambda_t)).abs() > tol {
        return Err(Error::Placement("mirror offset from the damp-mode maximum is wrong".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridPerformance {
    pub omega_eff: f64,
    pub damping: f64,
    /// Damping added by the trap beam (identically zero).
    pub trap_damping: f64,
    pub t_eff: f64,
    pub n_m: f64,
    pub stability: StabilityReport,
    pub trap_frequency: TrapFrequencyReport,
}

fn damp_beam(d: &BichromaticDesign) -> LinearBeam {
    LinearBeam {
        coupling: d.damp_coupling.abs(),
        power: d.damp_drive.power,
        detuning: d.damp_drive.detuning,
    }
}

/// Stiffness from the trap beam, damping from the cooling beam evaluated
/// at the trapped frequency, then `T_eff = (D_M / D_eff) T_e` and
/// `n_M = k_B T_eff / (hbar omega_eff)`.
pub fn combined_performance(
    d: &BichromaticDesign,
    geom: &CavityGeometry,
    mech: &MechanicalOscillator,
) -> Result<HybridPerformance> {
    let trap = effective_params_quadratic(geom, &d.trap_mode, mech, &d.trap_drive)?;
    let omega_eff = trap.omega_sq.sqrt();
    let damping = linear_response(geom, mech, vec![damp_beam(d)]).damping_at(omega_eff);

    let drives = [LinearModeDrive {
        slope: -d.damp_coupling,
        drive: d.damp_drive,
    }];
    let sys = linear_system(geom, &d.damp_mode, mech, &drives, Some((&d.trap_mode, &d.trap_drive)))?;
    let report = stability(&sys.drift);
    if !report.stable || !(damping > 0.0) {
        return Err(Error::UnstableDesign {
            max_real: report.max_real.max(-damping / (2.0 * mech.mass)),
        });
    }
    let t_eff = mech.damping / damping * mech.bath_temperature;
    Ok(HybridPerformance {
        omega_eff,
        damping,
        trap_damping: trap.damping - mech.damping,
        t_eff,
        n_m: BOLTZMANN * t_eff / (HBAR * omega_eff),
        stability: report,
        trap_frequency: max_trap_frequency(geom, &d.trap_mode, mech, &d.trap_drive)?,
    })
}

/// Single-wavelength scheme with every beam linearly coupled at `q0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSchemePerformance {
    pub xi_l: f64,
    /// Evaluated at `omega_M`.
    pub omega_eff: f64,
    pub damping: f64,
    /// Per-beam added damping at `omega_M`, in input order.
    pub beam_damping: Vec<f64>,
    /// `None` when the net damping is not positive.
    pub t_eff: Option<f64>,
    pub n_m: Option<f64>,
}

pub fn linear_scheme_performance(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    q0: f64,
    beams: &[DriveField],
) -> Result<LinearSchemePerformance> {
    let xi_l = linear_coupling_at(geom, mode, q0)?;
    let lb: Vec<LinearBeam> = beams
        .iter()
        .map(|b| LinearBeam {
            coupling: xi_l.abs(),
            power: b.power,
            detuning: b.detuning,
        })
        .collect();
    let resp = linear_response(geom, mech, lb.clone());
    let w = mech.omega_m;
    let omega_eff = resp.omega_eff(w);
    let damping = resp.damping_at(w);
    let (t_eff, n_m) = if damping > 0.0 && omega_eff > 0.0 {
        let t = mech.damping / damping * mech.bath_temperature;
        (Some(t), Some(BOLTZMANN * t / (HBAR * omega_eff)))
    } else {
        (None, None)
    };
    Ok(LinearSchemePerformance {
        xi_l,
        omega_eff,
        damping,
        beam_damping: lb.iter().map(|b| resp.beam_damping(b, w)).collect(),
        t_eff,
        n_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingComparison {
    pub omega: f64,
    /// Intrinsic plus cooling beam.
    pub without_trap: f64,
    /// Intrinsic plus cooling plus the linearly coupled trap beam.
    pub with_trap: f64,
    /// `without_trap / with_trap`
    pub ratio: f64,
}

/// Gain in total damping from removing the linearly coupled trap beam's
/// contribution, as the hybrid scheme does.
pub fn damping_improvement_ratio(
    geom: &CavityGeometry,
    mech: &MechanicalOscillator,
    xi_l: f64,
    trap: &DriveField,
    cool: &DriveField,
    omega: f64,
) -> DampingComparison {
    let beam = |d: &DriveField| LinearBeam {
        coupling: xi_l.abs(),
        power: d.power,
        detuning: d.detuning,
    };
    let with_trap = linear_response(geom, mech, vec![beam(trap), beam(cool)]).damping_at(omega);
    let without_trap = linear_response(geom, mech, vec![beam(cool)]).damping_at(omega);
    DampingComparison {
        omega,
        without_trap,
        with_trap,
        ratio: without_trap / with_trap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacementOptimum {
    pub q0_design: f64,
    pub xi_l_design: f64,
    pub q0_best: f64,
    pub xi_l_best: f64,
}

/// Sweeps `q0` across the trap mode's quadratic window around the design
/// placement and keeps the point of largest damp-mode `|xi_L|`.
pub fn optimize_placement(geom: &CavityGeometry, d: &BichromaticDesign, points: usize) -> Result<PlacementOptimum> {
    if points < 2 {
        return Err(Error::param("points", "need at least two sweep points"));
    }
    let w = default_window(&d.trap_mode);
    // open interval: the window boundary itself is already linear
    let grid: Vec<f64> = (0..points)
        .map(|i| d.q0 - w + 2.0 * w * (i as f64 + 0.5) / points as f64)
        .collect();
    let vals: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&q| Ok((q, linear_coupling_at(geom, &d.damp_mode, q)?.abs())))
        .collect::<Result<_>>()?;
    let (q0_best, xi_l_best) = vals
        .into_iter()
        .fold((d.q0, d.damp_coupling.abs()), |best, v| if v.1 > best.1 { v } else { best });
    Ok(PlacementOptimum {
        q0_design: d.q0,
        xi_l_design: d.damp_coupling.abs(),
        q0_best,
        xi_l_best,
    })
}
