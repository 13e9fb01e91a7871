//! Steady states, linearised fluctuation dynamics, stability and effective
//! mechanical parameters.
//!
//! Fluctuations are symmetrised quadratures `X = (da + da^†)/√2`,
//! `Y = (da - da^†)/(i√2)` of each driven mode, followed by `(δq, δp)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{BOLTZMANN, HBAR};
use crate::coupling::quadratic_coupling;
use crate::error::{Error, Result};
use crate::modespectrum::{Branch, CavityGeometry, CavityMode};
use crate::numerics::linalg::{characteristic_polynomial, eigenvalues, routh_hurwitz, Balanced};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanicalOscillator {
    pub mass: f64,
    pub omega_m: f64,
    /// Damping constant `D_M` [kg/s]; the amplitude decay rate is `D_M / 2m`.
    pub damping: f64,
    pub bath_temperature: f64,
    pub rest_position: f64,
}

impl MechanicalOscillator {
    pub fn new(mass: f64, omega_m: f64, damping: f64, bath_temperature: f64, rest_position: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("m", format!("must be positive, got {mass}")));
        }
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::param("omega_M", format!("must be positive, got {omega_m}")));
        }
        if !(damping >= 0.0 && damping.is_finite()) {
            return Err(Error::param("D_M", format!("must be non-negative, got {damping}")));
        }
        if !(bath_temperature >= 0.0 && bath_temperature.is_finite()) {
            return Err(Error::param("T_e", format!("must be non-negative, got {bath_temperature}")));
        }
        if !rest_position.is_finite() {
            return Err(Error::param("q0", "must be finite"));
        }
        Ok(Self {
            mass,
            omega_m,
            damping,
            bath_temperature,
            rest_position,
        })
    }

    /// `D_M = m omega_M / Q`.
    pub fn with_quality_factor(mass: f64, omega_m: f64, q_factor: f64, bath_temperature: f64, rest_position: f64) -> Result<Self> {
        if !(q_factor > 0.0) {
            return Err(Error::param("Q", "must be positive"));
        }
        Self::new(mass, omega_m, mass * omega_m / q_factor, bath_temperature, rest_position)
    }

    pub fn quality_factor(&self) -> f64 {
        self.mass * self.omega_m / self.damping
    }

    /// High-temperature force-noise intensity `N = 2 D_M k_B T_e`.
    pub fn thermal_noise_strength(&self) -> f64 {
        2.0 * self.damping * BOLTZMANN * self.bath_temperature
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveField {
    pub power: f64,
    /// Cavity-minus-laser detuning [rad/s]; positive is red detuning.
    pub detuning: f64,
    pub branch: Branch,
}

impl DriveField {
    pub fn new(power: f64, detuning: f64, branch: Branch) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::param("P_in", format!("must be non-negative, got {power}")));
        }
        if !detuning.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        Ok(Self { power, detuning, branch })
    }

    /// `|f_in| = sqrt(P_in / (hbar omega_n))` [photons^1/2 s^-1/2].
    pub fn input_amplitude(&self, mode: &CavityMode) -> f64 {
        (self.power / (HBAR * mode.omega())).sqrt()
    }

    /// Intracavity amplitude `sqrt(gamma / (delta^2 + gamma^2/4)) f_in`.
    pub fn intracavity_amplitude(&self, mode: &CavityMode, gamma: f64) -> f64 {
        let d = self.detuning;
        (gamma / (d * d + 0.25 * gamma * gamma)).sqrt() * self.input_amplitude(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub q_s: f64,
    pub p_s: f64,
    pub b_s: f64,
}

fn trap_coupling(geom: &CavityGeometry, mode: &CavityMode, drive: &DriveField) -> Result<f64> {
    if drive.branch == Branch::Even {
        return Err(Error::AntitrappingConfiguration);
    }
    let xi_q = quadratic_coupling(geom, mode)?;
    if !(xi_q > 0.0) {
        return Err(Error::DegenerateParameters(
            "quadratic coupling vanishes for a fully transparent middle mirror".into(),
        ));
    }
    Ok(xi_q)
}

/// Steady state with the odd mode driven at a quarter-wave point: the mirror
/// stays at `q_s = 0` whatever the coupling strength.
pub fn steady_state_quadratic(
    geom: &CavityGeometry,
    mode: &CavityMode,
    _mech: &MechanicalOscillator,
    drive: &DriveField,
) -> Result<SteadyState> {
    trap_coupling(geom, mode, drive)?;
    Ok(SteadyState {
        q_s: 0.0,
        p_s: 0.0,
        b_s: drive.intracavity_amplitude(mode, geom.gamma()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceScanPoint {
    pub q: f64,
    /// `2 hbar xi_Q |b_s(q)|^2 + m omega_M^2` [N/m]
    pub stiffness: f64,
    pub force: f64,
}

/// Static restoring force on the mirror displaced by `q` from the quarter-wave
/// point, with the intracavity field adjusted to the shifted resonance.
pub fn static_force_scan(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drive: &DriveField,
    q_grid: &[f64],
) -> Result<Vec<ForceScanPoint>> {
    let xi_q = trap_coupling(geom, mode, drive)?;
    let gamma = geom.gamma();
    let f2 = drive.input_amplitude(mode).powi(2);
    Ok(q_grid
        .iter()
        .map(|&q| {
            let d = drive.detuning + xi_q * q * q;
            let b2 = gamma * f2 / (d * d + 0.25 * gamma * gamma);
            let stiffness = 2.0 * HBAR * xi_q * b2 + mech.mass * mech.omega_m.powi(2);
            ForceScanPoint {
                q,
                stiffness,
                force: -stiffness * q,
            }
        })
        .collect())
}

/// Positions where the scanned force vanishes or changes sign.
pub fn force_zeros(scan: &[ForceScanPoint]) -> Vec<f64> {
    let mut zeros: Vec<f64> = scan.iter().filter(|p| p.force == 0.0).map(|p| p.q).collect();
    for w in scan.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.force != 0.0 && b.force != 0.0 && a.force.signum() != b.force.signum() {
            zeros.push(a.q - a.force * (b.q - a.q) / (b.force - a.force));
        }
    }
    zeros.sort_by(f64::total_cmp);
    zeros
}

/// Drift matrix of `(δX_b, δY_b, δq, δp)` for the quadratic configuration.
pub fn fluctuation_matrix(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drive: &DriveField,
    ss: &SteadyState,
) -> Result<DMatrix<f64>> {
    let xi_q = trap_coupling(geom, mode, drive)?;
    let g2 = 0.5 * geom.gamma();
    let d = drive.detuning;
    let m = mech.mass;
    let k = 2.0 * HBAR * xi_q * ss.b_s * ss.b_s + m * mech.omega_m.powi(2);
    #[rustfmt::skip]
    let rows = [
        -g2,  d,   0.0,    0.0,
        -d,  -g2,  0.0,    0.0,
        0.0,  0.0, 0.0,    1.0 / m,
        0.0,  0.0, -k,    -mech.damping / m,
    ];
    Ok(DMatrix::from_row_slice(4, 4, &rows))
}

/// A linearised system `du = A u dt + noise`: `2 * optical_modes` optical
/// quadratures followed by `(δq, δp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub drift: DMatrix<f64>,
    pub optical_modes: usize,
}

impl LinearizedSystem {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn position_index(&self) -> usize {
        2 * self.optical_modes
    }

    pub fn momentum_index(&self) -> usize {
        2 * self.optical_modes + 1
    }
}

/// Quadratic configuration as a [`LinearizedSystem`].
pub fn quadratic_system(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drive: &DriveField,
) -> Result<LinearizedSystem> {
    let ss = steady_state_quadratic(geom, mode, mech, drive)?;
    Ok(LinearizedSystem {
        drift: fluctuation_matrix(geom, mode, mech, drive, &ss)?,
        optical_modes: 1,
    })
}

/// One driven mode in the linear-coupling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearModeDrive {
    /// Signed slope of the mode frequency, `d omega / dq` [rad s^-1 m^-1]:
    /// `-xi_L` for the even mode, `+xi_L` for the odd one.
    pub slope: f64,
    pub drive: DriveField,
}

/// Linear-coupling drift matrix for any number of driven modes near `mode`
/// plus an optional quadratically coupled trap mode (which adds stiffness
/// only), possibly of a different frequency.
///
/// For a mode with frequency slope `s` and real steady amplitude `a_s`:
/// `dY/dt ∋ -√2 s a_s δq` and `dp/dt ∋ -√2 ħ s a_s δX`.
pub fn linear_system(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drives: &[LinearModeDrive],
    trap: Option<(&CavityMode, &DriveField)>,
) -> Result<LinearizedSystem> {
    let k = drives.len() + usize::from(trap.is_some());
    let n = 2 * k + 2;
    let (iq, ip) = (2 * k, 2 * k + 1);
    let gamma = geom.gamma();
    let m = mech.mass;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut spring = m * mech.omega_m.powi(2);
    let optical_block = |a: &mut DMatrix<f64>, j: usize, d: f64| {
        let (x, y) = (2 * j, 2 * j + 1);
        a[(x, x)] = -0.5 * gamma;
        a[(y, y)] = -0.5 * gamma;
        a[(x, y)] = d;
        a[(y, x)] = -d;
    };
    for (j, md) in drives.iter().enumerate() {
        optical_block(&mut a, j, md.drive.detuning);
        let amp = md.drive.intracavity_amplitude(mode, gamma);
        let g = std::f64::consts::SQRT_2 * md.slope * amp;
        a[(2 * j + 1, iq)] = -g;
        a[(ip, 2 * j)] = -HBAR * g;
    }
    if let Some((trap_mode, t)) = trap {
        let j = drives.len();
        optical_block(&mut a, j, t.detuning);
        let xi_q = trap_coupling(geom, trap_mode, t)?;
        let b = t.intracavity_amplitude(trap_mode, gamma);
        spring += 2.0 * HBAR * xi_q * b * b;
    }
    a[(iq, ip)] = 1.0 / m;
    a[(ip, iq)] = -spring;
    a[(ip, ip)] = -mech.damping / m;
    Ok(LinearizedSystem {
        drift: a,
        optical_modes: k,
    })
}

/// Both modes of the linear configuration pumped with the same power and
/// detuning, the arrangement whose radiation effects follow the standard
/// linear-coupling result.
pub fn symmetric_linear_system(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    xi_l: f64,
    power: f64,
    detuning: f64,
) -> Result<LinearizedSystem> {
    let even = LinearModeDrive {
        slope: -xi_l,
        drive: DriveField::new(power, detuning, Branch::Even)?,
    };
    let odd = LinearModeDrive {
        slope: xi_l,
        drive: DriveField::new(power, detuning, Branch::Odd)?,
    };
    linear_system(geom, mode, mech, &[even, odd], None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Eigenvalue>,
    pub max_real: f64,
    pub spectral_radius: f64,
    pub stable: bool,
    pub routh_hurwitz: bool,
}

/// Eigenvalue and Routh-Hurwitz stability of a drift matrix.
///
/// `stable` allows a slack of `1e-12` times the spectral radius on the
/// largest real part, so marginal modes count as stable; Routh-Hurwitz is
/// strict.
pub fn stability(m: &DMatrix<f64>) -> StabilityReport {
    let eig: Vec<Complex64> = eigenvalues(m);
    let max_real = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let spectral_radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // similarity-invariant, and far better conditioned after balancing
    let coeffs = characteristic_polynomial(&Balanced::new(m).matrix);
    StabilityReport {
        eigenvalues: eig.iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect(),
        max_real,
        spectral_radius,
        stable: max_real <= 1e-12 * spectral_radius,
        routh_hurwitz: routh_hurwitz(&coeffs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseRegime {
    QuadraticConstant,
    LinearFrequencyDependent,
}

/// A linearly coupled beam contributing the retarded radiation-pressure
/// spring and damping of the standard two-mode result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearBeam {
    /// Coupling magnitude `|xi_L|` [rad s^-1 m^-1].
    pub coupling: f64,
    pub power: f64,
    pub detuning: f64,
}

/// Effective mechanical frequency and damping seen at probe frequency `omega`.
///
/// `omega_eff^2(omega) = omega_sq + sum_beams spring(omega)` and
/// `D_eff(omega) = damping + sum_beams damping(omega)`; with no beams both are
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveResponse {
    pub mass: f64,
    pub omega_sq: f64,
    pub damping: f64,
    pub beams: Vec<LinearBeam>,
    pub gamma: f64,
    pub length: f64,
}

impl EffectiveResponse {
    pub fn constant(mass: f64, omega_eff: f64, damping: f64) -> Self {
        Self {
            mass,
            omega_sq: omega_eff * omega_eff,
            damping,
            beams: Vec::new(),
            gamma: 0.0,
            length: 1.0,
        }
    }

    pub fn regime(&self) -> ResponseRegime {
        if self.beams.is_empty() {
            ResponseRegime::QuadraticConstant
        } else {
            ResponseRegime::LinearFrequencyDependent
        }
    }

    fn lorentz_pair(&self, d: f64, omega: f64) -> f64 {
        let h2 = 0.25 * self.gamma * self.gamma;
        (h2 + (omega - d).powi(2)) * (h2 + (omega + d).powi(2))
    }

    pub fn beam_spring(&self, b: &LinearBeam, omega: f64) -> f64 {
        let d = b.detuning;
        let h2 = 0.25 * self.gamma * self.gamma;
        let v = 4.0 * b.coupling * self.gamma * b.power / (self.mass * self.length);
        -v * d / (d * d + h2) * (h2 - (omega * omega - d * d)) / self.lorentz_pair(d, omega)
    }

    pub fn beam_damping(&self, b: &LinearBeam, omega: f64) -> f64 {
        let d = b.detuning;
        let h2 = 0.25 * self.gamma * self.gamma;
        let u = 4.0 * b.coupling * self.gamma * b.power / self.length;
        u * d / (d * d + h2) * self.gamma / self.lorentz_pair(d, omega)
    }

    pub fn omega_eff_sq(&self, omega: f64) -> f64 {
        self.omega_sq + self.beams.iter().map(|b| self.beam_spring(b, omega)).sum::<f64>()
    }

    /// `sqrt(omega_eff^2(omega))`, NaN if the net spring is anti-restoring.
    pub fn omega_eff(&self, omega: f64) -> f64 {
        self.omega_eff_sq(omega).sqrt()
    }

    pub fn damping_at(&self, omega: f64) -> f64 {
        self.damping + self.beams.iter().map(|b| self.beam_damping(b, omega)).sum::<f64>()
    }

    /// Constant-parameter response equal to this one at probe frequency `omega`.
    pub fn frozen_at(&self, omega: f64) -> Self {
        Self {
            mass: self.mass,
            omega_sq: self.omega_eff_sq(omega),
            damping: self.damping_at(omega),
            beams: Vec::new(),
            gamma: self.gamma,
            length: self.length,
        }
    }

    /// The same response with a subset of beams.
    pub fn with_beams(&self, beams: Vec<LinearBeam>) -> Self {
        Self { beams, ..self.clone() }
    }
}

/// Effective parameters of the quadratic configuration:
/// `omega_eff^2 = omega_M^2 + 2 xi_Q gamma P_in / (m omega_n (delta^2 + gamma^2/4))`,
/// `D_eff = D_M`.
pub fn effective_params_quadratic(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drive: &DriveField,
) -> Result<EffectiveResponse> {
    let xi_q = trap_coupling(geom, mode, drive)?;
    let gamma = geom.gamma();
    let d = drive.detuning;
    let optical = 2.0 * xi_q * gamma * drive.power / (mech.mass * mode.omega()) / (d * d + 0.25 * gamma * gamma);
    Ok(EffectiveResponse {
        mass: mech.mass,
        omega_sq: mech.omega_m.powi(2) + optical,
        damping: mech.damping,
        beams: Vec::new(),
        gamma,
        length: geom.length(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapFrequencyReport {
    /// `sqrt(omega_M^2 + 4 xi_Q P_in / (m omega_n gamma))`, the resonant-drive
    /// trap frequency as usually quoted.
    pub quoted: f64,
    /// The `delta -> 0` limit of the general effective frequency,
    /// `sqrt(omega_M^2 + 8 xi_Q P_in / (m omega_n gamma))`.
    pub resonant_limit: f64,
    /// Ratio of the optical spring terms, `limit / quoted` (= 2).
    pub spring_ratio: f64,
}

/// Maximum trap frequency over detuning (reached on resonance), reported in
/// both forms since they differ by a factor of 2 in the optical spring.
pub fn max_trap_frequency(
    geom: &CavityGeometry,
    mode: &CavityMode,
    mech: &MechanicalOscillator,
    drive: &DriveField,
) -> Result<TrapFrequencyReport> {
    let xi_q = trap_coupling(geom, mode, drive)?;
    let w2 = mech.omega_m.powi(2);
    let quoted_spring = 4.0 * xi_q * drive.power / (mech.mass * mode.omega() * geom.gamma());
    let resonant = DriveField { detuning: 0.0, ..*drive };
    let limit = effective_params_quadratic(geom, mode, mech, &resonant)?;
    let limit_spring = limit.omega_sq - w2;
    Ok(TrapFrequencyReport {
        quoted: (w2 + quoted_spring).sqrt(),
        resonant_limit: limit.omega_sq.sqrt(),
        spring_ratio: if quoted_spring > 0.0 { limit_spring / quoted_spring } else { f64::NAN },
    })
}

/// Frequency-dependent effective response of the linear configuration for a
/// set of beams, each entering with its own `|xi_L|`, power and detuning.
pub fn linear_response(geom: &CavityGeometry, mech: &MechanicalOscillator, beams: Vec<LinearBeam>) -> EffectiveResponse {
    EffectiveResponse {
        mass: mech.mass,
        omega_sq: mech.omega_m.powi(2),
        damping: mech.damping,
        beams,
        gamma: geom.gamma(),
        length: geom.length(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveSample {
    pub omega: f64,
    pub omega_eff_sq: f64,
    pub damping: f64,
}

/// Effective spring and damping of a single linearly coupled drive at probe
/// frequency `omega`.
pub fn effective_params_linear(
    geom: &CavityGeometry,
    mech: &MechanicalOscillator,
    drive: &DriveField,
    xi_l: f64,
    omega: f64,
) -> EffectiveSample {
    let beam = LinearBeam {
        coupling: xi_l.abs(),
        power: drive.power,
        detuning: drive.detuning,
    };
    let r = linear_response(geom, mech, vec![beam]);
    EffectiveSample {
        omega,
        omega_eff_sq: r.omega_eff_sq(omega),
        damping: r.damping_at(omega),
    }
}
