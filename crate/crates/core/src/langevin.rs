//! Ensemble integration of the linearised fluctuation dynamics
//! `du = A u dt + dW` and the statistics drawn from it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::BOLTZMANN;
use crate::dynamics::{stability, LinearizedSystem, MechanicalOscillator};
use crate::error::{Error, Result};
use crate::numerics::linalg::{lyapunov, psd_sqrt, van_loan, Balanced};
use crate::numerics::spectral::{fit_lorentzian, peak_guess, LorentzianFit, Welch};

/// White-noise inputs: unit-intensity vacuum noise scaled by `sqrt(gamma)`
/// on every optical quadrature, thermal force noise on the momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// `gamma` [s^-1]
    pub vacuum_rate: f64,
    /// `N = 2 D_M k_B T_e` [kg^2 m^2 s^-3]
    pub thermal_strength: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(gamma: f64, mech: &MechanicalOscillator, seed: u64) -> Self {
        Self {
            vacuum_rate: gamma,
            thermal_strength: mech.thermal_noise_strength(),
            seed,
        }
    }

    /// Diffusion matrix `Q` with `E[dW dW^T] = Q dt`.
    pub fn diffusion(&self, sys: &LinearizedSystem) -> DMatrix<f64> {
        let n = sys.dim();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..2 * sys.optical_modes {
            q[(i, i)] = self.vacuum_rate;
        }
        q[(sys.momentum_index(), sys.momentum_index())] = self.thermal_strength;
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Exact Gaussian transition of the Ornstein-Uhlenbeck process.
    #[default]
    ExactOu,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    Zero,
    /// A draw from the stationary covariance.
    Stationary,
    Fixed(Vec<f64>),
}

/// Which state components are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Record {
    #[default]
    All,
    /// `(δq, δp)`
    Mechanical,
    /// `δq` only
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub duration: f64,
    pub n_traj: usize,
    pub integrator: Integrator,
    /// Keep every `decimation`-th step.
    pub decimation: usize,
    pub record: Record,
    pub initial: InitialState,
    /// Integrate even if the drift has growing modes.
    pub allow_unstable: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            duration: 1e-3,
            n_traj: 100,
            integrator: Integrator::default(),
            decimation: 1,
            record: Record::default(),
            initial: InitialState::default(),
            allow_unstable: false,
        }
    }
}

/// Largest Euler-Maruyama step relative to the fastest eigenvalue.
pub const EM_STEP_FACTOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEnsemble {
    /// Integration step [s].
    pub dt: f64,
    /// Interval between stored samples [s].
    pub sample_dt: f64,
    pub duration: f64,
    pub n_traj: usize,
    pub steps: usize,
    /// State indices stored, in order.
    pub channels: Vec<usize>,
    pub position_channel: Option<usize>,
    /// Slowest decay time `1 / min |Re lambda|` of the drift [s].
    pub relaxation_time: f64,
    /// Per trajectory, samples stored row-major: `states[k][s * channels.len() + c]`.
    pub states: Vec<Vec<f64>>,
}

impl TrajectoryEnsemble {
    pub fn samples(&self) -> usize {
        self.states.first().map_or(0, |s| s.len() / self.channels.len())
    }

    /// Time series of state component `index` for trajectory `k`.
    pub fn series(&self, k: usize, index: usize) -> Option<Vec<f64>> {
        let c = self.channels.iter().position(|&i| i == index)?;
        let w = self.channels.len();
        Some(self.states.get(k)?.iter().skip(c).step_by(w).copied().collect())
    }

    fn position_series(&self, k: usize) -> Result<Vec<f64>> {
        let idx = self
            .position_channel
            .ok_or_else(|| Error::Statistics("position was not recorded".into()))?;
        self.series(k, idx)
            .ok_or_else(|| Error::Statistics("trajectory index out of range".into()))
    }
}

fn steps_for(cfg: &SimulationConfig) -> Result<usize> {
    if !(cfg.dt > 0.0 && cfg.duration > 0.0) {
        return Err(Error::param("dt", "step and duration must be positive"));
    }
    if cfg.n_traj == 0 || cfg.decimation == 0 {
        return Err(Error::param("n_traj", "trajectory count and decimation must be at least 1"));
    }
    let ratio = cfg.duration / cfg.dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio || steps < 1.0 {
        return Err(Error::param("duration", "must be an integer number of steps"));
    }
    Ok(steps as usize)
}

/// Integrates `n_traj` independent trajectories.
///
/// Trajectory `k` draws from ChaCha8 stream `k` of the seed, so results do
/// not depend on thread scheduling. The state is advanced in balanced
/// coordinates, which keeps quadratures (~1) and displacements (~1e-12 m)
/// on a common scale.
pub fn simulate(sys: &LinearizedSystem, noise: &NoiseSpec, cfg: &SimulationConfig) -> Result<TrajectoryEnsemble> {
    let a = &sys.drift;
    let n = sys.dim();
    if !(noise.vacuum_rate >= 0.0 && noise.thermal_strength >= 0.0) {
        return Err(Error::param("noise", "intensities must be non-negative"));
    }
    let steps = steps_for(cfg)?;
    let report = stability(a);
    if !report.stable && !cfg.allow_unstable {
        return Err(Error::Unstable { max_real: report.max_real });
    }
    if cfg.integrator == Integrator::EulerMaruyama {
        let max = EM_STEP_FACTOR / report.spectral_radius;
        if cfg.dt > max {
            return Err(Error::StepSize { dt: cfg.dt, max });
        }
    }
    let slowest = report
        .eigenvalues
        .iter()
        .map(|e| e.re.abs())
        .fold(f64::INFINITY, f64::min);
    let relaxation_time = 1.0 / slowest;

    let q = noise.diffusion(sys);
    let bal = Balanced::new(a);
    let ab = &bal.matrix;
    let qb = bal.covariance_to_balanced(&q);
    let q_max = qb.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let (phi, chol) = match cfg.integrator {
        Integrator::ExactOu => {
            let qn = if q_max > 0.0 { &qb / q_max } else { qb.clone() };
            let (phi, sigma) = van_loan(ab, &qn, cfg.dt);
            (phi, psd_sqrt(&(sigma * q_max.max(0.0))))
        }
        Integrator::EulerMaruyama => {
            let phi = DMatrix::identity(n, n) + ab * cfg.dt;
            (phi, psd_sqrt(&(&qb * cfg.dt)))
        }
    };

    let start: Option<DVector<f64>> = match &cfg.initial {
        InitialState::Zero | InitialState::Stationary => None,
        InitialState::Fixed(v) => {
            if v.len() != n {
                return Err(Error::param("initial", "state length must match the drift matrix"));
            }
            Some(DVector::from_iterator(n, v.iter().zip(&bal.scale).map(|(x, s)| x / s)))
        }
    };
    let stationary_factor = if cfg.initial == InitialState::Stationary {
        let s = lyapunov(ab, &qb).ok_or_else(|| Error::DegenerateParameters("no stationary covariance".into()))?;
        Some(psd_sqrt(&s))
    } else {
        None
    };

    let channels: Vec<usize> = match cfg.record {
        Record::All => (0..n).collect(),
        Record::Mechanical => vec![sys.position_index(), sys.momentum_index()],
        Record::Position => vec![sys.position_index()],
    };
    let position_channel = channels.contains(&sys.position_index()).then_some(sys.position_index());
    let stored = steps / cfg.decimation + 1;

    let states: Vec<Vec<f64>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(k as u64);
            let mut z = DVector::<f64>::zeros(n);
            let draw = |rng: &mut ChaCha8Rng, z: &mut DVector<f64>| {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            };
            let mut u = match (&start, &stationary_factor) {
                (Some(u0), _) => u0.clone(),
                (None, Some(l)) => {
                    draw(&mut rng, &mut z);
                    l * &z
                }
                (None, None) => DVector::zeros(n),
            };
            let mut out = Vec::with_capacity(stored * channels.len());
            let mut next = DVector::<f64>::zeros(n);
            let push = |out: &mut Vec<f64>, u: &DVector<f64>| {
                for &c in &channels {
                    out.push(u[c] * bal.scale[c]);
                }
            };
            push(&mut out, &u);
            for step in 1..=steps {
                draw(&mut rng, &mut z);
                next.gemv(1.0, &phi, &u, 0.0);
                next.gemv(1.0, &chol, &z, 1.0);
                std::mem::swap(&mut u, &mut next);
                if step % cfg.decimation == 0 {
                    push(&mut out, &u);
                }
            }
            out
        })
        .collect();

    Ok(TrajectoryEnsemble {
        dt: cfg.dt,
        sample_dt: cfg.dt * cfg.decimation as f64,
        duration: cfg.duration,
        n_traj: cfg.n_traj,
        steps,
        channels,
        position_channel,
        relaxation_time,
        states,
    })
}

/// Minimum stationary span after burn-in, in relaxation times.
pub const MIN_RELAXATION_TIMES: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_traj: usize,
    pub samples_per_traj: usize,
}

fn burn_in_samples(ens: &TrajectoryEnsemble, burn_in: f64) -> Result<usize> {
    if !(burn_in >= 0.0) {
        return Err(Error::param("burn_in", "must be non-negative"));
    }
    let span = ens.duration - burn_in;
    if !(span >= MIN_RELAXATION_TIMES * ens.relaxation_time) {
        return Err(Error::Statistics(format!(
            "stationary span {span:e} s is shorter than {MIN_RELAXATION_TIMES} relaxation times ({:e} s)",
            ens.relaxation_time
        )));
    }
    Ok((burn_in / ens.sample_dt).ceil() as usize)
}

/// Delete-one jackknife mean and standard error of equally weighted values.
pub fn jackknife(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Statistics("jackknife needs at least two blocks".into()));
    }
    let total: f64 = values.iter().sum();
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (n - 1) as f64).collect();
    let mean = total / n as f64;
    let loo_mean = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    Ok((mean, var.sqrt()))
}

/// Jackknife standard error from delete-one-group estimates.
fn jackknife_spread(loo: &[f64]) -> f64 {
    let g = loo.len() as f64;
    let m = loo.iter().sum::<f64>() / g;
    (loo.iter().map(|x| (x - m).powi(2)).sum::<f64>() * (g - 1.0) / g).sqrt()
}

/// Stationary `<δq^2>` averaged over time (after `burn_in`) and ensemble,
/// with a jackknife error over per-trajectory time averages.
pub fn estimate_variance(ens: &TrajectoryEnsemble, burn_in: f64) -> Result<VarianceEstimate> {
    let skip = burn_in_samples(ens, burn_in)?;
    let per: Vec<f64> = (0..ens.n_traj)
        .map(|k| {
            let x = ens.position_series(k)?;
            let tail = &x[skip.min(x.len())..];
            if tail.is_empty() {
                return Err(Error::Statistics("no samples after burn-in".into()));
            }
            Ok(tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64)
        })
        .collect::<Result<_>>()?;
    let (mean, std_error) = jackknife(&per)?;
    Ok(VarianceEstimate {
        mean,
        std_error,
        n_traj: ens.n_traj,
        samples_per_traj: ens.samples() - skip.min(ens.samples()),
    })
}

/// `T = m omega^2 <δq^2> / k_B` with its propagated error.
pub fn equipartition_temperature(mass: f64, omega: f64, var: &VarianceEstimate) -> (f64, f64) {
    let f = mass * omega * omega / BOLTZMANN;
    (f * var.mean, f * var.std_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub burn_in: f64,
    /// Welch segment length; chosen from the relaxation time when absent.
    pub segment_len: Option<usize>,
    /// Trajectory groups for the jackknife error.
    pub groups: usize,
    /// Fit half-band around the peak, in peak widths.
    pub fit_band: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            burn_in: 0.0,
            segment_len: None,
            groups: 10,
            fit_band: 10.0,
        }
    }
}

/// Required ratio of linewidth to frequency resolution.
pub const RESOLUTION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub omega: Vec<f64>,
    pub psd: Vec<f64>,
    pub resolution: f64,
    pub segments: usize,
    pub fit: LorentzianFit,
    pub omega_eff: f64,
    pub omega_eff_se: f64,
    /// `D_eff = m * linewidth` [kg/s]
    pub damping: f64,
    pub damping_se: f64,
}

fn fit_band(omega: &[f64], psd: &[f64], band: f64) -> Result<(Vec<f64>, Vec<f64>, (f64, f64))> {
    let (_, w0, fwhm) =
        peak_guess(omega, psd).ok_or_else(|| Error::Fit("spectrum has no interior peak".into()))?;
    let (lo, hi) = (w0 - band * fwhm, w0 + band * fwhm);
    let (w, s): (Vec<f64>, Vec<f64>) = omega
        .iter()
        .zip(psd)
        .filter(|(x, _)| **x > 0.0 && **x >= lo && **x <= hi)
        .map(|(x, y)| (*x, *y))
        .unzip();
    Ok((w, s, (w0, fwhm)))
}

/// Welch spectrum of `δq` with a Lorentzian fit; standard errors come from
/// a delete-one-group jackknife over trajectory groups.
pub fn estimate_spectrum(ens: &TrajectoryEnsemble, mass: f64, cfg: &SpectrumConfig) -> Result<SpectrumEstimate> {
    let skip = burn_in_samples(ens, cfg.burn_in)?;
    let available = ens.samples().saturating_sub(skip);
    let seg = match cfg.segment_len {
        Some(n) => n,
        None => {
            // mechanical linewidth ~ 2 / relaxation time
            let target = 2.0 / ens.relaxation_time / RESOLUTION_FACTOR;
            let n = (2.0 * std::f64::consts::PI / (target * ens.sample_dt)).ceil() as usize;
            n.next_power_of_two()
        }
    };
    if seg > available {
        return Err(Error::Fit(format!(
            "segment of {seg} samples exceeds the {available} stationary samples per trajectory"
        )));
    }
    let groups = cfg.groups.min(ens.n_traj);
    if groups < 2 {
        return Err(Error::Statistics("need at least two trajectory groups".into()));
    }
    let parts: Vec<Welch> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let mut w = Welch::new(seg, ens.sample_dt)?;
            for k in (g..ens.n_traj).step_by(groups) {
                let x = ens.position_series(k)?;
                w.push_series(&x[skip..]);
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let mut all = parts[0].clone();
    for p in &parts[1..] {
        all.merge(p)?;
    }
    let (omega, psd) = all.finish()?;
    let (w, s, guess) = fit_band(&omega, &psd, cfg.fit_band)?;
    let fit = fit_lorentzian(&w, &s, guess)?;
    let resolution = all.resolution();
    if resolution * RESOLUTION_FACTOR > fit.linewidth {
        return Err(Error::Fit(format!(
            "resolution {resolution:e} rad/s does not resolve linewidth {:e} rad/s (need a factor {RESOLUTION_FACTOR}); \
             peak at {:e} rad/s from {} segments of {seg} samples",
            fit.linewidth,
            fit.omega0,
            all.segments()
        )));
    }
    let loo: Vec<LorentzianFit> = (0..groups)
        .into_par_iter()
        .map(|skip_g| {
            let mut acc = Welch::new(seg, ens.sample_dt)?;
            for (g, p) in parts.iter().enumerate() {
                if g != skip_g {
                    acc.merge(p)?;
                }
            }
            let (om, ps) = acc.finish()?;
            let (w, s, _) = fit_band(&om, &ps, cfg.fit_band)?;
            fit_lorentzian(&w, &s, (fit.omega0, fit.linewidth))
        })
        .collect::<Result<_>>()?;
    let w_loo: Vec<f64> = loo.iter().map(|f| f.omega0).collect();
    let g_loo: Vec<f64> = loo.iter().map(|f| f.linewidth).collect();
    Ok(SpectrumEstimate {
        resolution,
        segments: all.segments(),
        omega_eff: fit.omega0,
        omega_eff_se: jackknife_spread(&w_loo),
        damping: mass * fit.linewidth,
        damping_se: mass * jackknife_spread(&g_loo),
        fit,
        omega,
        psd,
    })
}
