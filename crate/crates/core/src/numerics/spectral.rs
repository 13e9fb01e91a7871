//! Welch power spectral density and a log-domain Lorentzian fit.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Accumulates Hann-windowed, half-overlapping periodograms.
///
/// The estimate is one-sided in angular frequency: `sum(psd) * d_omega`
/// approximates the variance of the input.
#[derive(Clone)]
pub struct Welch {
    segment_len: usize,
    step: usize,
    dt: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
    sum: Vec<f64>,
    segments: usize,
    scratch: Vec<Complex<f64>>,
}

impl Welch {
    pub fn new(segment_len: usize, dt: f64) -> Result<Self> {
        if segment_len < 16 {
            return Err(Error::param("segment_len", "must be at least 16 samples"));
        }
        if !(dt > 0.0) {
            return Err(Error::param("dt", "sample interval must be positive"));
        }
        let window: Vec<f64> = (0..segment_len)
            .map(|i| {
                let x = (PI * i as f64 / segment_len as f64).sin();
                x * x
            })
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment_len);
        Ok(Self {
            segment_len,
            step: segment_len / 2,
            dt,
            window,
            window_power,
            fft,
            sum: vec![0.0; segment_len / 2 + 1],
            segments: 0,
            scratch: vec![Complex::new(0.0, 0.0); segment_len],
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn resolution(&self) -> f64 {
        2.0 * PI / (self.segment_len as f64 * self.dt)
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Adds every complete segment of `series`.
    pub fn push_series(&mut self, series: &[f64]) {
        let n = self.segment_len;
        let mut start = 0;
        while start + n <= series.len() {
            for (i, c) in self.scratch.iter_mut().enumerate() {
                *c = Complex::new(series[start + i] * self.window[i], 0.0);
            }
            self.fft.process(&mut self.scratch);
            for (k, acc) in self.sum.iter_mut().enumerate() {
                *acc += self.scratch[k].norm_sqr();
            }
            self.segments += 1;
            start += self.step;
        }
    }

    /// Adds the segments accumulated by `other`, which must share the
    /// segment length and sample interval.
    pub fn merge(&mut self, other: &Welch) -> Result<()> {
        if other.segment_len != self.segment_len || other.dt != self.dt {
            return Err(Error::param("welch", "cannot merge estimators with different settings"));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.segments += other.segments;
        Ok(())
    }

    /// Returns `(omega, psd)` for bins `0..=N/2`.
    pub fn finish(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.segments == 0 {
            return Err(Error::Statistics("no complete Welch segment".into()));
        }
        let n = self.segment_len;
        let d_omega = self.resolution();
        // two-sided density in angular frequency, then fold
        let norm = self.dt / (self.window_power * 2.0 * PI * self.segments as f64);
        let omega = (0..=n / 2).map(|k| k as f64 * d_omega).collect();
        let psd = self
            .sum
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let fold = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
                fold * s * norm
            })
            .collect();
        Ok((omega, psd))
    }
}

/// Parameters of `S(w) = A / ((w0^2 - w^2)^2 + G^2 w^2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub omega0: f64,
    /// Full linewidth `G` [rad/s]; equals `D_eff / m` for a mechanical susceptibility.
    pub linewidth: f64,
    pub omega0_std: f64,
    pub linewidth_std: f64,
    pub points: usize,
}

fn model_and_jacobian(theta: &Vector3<f64>, w: f64) -> (f64, Vector3<f64>) {
    let (ln_a, w0, ln_g) = (theta[0], theta[1], theta[2]);
    let g = ln_g.exp();
    let det = w0 * w0 - w * w;
    let den = det * det + g * g * w * w;
    let val = ln_a - den.ln();
    let j = Vector3::new(1.0, -4.0 * det * w0 / den, -2.0 * g * g * w * w / den);
    (val, j)
}

/// Least-squares fit of `ln S` to the log of the Lorentzian model.
///
/// Fitting in the log domain makes the Welch noise (chi-squared with fixed
/// degrees of freedom) homoscedastic; its mean offset only shifts `A`.
pub fn fit_lorentzian(omega: &[f64], psd: &[f64], guess: (f64, f64)) -> Result<LorentzianFit> {
    let pts: Vec<(f64, f64)> = omega
        .iter()
        .zip(psd)
        .filter(|(w, s)| **w > 0.0 && **s > 0.0)
        .map(|(w, s)| (*w, s.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::Fit(format!("only {} usable spectral points", pts.len())));
    }
    let (w0, g0) = guess;
    if !(w0 > 0.0 && g0 > 0.0) {
        return Err(Error::Fit("initial guess must be positive".into()));
    }
    // amplitude from the mean offset at the starting shape
    let mut theta = Vector3::new(0.0, w0, g0.ln());
    let offset: f64 = pts
        .iter()
        .map(|(w, ls)| ls - model_and_jacobian(&theta, *w).0)
        .sum::<f64>()
        / pts.len() as f64;
    theta[0] = offset;

    let cost = |t: &Vector3<f64>| -> f64 {
        pts.iter()
            .map(|(w, ls)| {
                let r = ls - model_and_jacobian(t, *w).0;
                r * r
            })
            .sum()
    };
    let mut lambda = 1e-3;
    let mut current = cost(&theta);
    let mut converged = false;
    for _ in 0..500 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (w, ls) in &pts {
            let (m, j) = model_and_jacobian(&theta, *w);
            jtj += j * j.transpose();
            jtr += j * (ls - m);
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut lhs = jtj;
            for i in 0..3 {
                lhs[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = lhs.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = theta + step;
            let c = cost(&trial);
            if c.is_finite() && c < current {
                let rel = (current - c) / current.max(f64::MIN_POSITIVE);
                theta = trial;
                current = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 || step.norm() < 1e-12 * theta.norm() {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit("Levenberg-Marquardt did not converge".into()));
    }
    let mut jtj = Matrix3::zeros();
    for (w, _) in &pts {
        let (_, j) = model_and_jacobian(&theta, *w);
        jtj += j * j.transpose();
    }
    let dof = (pts.len() - 3) as f64;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular normal matrix".into()))?
        * (current / dof);
    let g = theta[2].exp();
    Ok(LorentzianFit {
        amplitude: theta[0].exp(),
        omega0: theta[1].abs(),
        linewidth: g,
        omega0_std: cov[(1, 1)].sqrt(),
        linewidth_std: g * cov[(2, 2)].sqrt(),
        points: pts.len(),
    })
}

/// Peak location and half-maximum full width of a sampled spectrum,
/// used to seed the fit.
pub fn peak_guess(omega: &[f64], psd: &[f64]) -> Option<(usize, f64, f64)> {
    let (ip, &smax) = psd
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * smax;
    let mut lo = ip;
    while lo > 0 && psd[lo] > half {
        lo -= 1;
    }
    let mut hi = ip;
    while hi + 1 < psd.len() && psd[hi] > half {
        hi += 1;
    }
    let d_omega = omega.get(1).copied().unwrap_or(1.0) - omega[0];
    let width = ((omega[hi] - omega[lo]).max(d_omega)).max(f64::MIN_POSITIVE);
    Some((ip, omega[ip], width))
}
