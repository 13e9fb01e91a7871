//! Electromagnetic modes of the three-mirror resonator.
//!
//! The middle mirror at `x = q` splits the `2L` resonator into two sub-cavities.
//! Each degenerate sub-cavity pair `omega_n = n pi c / L` splits into an even
//! (shifted down) and an odd (shifted up) branch.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{SPEED_OF_LIGHT, TWO_PI};
use crate::error::{Error, Result};
use crate::numerics::roots::bracketed_newton;

/// Lengths and mirror transmissivities of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityGeometry {
    length: f64,
    transmissivity: f64,
    end_transmissivity: f64,
    decay_rate_override: Option<f64>,
}

impl CavityGeometry {
    /// `length` is the sub-cavity length `L`, `transmissivity` the middle
    /// mirror's `T`, `end_transmissivity` the input mirror's.
    pub fn new(length: f64, transmissivity: f64, end_transmissivity: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("L", format!("must be positive and finite, got {length}")));
        }
        for (name, t) in [("T", transmissivity), ("T_end", end_transmissivity)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {t}")));
            }
        }
        Ok(Self {
            length,
            transmissivity,
            end_transmissivity,
            decay_rate_override: None,
        })
    }

    /// Replaces the end-mirror decay rate by an explicit value [s^-1].
    pub fn with_decay_rate(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        self.decay_rate_override = Some(gamma);
        Ok(self)
    }

    /// Sets the decay rate from a cavity finesse: `gamma = FSR / F` with
    /// `FSR = pi c / L` in angular units.
    pub fn with_finesse(self, finesse: f64) -> Result<Self> {
        if !(finesse > 0.0) {
            return Err(Error::param("finesse", "must be positive"));
        }
        let fsr = PI * SPEED_OF_LIGHT / self.length;
        self.with_decay_rate(fsr / finesse)
    }

    pub fn with_transmissivity(mut self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param("T", format!("must lie in [0, 1], got {t}")));
        }
        self.transmissivity = t;
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    pub fn end_transmissivity(&self) -> f64 {
        self.end_transmissivity
    }

    /// Round-trip time of one sub-cavity, `2L/c`.
    pub fn tau(&self) -> f64 {
        2.0 * self.length / SPEED_OF_LIGHT
    }

    /// Cavity field decay rate: `c T_end / 2L` unless overridden.
    pub fn gamma(&self) -> f64 {
        self.decay_rate_override
            .unwrap_or(SPEED_OF_LIGHT * self.end_transmissivity / (2.0 * self.length))
    }

    pub fn decay_rate_overridden(&self) -> bool {
        self.decay_rate_override.is_some()
    }

    /// Mode spacing `omega_{n+1} - omega_n = pi c / L`.
    pub fn free_spectral_range(&self) -> f64 {
        PI * SPEED_OF_LIGHT / self.length
    }
}

/// A sub-cavity reference mode, identified by its angular frequency.
///
/// Built either from an integer mode number or from a laser wavelength; the
/// latter carries a continuous mode index, which is adequate for `n >> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    omega: f64,
    number: Option<i64>,
}

impl CavityMode {
    pub fn number(geom: &CavityGeometry, n: i64) -> Result<Self> {
        Ok(Self {
            omega: reference_frequency(geom, n)?,
            number: Some(n),
        })
    }

    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::param("wavelength", format!("must be positive, got {wavelength}")));
        }
        Ok(Self {
            omega: TWO_PI * SPEED_OF_LIGHT / wavelength,
            number: None,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mode_number(&self) -> Option<i64> {
        self.number
    }

    /// Continuous mode index `omega L / (pi c)`.
    pub fn index(&self, geom: &CavityGeometry) -> f64 {
        self.omega * geom.length() / (PI * SPEED_OF_LIGHT)
    }

    pub fn wavelength(&self) -> f64 {
        TWO_PI * SPEED_OF_LIGHT / self.omega
    }

    pub fn wavenumber(&self) -> f64 {
        self.omega / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Even,
    Odd,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Even => "even",
            Branch::Odd => "odd",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeBranchPoint {
    pub n: i64,
    pub branch: Branch,
    pub q: f64,
    pub omega: f64,
}

/// `omega_n = n pi c / L`.
pub fn reference_frequency(geom: &CavityGeometry, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidModeNumber(n));
    }
    Ok(n as f64 * PI * SPEED_OF_LIGHT / geom.length())
}

// sin(pi r / 2) and cos(pi r / 2), exact at integer r
pub(crate) fn sin_half_pi(r: f64) -> f64 {
    let mut r = r - 4.0 * (r / 4.0).round();
    if r > 1.0 {
        r = 2.0 - r;
    } else if r < -1.0 {
        r = -2.0 - r;
    }
    (FRAC_PI_2 * r).sin()
}

pub(crate) fn cos_half_pi(r: f64) -> f64 {
    let r = r - 4.0 * (r / 4.0).round();
    sin_half_pi(1.0 - r.abs())
}

/// Mirror position in units of quarter wavelengths, `4 q / lambda_n`.
/// Values within 1e-12 of an integer are snapped so the avoided-crossing
/// points are hit exactly.
pub(crate) fn quarter_waves(mode: &CavityMode, q: f64) -> f64 {
    let x = 4.0 * q / mode.wavelength();
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        r
    } else {
        x
    }
}

/// Phase angles of the closed-form branch expressions at phase `phi = pi x`.
///
/// `alpha = acos sqrt(1-T)`, `beta = acos(sqrt(1-T) cos phi)`. The two shifts
/// `beta - alpha >= 0` and `alpha + beta` are evaluated without cancellation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BranchAngles {
    pub even_shift: f64,
    pub odd_shift: f64,
    pub s: f64,
    pub sin_phi: f64,
    pub sin_beta: f64,
}

impl BranchAngles {
    pub fn new(t: f64, x: f64) -> Self {
        let s = (1.0 - t).sqrt();
        let alpha = t.sqrt().atan2(s);
        let sh = sin_half_pi(x);
        let ch = cos_half_pi(x);
        let (sh2, ch2) = (sh * sh, ch * ch);
        let cos_phi = cos_half_pi(2.0 * x);
        let sin_phi = sin_half_pi(2.0 * x);
        let base = t / (1.0 + s);
        let one_minus_u = base + 2.0 * s * sh2;
        let one_plus_u = base + 2.0 * s * ch2;
        let u = s * cos_phi;
        let beta = if u >= 0.5 {
            2.0 * (0.5 * one_minus_u).sqrt().asin()
        } else if u <= -0.5 {
            PI - 2.0 * (0.5 * one_plus_u).sqrt().asin()
        } else {
            u.acos()
        };
        // cos(alpha) - cos(beta) = 2 sin((a+b)/2) sin((b-a)/2)
        let (even_shift, odd_shift) = if cos_phi >= 0.0 {
            let den = (0.5 * (alpha + beta)).sin();
            let e = if den > 0.0 {
                2.0 * (s * sh2 / den).min(1.0).asin()
            } else {
                0.0
            };
            (e, 2.0 * alpha + e)
        } else {
            let beta_m = PI - beta;
            let den = (0.5 * (alpha + beta_m)).sin();
            let e = if den > 0.0 {
                2.0 * (s * ch2 / den).min(1.0).asin()
            } else {
                0.0
            };
            (PI - 2.0 * alpha - e, PI - e)
        };
        let sin_beta = (one_minus_u * one_plus_u).max(0.0).sqrt();
        Self {
            even_shift,
            odd_shift,
            s,
            sin_phi,
            sin_beta,
        }
    }
}

fn check_validity(mode: &CavityMode, q: f64) -> Result<()> {
    let lambda = mode.wavelength();
    if !q.is_finite() || q.abs() > lambda {
        return Err(Error::OutOfValidityRange { q, limit: lambda });
    }
    if q.abs() > 0.5 * lambda {
        log::warn!(
            "|q| = {:e} m exceeds lambda/2; the closed-form branches assume q << lambda",
            q.abs()
        );
    }
    Ok(())
}

/// Branch frequencies relative to `omega_n`: `(omega_e - omega_n, omega_o - omega_n)`.
///
/// Kept separate from [`branch_frequencies`] because the offsets are many
/// orders of magnitude below `omega_n` and lose precision once added to it.
pub fn branch_offsets(geom: &CavityGeometry, mode: &CavityMode, q: f64) -> Result<(f64, f64)> {
    check_validity(mode, q)?;
    let a = BranchAngles::new(geom.transmissivity(), quarter_waves(mode, q));
    let tau = geom.tau();
    Ok((-a.even_shift / tau, a.odd_shift / tau))
}

/// Closed-form even/odd branch frequencies `(omega_e, omega_o)`.
pub fn branch_frequencies(geom: &CavityGeometry, mode: &CavityMode, q: f64) -> Result<(f64, f64)> {
    let (de, d_o) = branch_offsets(geom, mode, q)?;
    Ok((mode.omega() + de, mode.omega() + d_o))
}

/// Sub-cavity frequencies of a perfectly reflecting middle mirror,
/// `n pi c / (L -/+ q)`, returned as `(longer cavity, shorter cavity)`.
pub fn opaque_mirror_frequencies(geom: &CavityGeometry, n: i64, q: f64) -> Result<(f64, f64)> {
    let w = reference_frequency(geom, n)?;
    let l = geom.length();
    if q.abs() >= l {
        return Err(Error::param("q", "must satisfy |q| < L"));
    }
    Ok((w * l / (l + q.abs()), w * l / (l - q.abs())))
}

// sqrt(T) sin 2kL - 2 sqrt(1-T) sin k(L+q) sin k(L-q), and its k-derivative.
// Equal to sqrt(T) sin a sin b (cot a + cot b - 2 sqrt((1-T)/T)).
fn regularised(k: f64, l: f64, q: f64, st: f64, s: f64) -> (f64, f64) {
    let (lp, lm) = (l + q, l - q);
    let (sa, ca) = (k * lp).sin_cos();
    let (sb, cb) = (k * lm).sin_cos();
    let (s2, c2) = (2.0 * k * l).sin_cos();
    let f = st * s2 - 2.0 * s * sa * sb;
    let df = 2.0 * l * st * c2 - 2.0 * s * (lp * ca * sb + lm * sa * cb);
    (f, df)
}

/// All roots `k` of `cot k(L+q) + cot k(L-q) = 2 sqrt((1-T)/T)` in `[k_lo, k_hi]`.
///
/// Each open interval between consecutive cotangent singularities holds
/// exactly one root; where singularities of both families coincide the
/// coincidence point is itself a mode (a node on the middle mirror).
pub fn exact_wavenumbers(geom: &CavityGeometry, q: f64, k_lo: f64, k_hi: f64) -> Result<Vec<f64>> {
    let t = geom.transmissivity();
    if t == 0.0 {
        return Err(Error::DegenerateEquation);
    }
    let l = geom.length();
    if !(q.abs() < l) {
        return Err(Error::param("q", format!("must satisfy |q| < L, got {q:e}")));
    }
    if !(k_lo > 0.0 && k_hi > k_lo && k_hi.is_finite()) {
        return Err(Error::param("k_window", format!("invalid interval [{k_lo}, {k_hi}]")));
    }
    let (st, s) = (t.sqrt(), (1.0 - t).sqrt());

    let mut poles = Vec::new();
    for len in [l + q, l - q] {
        let m_lo = (k_lo * len / PI).floor() as i64 - 1;
        let m_hi = (k_hi * len / PI).ceil() as i64 + 1;
        if m_hi - m_lo > 2_000_000 {
            return Err(Error::param("k_window", "spans too many modes"));
        }
        poles.extend((m_lo.max(0)..=m_hi).map(|m| m as f64 * PI / len));
    }
    poles.sort_by(f64::total_cmp);
    // merge coincident singularities of the two families
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(poles.len());
    for p in poles {
        match merged.last_mut() {
            Some((last, coincident)) if (p - *last).abs() <= 8.0 * f64::EPSILON * p.max(1.0) => {
                *coincident = true;
            }
            _ => merged.push((p, false)),
        }
    }

    let mut roots = Vec::new();
    for w in merged.windows(2) {
        let ((a, a_coinc), (b, _)) = (w[0], w[1]);
        if a_coinc && a > 0.0 {
            roots.push(a);
        }
        if b < k_lo || a > k_hi {
            continue;
        }
        // stay clear of the endpoints, where f is zero at coincident poles
        let nudge = 1e-9 * (b - a);
        let k = bracketed_newton(|k| regularised(k, l, q, st, s), a + nudge, b - nudge, 1e-12)?;
        roots.push(k);
    }
    roots.retain(|k| *k >= k_lo && *k <= k_hi);
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    if roots.is_empty() {
        return Err(Error::WindowTooNarrow { lo: k_lo, hi: k_hi });
    }
    Ok(roots)
}

/// Tabulates both branches for every `n` and `q`, ordered by `n`, then `q`,
/// then branch.
pub fn spectrum_sweep(geom: &CavityGeometry, n_list: &[i64], q_grid: &[f64]) -> Result<Vec<ModeBranchPoint>> {
    let mut out = Vec::with_capacity(2 * n_list.len() * q_grid.len());
    for &n in n_list {
        let mode = CavityMode::number(geom, n)?;
        let rows: Vec<[ModeBranchPoint; 2]> = q_grid
            .par_iter()
            .map(|&q| {
                let (we, wo) = branch_frequencies(geom, &mode, q)?;
                Ok([
                    ModeBranchPoint { n, branch: Branch::Even, q, omega: we },
                    ModeBranchPoint { n, branch: Branch::Odd, q, omega: wo },
                ])
            })
            .collect::<Result<_>>()?;
        out.extend(rows.into_iter().flatten());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(t: f64) -> CavityGeometry {
        CavityGeometry::new(5e-3, t, 1e-5).unwrap()
    }

    #[test]
    fn derived_times_are_exact() {
        let g = geom(0.1);
        assert_eq!(g.tau(), 2.0 * 5e-3 / SPEED_OF_LIGHT);
        assert_eq!(g.gamma(), SPEED_OF_LIGHT * 1e-5 / (2.0 * 5e-3));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(CavityGeometry::new(0.0, 0.1, 0.1).is_err());
        assert!(CavityGeometry::new(1e-3, 1.1, 0.1).is_err());
        assert!(CavityGeometry::new(1e-3, 0.1, -0.1).is_err());
    }

    #[test]
    fn reference_frequency_order_of_table() {
        let w = reference_frequency(&geom(1e-4), 10_000).unwrap();
        let f = w / TWO_PI;
        assert!((f / 3.0e14 - 1.0).abs() < 1e-3, "{f}");
        assert_eq!(reference_frequency(&geom(0.1), 1).unwrap(), PI * SPEED_OF_LIGHT / 5e-3);
        assert_eq!(reference_frequency(&geom(0.1), 0), Err(Error::InvalidModeNumber(0)));
        // lambda_n = 2L/n
        let m = CavityMode::number(&geom(0.1), 10_000).unwrap();
        assert!((m.wavelength() / 1e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_pi_trig_exact_at_integers() {
        for k in -8..=8 {
            let r = k as f64;
            let (s, c) = (FRAC_PI_2 * r).sin_cos();
            assert_eq!(sin_half_pi(r), s.round());
            assert_eq!(cos_half_pi(r), c.round());
        }
        for r in [0.1, 0.7, 1.3, -2.6, 3.9] {
            assert!((sin_half_pi(r) - (FRAC_PI_2 * r).sin()).abs() < 1e-15);
            assert!((cos_half_pi(r) - (FRAC_PI_2 * r).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn opaque_doublet_degenerate_at_origin() {
        let g = geom(0.0);
        let m = CavityMode::number(&g, 10_000).unwrap();
        let (we, wo) = branch_frequencies(&g, &m, 0.0).unwrap();
        assert_eq!(we, m.omega());
        assert_eq!(wo, m.omega());
    }

    #[test]
    fn splitting_at_origin_matches_detuning() {
        let g = geom(1e-4);
        let m = CavityMode::number(&g, 10_000).unwrap();
        let (de, d_o) = branch_offsets(&g, &m, 0.0).unwrap();
        let gap = d_o - de;
        let expected = 2.0 / g.tau() * (1.0 - 1e-4f64).sqrt().acos();
        // acos near 1 is itself only good to ~1e-12
        assert!((gap / expected - 1.0).abs() < 1e-10);
        assert!((gap / 6.0e8 - 1.0).abs() < 0.01, "{gap}");
    }

    #[test]
    fn validity_bound() {
        let g = geom(0.1);
        let m = CavityMode::number(&g, 10_000).unwrap();
        let lam = m.wavelength();
        assert!(branch_offsets(&g, &m, 0.9 * lam).is_ok());
        assert!(matches!(
            branch_offsets(&g, &m, 1.1 * lam),
            Err(Error::OutOfValidityRange { .. })
        ));
    }

    #[test]
    fn arcsine_form_agrees() {
        // the printed arcsine expressions, in a regime where they are well conditioned
        let g = geom(0.3);
        let m = CavityMode::number(&g, 1000).unwrap();
        let s = (1.0f64 - 0.3).sqrt();
        for q in [0.03e-6, 0.5e-6, 1.7e-6, -2.2e-6] {
            let phi = 2.0 * m.wavenumber() * q;
            let u = s * phi.cos();
            let tau = g.tau();
            let we = (u.asin() - s.asin()) / tau;
            let wo = PI / tau - (u.asin() + s.asin()) / tau;
            let (de, d_o) = branch_offsets(&g, &m, q).unwrap();
            assert!((de - we).abs() < 1e-6 * (PI / tau), "{de} {we}");
            assert!((d_o - wo).abs() < 1e-6 * (PI / tau));
        }
    }

    #[test]
    fn regularised_derivative() {
        let (l, q, t) = (5e-3, 1.3e-7, 0.2f64);
        let (st, s) = (t.sqrt(), (1.0 - t).sqrt());
        let k = 6.3e6;
        let h = 1e-3;
        let fd = (regularised(k + h, l, q, st, s).0 - regularised(k - h, l, q, st, s).0) / (2.0 * h);
        let an = regularised(k, l, q, st, s).1;
        assert!((fd / an - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_roots_full_resonator_limit() {
        // middle mirror removed: modes of the 2L resonator, spacing pi/(2L)
        let g = geom(1.0);
        let l = g.length();
        let k0 = 10_000.0 * PI / l;
        let ks = exact_wavenumbers(&g, 0.0, k0 - 2.2 * PI / l, k0 + 2.2 * PI / l).unwrap();
        assert_eq!(ks.len(), 9);
        for (i, k) in ks.iter().enumerate() {
            let expected = (9998.0 + 0.5 * i as f64) * PI / l;
            assert!((k / expected - 1.0).abs() < 2e-12, "{k} vs {expected}");
        }
    }

    #[test]
    fn exact_roots_errors() {
        let g = geom(0.0);
        assert_eq!(exact_wavenumbers(&g, 0.0, 1.0, 2.0), Err(Error::DegenerateEquation));
        let g = geom(0.5);
        assert!(exact_wavenumbers(&g, 0.0, 2.0, 1.0).is_err());
        let k0 = 1000.0 * PI / g.length();
        assert!(matches!(
            exact_wavenumbers(&g, 1e-7, k0 + 1e-6, k0 + 2e-6),
            Err(Error::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn sweep_row_count_and_order() {
        let g = geom(0.2);
        let qs: Vec<f64> = (0..11).map(|i| i as f64 * 1e-8).collect();
        let rows = spectrum_sweep(&g, &[9_999, 10_000], &qs).unwrap();
        assert_eq!(rows.len(), 2 * 11 * 2);
        assert_eq!(rows[0].branch, Branch::Even);
        assert_eq!(rows[1].branch, Branch::Odd);
        assert_eq!(rows[22].n, 10_000);
    }
}
