use std::f64::consts::PI;

use proptest::prelude::*;
use trimirror::constants::SPEED_OF_LIGHT;
use trimirror::modespectrum::*;
use trimirror::Error;

const L: f64 = 5e-3;

fn geom(t: f64) -> CavityGeometry {
    CavityGeometry::new(L, t, 1e-5).unwrap()
}

/// Largest relative distance between a closed-form branch frequency and the
/// nearest exact root of the transcendental mode equation.
fn closed_form_error(t: f64, n: i64, q: f64) -> f64 {
    let g = geom(t);
    let m = CavityMode::number(&g, n).unwrap();
    let k_n = m.wavenumber();
    let roots = exact_wavenumbers(&g, q, k_n - PI / L, k_n + PI / L).unwrap();
    let (we, wo) = branch_frequencies(&g, &m, q).unwrap();
    [we, wo]
        .iter()
        .map(|w| {
            roots
                .iter()
                .map(|k| (SPEED_OF_LIGHT * k - w).abs() / w)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn closed_form_matches_exact_roots_near_quarter_waves() {
    for t in [1e-5, 1e-4, 1e-2, 0.2, 0.5] {
        let g = geom(t);
        let lam = CavityMode::number(&g, 10_000).unwrap().wavelength();
        for i in -10..=10 {
            let q = i as f64 * lam / 40.0;
            let err = closed_form_error(t, 10_000, q);
            assert!(err < 1e-5, "T={t} q={q:e}: {err:e}");
        }
    }
}

#[test]
fn closed_form_exact_at_lambda_over_eight() {
    // two roots per doublet, splitting consistent with the closed form
    let g = geom(1e-4);
    let m = CavityMode::number(&g, 10_000).unwrap();
    let q = m.wavelength() / 8.0;
    let k_n = m.wavenumber();
    let half = 0.5 * PI / L;
    let roots = exact_wavenumbers(&g, q, k_n - 0.999 * half, k_n + 0.999 * half).unwrap();
    assert_eq!(roots.len(), 2);
    let (we, wo) = branch_frequencies(&g, &m, q).unwrap();
    assert!((SPEED_OF_LIGHT * roots[0] / we - 1.0).abs() < 1e-6);
    assert!((SPEED_OF_LIGHT * roots[1] / wo - 1.0).abs() < 1e-6);
    let exact_split = SPEED_OF_LIGHT * (roots[1] - roots[0]);
    assert!((exact_split / (wo - we) - 1.0).abs() < 1e-6);
}

#[test]
fn smaller_mode_numbers_still_agree() {
    for q in [-0.2e-6, 0.1e-6, 0.45e-6] {
        assert!(closed_form_error(0.1, 1000, q * 10.0) < 1e-5);
    }
}

#[test]
fn opaque_limit_is_see_saw() {
    let g = geom(0.0);
    let m = CavityMode::number(&g, 10_000).unwrap();
    let w = m.omega();
    // the closed form is periodic in q, the sub-cavity lines are not: they
    // coincide up to |q| = lambda/4 (|q|/L = 5e-5 here)
    for i in -25..=25 {
        let q = i as f64 * 1e-8;
        let (we, wo) = branch_frequencies(&g, &m, q).unwrap();
        let (lo, hi) = (w * (1.0 - q.abs() / L), w * (1.0 + q.abs() / L));
        assert!((we - lo).abs() <= 2.0 * f64::EPSILON * w, "q={q}: {we} vs {lo}");
        assert!((wo - hi).abs() <= 2.0 * f64::EPSILON * w);
        // against the sub-cavity formula n pi c/(L +/- q), to first order
        let (long, short) = opaque_mirror_frequencies(&g, 10_000, q).unwrap();
        assert!((we - long).abs() / w < 2.0 * (q / L).powi(2) + 1e-15);
        assert!((wo - short).abs() / w < 2.0 * (q / L).powi(2) + 1e-15);
    }
}

#[test]
fn splitting_extremes_at_quarter_waves() {
    let g = geom(0.05);
    let m = CavityMode::number(&g, 10_000).unwrap();
    let lam = m.wavelength();
    let gap = |q: f64| {
        let (de, d_o) = branch_offsets(&g, &m, q).unwrap();
        d_o - de
    };
    // q = 0: minimum gap, q = lambda/4: maximum (of the n doublet)
    let g0 = gap(0.0);
    let g1 = gap(lam / 4.0);
    for i in 1..50 {
        let gq = gap(i as f64 * lam / 200.0);
        assert!(gq > g0 && gq < g1);
    }
}

#[test]
fn sweep_reversed_grid_same_rows() {
    let g = geom(0.2);
    let lam = CavityMode::number(&g, 10_000).unwrap().wavelength();
    let qs: Vec<f64> = (0..21).map(|i| -lam / 4.0 + i as f64 * lam / 40.0).collect();
    let rev: Vec<f64> = qs.iter().rev().copied().collect();
    let a = spectrum_sweep(&g, &[10_000], &qs).unwrap();
    let mut b = spectrum_sweep(&g, &[10_000], &rev).unwrap();
    b.sort_by(|x, y| x.q.total_cmp(&y.q).then(x.branch.cmp(&y.branch)));
    assert_eq!(a, b);
}

#[test]
fn mode_number_errors() {
    let g = geom(0.1);
    assert_eq!(CavityMode::number(&g, -3).unwrap_err(), Error::InvalidModeNumber(-3));
}

fn offsets(t: f64, q_frac: f64) -> (f64, f64, f64) {
    let g = geom(t);
    let m = CavityMode::number(&g, 10_000).unwrap();
    let (de, d_o) = branch_offsets(&g, &m, q_frac * m.wavelength()).unwrap();
    (de, d_o, PI / g.tau())
}

proptest! {
    #[test]
    fn even_below_odd_above(t in 0.0f64..=1.0, qf in -1.0f64..1.0) {
        let (de, d_o, _) = offsets(t, qf);
        prop_assert!(de <= 0.0);
        prop_assert!(d_o >= de);
        prop_assert!(d_o >= 0.0);
    }

    #[test]
    fn even_in_q(t in 0.0f64..=1.0, qf in 0.0f64..1.0) {
        let (a, b, scale) = offsets(t, qf);
        let (c, d, _) = offsets(t, -qf);
        prop_assert!((a - c).abs() <= 1e-13 * scale);
        prop_assert!((b - d).abs() <= 1e-13 * scale);
    }

    #[test]
    fn half_wavelength_period(t in 1e-6f64..=1.0, qf in -0.5f64..0.5) {
        let (a, b, scale) = offsets(t, qf);
        let (c, d, _) = offsets(t, qf + 0.5);
        prop_assert!((a - c).abs() <= 1e-9 * scale);
        prop_assert!((b - d).abs() <= 1e-9 * scale);
    }

    #[test]
    fn doublet_stays_inside_half_fsr(t in 0.0f64..=1.0, qf in -1.0f64..1.0) {
        let (de, d_o, half_fsr) = offsets(t, qf);
        prop_assert!(de >= -half_fsr * (1.0 + 1e-15));
        prop_assert!(d_o <= half_fsr * (1.0 + 1e-15));
    }

    #[test]
    fn random_points_match_exact(t in 1e-5f64..0.5, qf in -0.25f64..0.25) {
        let g = geom(t);
        let lam = CavityMode::number(&g, 10_000).unwrap().wavelength();
        prop_assert!(closed_form_error(t, 10_000, qf * lam) < 1e-5);
    }
}
