//! Bracketed root finding: bisection to localise, Newton to polish.

use crate::error::{Error, Result};

/// Finds the single root of `f` in `[lo, hi]`, where `f` returns `(value, derivative)`.
///
/// The bracket must straddle a sign change. Iteration alternates between a
/// Newton step (accepted only if it stays inside the current bracket and
/// shrinks the residual fast enough) and bisection, so it converges for any
/// continuous `f` and quadratically near a simple root. Terminates when the
/// bracket or the last step is below `rel_tol * |x|`.
pub fn bracketed_newton<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::WindowTooNarrow { lo: a, hi: b });
    }
    // orient so that f(a) < 0 < f(b)
    let flipped = fa > 0.0;
    let mut x = 0.5 * (a + b);
    let mut last_step = b - a;
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        let fx = if flipped { -fx } else { fx };
        let dfx = if flipped { -dfx } else { dfx };
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let tol = rel_tol * x.abs().max(f64::MIN_POSITIVE);
        if b - a <= tol {
            return Ok(0.5 * (a + b));
        }
        let newton = if dfx != 0.0 { x - fx / dfx } else { f64::NAN };
        let step = if newton.is_finite() && newton > a && newton < b && (newton - x).abs() < 0.5 * last_step {
            let s = newton - x;
            x = newton;
            s
        } else {
            let mid = 0.5 * (a + b);
            let s = mid - x;
            x = mid;
            s
        };
        last_step = step.abs();
        if last_step <= tol {
            return Ok(x);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bracketed_newton(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn survives_bad_derivative() {
        // derivative deliberately wrong by a large factor: bisection must take over
        let r = bracketed_newton(|x| (x.powi(3) - 0.3, 1e-6), -1.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.3f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbracketed() {
        let e = bracketed_newton(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12);
        assert!(matches!(e, Err(Error::WindowTooNarrow { .. })));
    }

    #[test]
    fn decreasing_function() {
        let r = bracketed_newton(|x| (1.0 - x, -1.0), 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }
}
