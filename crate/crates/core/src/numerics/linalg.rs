//! Small dense linear-algebra helpers for drift matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Diagonal similarity `B = D^-1 A D` with power-of-two entries in `D`
/// that equalises row and column norms.
#[derive(Debug, Clone)]
pub struct Balanced {
    pub matrix: DMatrix<f64>,
    pub scale: Vec<f64>,
}

impl Balanced {
    pub fn new(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "balancing needs a square matrix");
        let n = a.nrows();
        let mut m = a.clone();
        let mut scale = vec![1.0; n];
        const RADIX: f64 = 2.0;
        let mut done = false;
        let mut sweeps = 0;
        while !done && sweeps < 200 {
            done = true;
            sweeps += 1;
            for i in 0..n {
                let mut c = 0.0;
                let mut r = 0.0;
                for j in 0..n {
                    if j != i {
                        c += m[(j, i)].abs();
                        r += m[(i, j)].abs();
                    }
                }
                if c == 0.0 || r == 0.0 {
                    continue;
                }
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= RADIX * RADIX;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= RADIX * RADIX;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    scale[i] *= f;
                    for j in 0..n {
                        m[(i, j)] /= f;
                        m[(j, i)] *= f;
                    }
                }
            }
        }
        Self { matrix: m, scale }
    }

    /// Transforms a symmetric second-moment matrix into balanced coordinates.
    pub fn covariance_to_balanced(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] / (self.scale[i] * self.scale[j]))
    }

    pub fn covariance_from_balanced(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * self.scale[i] * self.scale[j])
    }
}

/// Eigenvalues of a real square matrix, computed on its balanced form.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    let b = Balanced::new(a);
    b.matrix
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect()
}

/// Characteristic polynomial `det(sI - A)` as descending coefficients
/// `[1, c1, ..., cn]` (Faddeev-LeVerrier).
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        let prev = coeffs[k - 1];
        mk = a * &mk;
        for i in 0..n {
            mk[(i, i)] += prev;
        }
        let am = a * &mk;
        coeffs.push(-am.trace() / k as f64);
    }
    coeffs
}

/// Routh-Hurwitz test: true iff every root of the polynomial (descending
/// coefficients, leading coefficient nonzero) has strictly negative real part.
pub fn routh_hurwitz(coeffs: &[f64]) -> bool {
    let n = coeffs.len() - 1;
    if n == 0 {
        return true;
    }
    let lead = coeffs[0];
    if lead == 0.0 {
        return false;
    }
    // normalise: monic, and roots rescaled to unit magnitude on average
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = monic[n].abs().powf(1.0 / n as f64);
    let sigma = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    let scaled: Vec<f64> = monic
        .iter()
        .enumerate()
        .map(|(k, c)| c / sigma.powi(k as i32))
        .collect();
    if scaled.iter().any(|&c| c <= 0.0) {
        return false;
    }
    let width = n / 2 + 1;
    let mut prev: Vec<f64> = (0..width).map(|j| *scaled.get(2 * j).unwrap_or(&0.0)).collect();
    let mut cur: Vec<f64> = (0..width).map(|j| *scaled.get(2 * j + 1).unwrap_or(&0.0)).collect();
    for _ in 1..n {
        if cur[0] <= 0.0 {
            return false;
        }
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let p1 = prev.get(j + 1).copied().unwrap_or(0.0);
                let c1 = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * p1 - prev[0] * c1) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    cur[0] > 0.0
}

/// Stationary covariance `S` solving `A S + S A^T + Q = 0`.
///
/// Returns `None` if the Kronecker system is singular (A has eigenvalues
/// summing to zero, e.g. a marginal mode).
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let bal = Balanced::new(a);
    let ab = &bal.matrix;
    let qb = bal.covariance_to_balanced(q);
    let n = a.nrows();
    let nn = n * n;
    let mut k = DMatrix::<f64>::zeros(nn, nn);
    // vec(A S + S A^T) = (I kron A + A kron I) vec(S), column-major vec
    for i in 0..n {
        for j in 0..n {
            let row = i + j * n;
            for l in 0..n {
                k[(row, l + j * n)] += ab[(i, l)];
                k[(row, i + l * n)] += ab[(j, l)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, (0..nn).map(|idx| -qb[(idx % n, idx / n)]));
    let sol = k.lu().solve(&rhs)?;
    let sb = DMatrix::from_fn(n, n, |i, j| 0.5 * (sol[i + j * n] + sol[j + i * n]));
    Some(bal.covariance_from_balanced(&sb))
}

/// Exact one-step discretisation of `du = A u dt + dW`, `E[dW dW^T] = Q dt`:
/// returns `(exp(A h), integral_0^h exp(A s) Q exp(A^T s) ds)` via Van Loan's block exponential.
pub fn van_loan(a: &DMatrix<f64>, q: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut c = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = -a[(i, j)] * h;
            c[(i, j + n)] = q[(i, j)] * h;
            c[(i + n, j + n)] = a[(j, i)] * h;
        }
    }
    let e = c.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let e12 = e.view((0, n), (n, n)).into_owned();
    let mut sigma = &phi * e12;
    sigma = 0.5 * (&sigma + sigma.transpose());
    (phi, sigma)
}

/// A factor `L` with `L L^T = S` for a symmetric positive semidefinite `S`.
pub fn psd_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = s.clone().cholesky() {
        return ch.l();
    }
    let eig = s.clone().symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let r = lam.max(0.0).sqrt();
        for i in 0..l.nrows() {
            l[(i, j)] *= r;
        }
    }
    l
}
