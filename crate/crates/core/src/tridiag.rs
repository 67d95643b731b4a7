//! Symmetric tridiagonal eigenproblems: Sturm counts, bisection and inverse
//! iteration.

use crate::error::{Error, Result};

/// A real symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len().max(1));
        Self { d, e }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - left - right);
            hi = hi.max(self.d[i] + left + right);
        }
        (lo, hi)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.e[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.e[i].abs() } else { 0.0 };
                self.d[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `sigma`, from the inertia of the
    /// LDLᵀ factorization of `T - sigma I`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let off = if i > 0 { self.e[i - 1] * self.e[i - 1] / q } else { 0.0 };
            q = self.d[i] - sigma - off;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (1-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        assert!(j >= 1 && j <= self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (hi - lo).abs().max(hi.abs()).max(1e-300);
        lo -= pad;
        hi += pad;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) >= j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.d[i] * x[i];
            if i > 0 {
                s += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.e[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Solves `(T - sigma I) x = b` in place by Gaussian elimination with
    /// partial pivoting. Exact zero pivots are perturbed, which is what inverse
    /// iteration wants.
    pub fn shifted_solve(&self, sigma: f64, b: &mut [f64]) {
        let n = self.len();
        if n == 0 {
            return;
        }
        let eps = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        // Row i of U holds u0[i] (diagonal), u1[i], u2[i] (two superdiagonals).
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut piv_swap = vec![false; n];
        let mut mult = vec![0.0; n];
        // Current working row i: (a, b, c) at columns (i, i+1, i+2).
        let mut a = self.d[0] - sigma;
        let mut bb = if n > 1 { self.e[0] } else { 0.0 };
        let mut cc = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a == 0.0 { eps } else { a };
                break;
            }
            let sub = self.e[i];
            let next_d = self.d[i + 1] - sigma;
            let next_e = if i + 2 < n { self.e[i + 1] } else { 0.0 };
            if a.abs() >= sub.abs() {
                let piv = if a == 0.0 { eps } else { a };
                let m = sub / piv;
                u0[i] = piv;
                u1[i] = bb;
                u2[i] = cc;
                mult[i] = m;
                a = next_d - m * bb;
                bb = next_e - m * cc;
                cc = 0.0;
            } else {
                let m = a / sub;
                u0[i] = sub;
                u1[i] = next_d;
                u2[i] = next_e;
                piv_swap[i] = true;
                mult[i] = m;
                a = bb - m * next_d;
                bb = cc - m * next_e;
                cc = 0.0;
            }
        }
        // Forward substitution with the recorded row operations.
        for i in 0..n - 1 {
            if piv_swap[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= mult[i] * b[i];
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * b[i + 2];
            }
            b[i] = s / u0[i];
        }
    }

    /// Eigenvector for an eigenvalue estimate `lambda` by inverse iteration,
    /// made orthogonal to each vector in `against` (assumed orthonormal).
    pub fn eigenvector(&self, lambda: f64, against: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.len();
        // Deterministic, non-symmetric start vector.
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 104729) as f64 * 1e-6).collect();
        let mut y = vec![0.0; n];
        let mut residual = f64::INFINITY;
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for _ in 0..8 {
            orthogonalize(&mut x, against);
            normalize(&mut x);
            self.shifted_solve(lambda, &mut x);
            orthogonalize(&mut x, against);
            normalize(&mut x);
            self.matvec(&x, &mut y);
            let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            residual = y
                .iter()
                .zip(&x)
                .map(|(yi, xi)| (yi - rq * xi).powi(2))
                .sum::<f64>()
                .sqrt()
                / scale;
            if residual < 1e-13 {
                return Ok(x);
            }
        }
        if residual < 1e-9 {
            return Ok(x);
        }
        Err(Error::Convergence {
            what: "tridiagonal inverse iteration".into(),
            residual,
        })
    }
}

fn orthogonalize(x: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in against {
            let c: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= c * qi;
            }
        }
    }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}
