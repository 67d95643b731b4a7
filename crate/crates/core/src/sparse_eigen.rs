//! Smallest eigenpairs of sparse symmetric positive definite matrices.
//!
//! The matrix is factored once (sparse Cholesky); a block Krylov basis in
//! `A⁻¹` is grown with full reorthogonalization and Rayleigh–Ritz extraction,
//! restarting thickly from the best Ritz vectors when the basis gets large.
//! Small problems go straight to a dense symmetric eigensolver.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const DENSE_LIMIT: usize = 400;
const MAX_ITERATIONS: usize = 300;

/// A sparse SPD matrix stored by its lower triangle, with its Cholesky factor.
pub struct SpdMatrix {
    n: usize,
    /// Lower-triangle entries `(row, col, value)`, `row ≥ col`.
    lower: Vec<(usize, usize, f64)>,
    llt: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdMatrix")
            .field("n", &self.n)
            .field("nnz_lower", &self.lower.len())
            .finish()
    }
}

impl SpdMatrix {
    /// Builds and factors the matrix from lower-triangle entries; duplicates
    /// are summed. Fails with a consistency error if the matrix is not
    /// positive definite.
    pub fn new(n: usize, lower: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Degenerate("empty matrix".into()));
        }
        if let Some(bad) = lower.iter().find(|(r, c, _)| r < c || *r >= n) {
            return Err(Error::usage(format!("entry {:?} is not in the lower triangle", (bad.0, bad.1))));
        }
        let triplets: Vec<Triplet<usize, usize, f64>> =
            lower.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::usage(format!("sparse assembly failed: {e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|_| Error::Consistency("matrix is not positive definite".into()))?;
        Ok(Self {
            n,
            lower,
            llt: Some(llt),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in &self.lower {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }

    fn solve_unrefined(&self, cols: &mut [Vec<f64>]) {
        if cols.is_empty() {
            return;
        }
        let llt = self.llt.as_ref().expect("factored");
        let mut b = columns(cols);
        llt.solve_in_place(b.as_mut());
        for (j, col) in cols.iter_mut().enumerate() {
            col.copy_from_slice(b.col(j).try_as_col_major().unwrap().as_slice());
        }
    }

    /// Solves `A x = b` for each column in place, with one step of iterative
    /// refinement.
    pub fn solve_many(&self, cols: &mut [Vec<f64>]) {
        if cols.is_empty() {
            return;
        }
        let llt = self.llt.as_ref().expect("factored");
        let n = self.n;
        let rhs: Vec<Vec<f64>> = cols.to_vec();
        self.solve_unrefined(cols);
        // Refinement: x += A⁻¹ (b - A x).
        let mut ax = vec![0.0; n];
        let mut res = Mat::<f64>::zeros(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            self.matvec(col, &mut ax);
            for i in 0..n {
                res[(i, j)] = rhs[j][i] - ax[i];
            }
        }
        llt.solve_in_place(res.as_mut());
        for (j, col) in cols.iter_mut().enumerate() {
            for i in 0..n {
                col[i] += res[(i, j)];
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut cols = vec![b.to_vec()];
        self.solve_many(&mut cols);
        cols.pop().unwrap()
    }

    fn dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for &(r, c, v) in &self.lower {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }
}

/// Eigenpairs in ascending order; vectors are Euclidean-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals `‖A x - θ x‖ / (θ ‖x‖)`.
    pub residuals: Vec<f64>,
}

fn columns(vs: &[Vec<f64>]) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(vs[0].len(), vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.col_mut(j).try_as_col_major_mut().unwrap().as_slice_mut().copy_from_slice(v);
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// The `k` smallest eigenpairs of `a` to relative residual `tol`.
pub fn smallest_eigenpairs(a: &SpdMatrix, k: usize, tol: f64, seed: u64) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::usage(format!("cannot compute {k} eigenpairs of a {n}x{n} matrix")));
    }
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    if n <= DENSE_LIMIT {
        return dense_eigenpairs(a, k);
    }
    let block = (k + 2).min(n);
    let max_basis = (12 * block).max(40).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut proj: Vec<Vec<f64>> = Vec::new();
    let mut next: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut best_residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        a.solve_unrefined(&mut next);
        let before: Vec<f64> = next.iter().map(|z| norm(z)).collect();
        let old = (!basis.is_empty()).then(|| columns(&basis));
        let mut z = columns(&next);
        if let Some(v) = &old {
            // Block classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                let c = v.transpose() * &z;
                z -= v * &c;
            }
        }
        let mut fresh: Vec<Vec<f64>> = Vec::with_capacity(next.len());
        for (j, &b) in before.iter().enumerate() {
            let mut x = z.col(j).try_as_col_major().unwrap().as_slice().to_vec();
            for _ in 0..2 {
                for q in &fresh {
                    let c = dot(&x, q);
                    axpy(-c, q, &mut x);
                }
            }
            let after = norm(&x);
            if after > 1e-10 * b {
                x.iter_mut().for_each(|v| *v /= after);
                fresh.push(x);
            }
        }
        let added = fresh.len();
        if added > 0 {
            let fresh_images: Vec<Vec<f64>> = fresh
                .iter()
                .map(|x| {
                    let mut ax = vec![0.0; n];
                    a.matvec(x, &mut ax);
                    ax
                })
                .collect();
            let az = columns(&fresh_images);
            let cross = old.as_ref().map(|v| v.transpose() * &az);
            let inner = columns(&fresh).transpose() * &az;
            let m0 = basis.len();
            for (i, row) in proj.iter_mut().enumerate() {
                let c = cross.as_ref().unwrap();
                row.extend((0..added).map(|j| c[(i, j)]));
            }
            for j in 0..added {
                let mut row: Vec<f64> = (0..m0).map(|i| cross.as_ref().unwrap()[(i, j)]).collect();
                row.extend((0..added).map(|l| inner[(j, l)]));
                proj.push(row);
            }
            basis.extend(fresh);
            images.extend(fresh_images);
        }
        let m = basis.len();
        if added == 0 && m < k {
            return Err(Error::Convergence {
                what: "block Krylov eigensolver (basis breakdown)".into(),
                residual: best_residual,
            });
        }
        let t = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (proj[i][j] + proj[j][i]));
        let eig = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::Convergence {
                what: "projected eigenproblem".into(),
                residual: f64::NAN,
            })?;
        let theta: Vec<f64> = (0..m).map(|i| eig.S()[i]).collect();
        let y = eig.U();
        let restart = m + block > max_basis;
        let keep = if restart { m.min(2 * block) } else { m.min(block) };
        let y_keep = y.subcols(0, keep);
        let xs = columns(&basis) * y_keep;
        let axs = columns(&images) * y_keep;
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        let mut residuals = Vec::with_capacity(keep);
        let mut residual_vectors = Vec::with_capacity(keep);
        for (i, &t) in theta.iter().enumerate().take(keep) {
            let x = xs.col(i).try_as_col_major().unwrap().as_slice().to_vec();
            let ax = axs.col(i).try_as_col_major().unwrap().as_slice().to_vec();
            let mut r = ax.clone();
            axpy(-t, &x, &mut r);
            residuals.push(norm(&r) / (t.abs() * norm(&x)));
            residual_vectors.push(r);
            ritz.push(x);
            ritz_images.push(ax);
        }
        let worst = residuals[..k].iter().cloned().fold(0.0, f64::max);
        best_residual = best_residual.min(worst);
        if worst <= tol && m >= k {
            let vectors: Vec<Vec<f64>> = ritz
                .into_iter()
                .take(k)
                .map(|mut x| {
                    let s = norm(&x);
                    x.iter_mut().for_each(|v| *v /= s);
                    x
                })
                .collect();
            return Ok(EigenPairs {
                values: theta[..k].to_vec(),
                vectors,
                residuals: residuals[..k].to_vec(),
            });
        }
        // Expanding with A⁻¹ r rather than A⁻¹ x spans the same block Krylov
        // space but keeps full relative precision once r is small.
        next = residual_vectors
            .into_iter()
            .zip(&residuals)
            .take(block.min(keep))
            .filter(|(_, &res)| res > 0.1 * tol)
            .map(|(r, _)| r)
            .collect();
        if next.is_empty() {
            return Err(Error::Convergence {
                what: "block Krylov eigensolver (no expansion directions)".into(),
                residual: best_residual,
            });
        }
        if restart {
            basis = ritz;
            images = ritz_images;
            proj = (0..keep)
                .map(|i| (0..keep).map(|j| if i == j { theta[i] } else { 0.0 }).collect())
                .collect();
        }
    }
    Err(Error::Convergence {
        what: "block Krylov eigensolver".into(),
        residual: best_residual,
    })
}

fn dense_eigenpairs(a: &SpdMatrix, k: usize) -> Result<EigenPairs> {
    let n = a.dim();
    let m = a.dense();
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Convergence {
        what: "dense symmetric eigensolver".into(),
        residual: f64::NAN,
    })?;
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut ax = vec![0.0; n];
    for i in 0..k {
        let theta = eig.S()[i];
        let x: Vec<f64> = (0..n).map(|r| eig.U()[(r, i)]).collect();
        a.matvec(&x, &mut ax);
        let mut r = ax.clone();
        axpy(-theta, &x, &mut r);
        residuals.push(norm(&r) / (theta.abs() * norm(&x)));
        values.push(theta);
        vectors.push(x);
    }
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Dirichlet 5-point Laplacian on an m×m grid of the unit square.
    fn laplacian(m: usize) -> SpdMatrix {
        let h = 1.0 / (m + 1) as f64;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let p = j * m + i;
                t.push((p, p, 4.0 / (h * h)));
                if i + 1 < m {
                    t.push((p + 1, p, -1.0 / (h * h)));
                }
                if j + 1 < m {
                    t.push((p + m, p, -1.0 / (h * h)));
                }
            }
        }
        SpdMatrix::new(m * m, t).unwrap()
    }

    fn exact(m: usize, count: usize) -> Vec<f64> {
        let h = 1.0 / (m + 1) as f64;
        let one = |i: usize| 4.0 / (h * h) * (i as f64 * PI * h / 2.0).sin().powi(2);
        let mut all: Vec<f64> = (1..=m).flat_map(|i| (1..=m).map(move |j| one(i) + one(j))).collect();
        all.sort_by(f64::total_cmp);
        all.truncate(count);
        all
    }

    #[test]
    fn krylov_matches_closed_form_with_degeneracies() {
        let m = 60;
        let a = laplacian(m);
        let got = smallest_eigenpairs(&a, 6, 1e-10, 1).unwrap();
        for (g, e) in got.values.iter().zip(exact(m, 6)) {
            assert!(((g - e) / e).abs() < 1e-11, "{g} vs {e}");
        }
        for i in 0..6 {
            for j in 0..6 {
                let d = dot(&got.vectors[i], &got.vectors[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dense_path_matches_closed_form() {
        let m = 15;
        let got = smallest_eigenpairs(&laplacian(m), 4, 1e-10, 1).unwrap();
        for (g, e) in got.values.iter().zip(exact(m, 4)) {
            assert!(((g - e) / e).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_inverts() {
        let a = laplacian(30);
        let x: Vec<f64> = (0..900).map(|i| (i as f64 * 0.1).cos()).collect();
        let mut b = vec![0.0; 900];
        a.matvec(&x, &mut b);
        let back = a.solve(&b);
        for (p, q) in back.iter().zip(&x) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let t = vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)];
        assert!(matches!(SpdMatrix::new(2, t), Err(Error::Consistency(_))));
    }
}
