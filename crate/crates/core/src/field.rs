//! Eigenpairs, torsion and comparison-principle checks on rasterized planar
//! domains, discretized in oscillator form.
//!
//! With `v = u e^{|x|²/4}` the drift operator `L` becomes `-Δ + |x|²/4 + 1` in
//! the plane. Its 5-point discretization `K` on the active cells (zero on
//! inactive cells) is a symmetric M-matrix with eigenvalues `λ_j` directly, so
//! one Cholesky factorization serves eigenpairs, torsion and every `Lψ = f`
//! solve.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{Spectrum, SpectrumEntry};
use crate::raster::RasterDomain;
use crate::rearrange::GridFunction;
use crate::shapeopt::BallFamilyConfig;
use crate::sparse_eigen::{smallest_eigenpairs, SpdMatrix};

pub const DEFAULT_TOL: f64 = 1e-9;
const EIGEN_SEED: u64 = 0x5eed;
pub const TORSION_TOL: f64 = 1e-10;

/// Active-cell neighbour table: for each active cell, the active indices of
/// its east and north neighbours (if active).
struct Stencil {
    centers: Vec<(f64, f64)>,
    east: Vec<Option<usize>>,
    north: Vec<Option<usize>>,
}

impl Stencil {
    fn new(d: &RasterDomain) -> Self {
        let cells = d.active_cells();
        let mut index = vec![usize::MAX; d.mask.len()];
        for (a, &c) in cells.iter().enumerate() {
            index[c] = a;
        }
        let lookup = |c: usize| (index[c] != usize::MAX).then_some(index[c]);
        let mut east = Vec::with_capacity(cells.len());
        let mut north = Vec::with_capacity(cells.len());
        for &c in &cells {
            let (i, j) = (c % d.nx, c / d.nx);
            east.push(if i + 1 < d.nx { lookup(c + 1) } else { None });
            north.push(if j + 1 < d.ny { lookup(c + d.nx) } else { None });
        }
        Self {
            centers: d.active_centers(),
            east,
            north,
        }
    }
}

/// Lower triangle of `K = -Δ_h + |x|²/4 + 1` on the active cells.
fn oscillator_matrix(d: &RasterDomain, st: &Stencil) -> Vec<(usize, usize, f64)> {
    let inv_h2 = 1.0 / (d.h * d.h);
    let mut t = Vec::with_capacity(3 * st.centers.len());
    for (p, &(x, y)) in st.centers.iter().enumerate() {
        t.push((p, p, 4.0 * inv_h2 + 0.25 * (x * x + y * y) + 1.0));
        for q in [st.east[p], st.north[p]].into_iter().flatten() {
            t.push((q, p, -inv_h2));
        }
    }
    t
}

/// Eigenvalues and m_N-orthonormal eigenfunctions (u-form) of a domain.
#[derive(Debug, Clone)]
pub struct FieldEigen {
    pub spectrum: Spectrum,
    pub eigenfunctions: Vec<GridFunction>,
}

impl FieldEigen {
    pub fn lambdas(&self) -> Vec<f64> {
        self.spectrum.expanded()
    }
}

/// Torsion function `w` solving `Lw = 1` with Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct TorsionField {
    pub w: GridFunction,
    /// Relative residual of the linear solve.
    pub residual: f64,
}

impl TorsionField {
    pub fn min(&self) -> f64 {
        self.w.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.w.sup_abs()
    }

    /// Cells where `w > 0`; on a connected raster this is every active cell.
    pub fn support_count(&self) -> usize {
        self.w.values.iter().filter(|&&v| v > 0.0).count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationEntry {
    pub j: usize,
    pub lambda: f64,
    pub sup_norm: f64,
    /// `max (|u_j| - λ_j ‖u_j‖_∞ w)` over the cells; nonpositive when the
    /// bound holds.
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub entries: Vec<DominationEntry>,
    pub tol: f64,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| e.max_violation <= self.tol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `min ψ / ‖ψ‖_∞` seen (0 when every ψ vanished).
    pub worst_relative_min: f64,
}

impl MaxPrincipleReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// A factored oscillator-form operator on one raster domain.
pub struct FieldSolver {
    domain: Arc<RasterDomain>,
    stencil: Stencil,
    /// `e^{|x|²/4}` at the active centers.
    gauge: Vec<f64>,
    k: SpdMatrix,
}

impl std::fmt::Debug for FieldSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSolver")
            .field("active_cells", &self.gauge.len())
            .field("h", &self.domain.h)
            .finish()
    }
}

impl FieldSolver {
    /// Assembles and factors `K`. A failed factorization would contradict
    /// `λ₁ > 2` and is reported as a consistency error.
    pub fn new(domain: Arc<RasterDomain>) -> Result<Self> {
        let stencil = Stencil::new(&domain);
        let gauge = stencil
            .centers
            .iter()
            .map(|&(x, y)| (0.25 * (x * x + y * y)).exp())
            .collect();
        let k = SpdMatrix::new(stencil.centers.len(), oscillator_matrix(&domain, &stencil))?;
        Ok(Self {
            domain,
            stencil,
            gauge,
            k,
        })
    }

    pub fn domain(&self) -> &Arc<RasterDomain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.gauge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gauge.is_empty()
    }

    /// The `k` smallest eigenvalues with eigenfunctions in u-form, normalized
    /// in L²(m_N). Each eigenfunction's sign is fixed so that its sum is
    /// positive (or, if that vanishes, its first significant value).
    pub fn eigenpairs(&self, k: usize, tol: f64) -> Result<FieldEigen> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::usage(format!("requested {k} eigenpairs on {n} active cells")));
        }
        let pairs = smallest_eigenpairs(&self.k, k, tol, EIGEN_SEED)?;
        let h = self.domain.h;
        let mut entries = Vec::with_capacity(k);
        let mut eigenfunctions = Vec::with_capacity(k);
        for ((lambda, v), residual) in pairs.values.iter().zip(&pairs.vectors).zip(&pairs.residuals) {
            // Σ v² = 1, and Σ u² e^{|x|²/2} h² = h² Σ v².
            let mut u: Vec<f64> = v.iter().zip(&self.gauge).map(|(vi, g)| vi / (g * h)).collect();
            if orientation(&u) < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
            }
            entries.push(SpectrumEntry {
                lambda: *lambda,
                multiplicity: 1,
                ell: None,
                radial_index: None,
                residual: *residual,
            });
            eigenfunctions.push(GridFunction::new(self.domain.clone(), u)?);
        }
        Ok(FieldEigen {
            spectrum: Spectrum { entries },
            eigenfunctions,
        })
    }

    /// Solves `Lψ = f` (values on active cells); returns ψ and the relative
    /// residual of the oscillator-form system.
    pub fn solve(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        if f.len() != self.len() {
            return Err(Error::usage(format!("{} values for {} active cells", f.len(), self.len())));
        }
        let b: Vec<f64> = f.iter().zip(&self.gauge).map(|(fi, g)| fi * g).collect();
        let eta = self.k.solve(&b);
        let mut r = vec![0.0; b.len()];
        self.k.matvec(&eta, &mut r);
        let num = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let den = b.iter().map(|c| c * c).sum::<f64>().sqrt();
        let residual = if den > 0.0 { num / den } else { num };
        let psi = eta.iter().zip(&self.gauge).map(|(e, g)| e / g).collect();
        Ok((psi, residual))
    }

    pub fn torsion(&self) -> Result<TorsionField> {
        let (w, residual) = self.solve(&vec![1.0; self.len()])?;
        if !(residual <= TORSION_TOL) {
            return Err(Error::Convergence {
                what: "torsion solve".into(),
                residual,
            });
        }
        let field = TorsionField {
            w: GridFunction::new(self.domain.clone(), w)?,
            residual,
        };
        if !(field.min() > 0.0) {
            return Err(Error::Consistency(format!(
                "torsion function not positive (min {:e})",
                field.min()
            )));
        }
        Ok(field)
    }

    /// Checks `|u_j| ≤ λ_j ‖u_j‖_∞ w` cellwise for `j ≤ k`.
    pub fn domination(&self, k: usize, tol: f64) -> Result<DominationReport> {
        let eig = self.eigenpairs(k, DEFAULT_TOL)?;
        let w = self.torsion()?;
        Ok(domination_report(&eig, &w, tol))
    }

    /// Solves `Lψ = f` for `trials` random bounded `f ≥ 0` and counts
    /// solutions with `min ψ < -1e-10 ‖ψ‖_∞`.
    pub fn maximum_principle(&self, trials: usize, seed: u64) -> Result<MaxPrincipleReport> {
        if trials == 0 {
            return Err(Error::usage("at least one trial is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for t in 0..trials {
            let f = random_source(&self.stencil.centers, t, &mut rng);
            let (psi, _) = self.solve(&f)?;
            let sup = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let min = psi.iter().cloned().fold(f64::INFINITY, f64::min);
            let rel = if sup > 0.0 { min / sup } else { 0.0 };
            worst = worst.min(rel);
            if rel < -1e-10 {
                violations += 1;
            }
        }
        Ok(MaxPrincipleReport {
            trials,
            violations,
            worst_relative_min: worst,
        })
    }

    /// Largest relative residual `‖L_h u_j - λ_j u_j‖ / (λ_j ‖u_j‖)` of the
    /// eigenfunctions under the drift operator assembled directly in u-form
    /// with the conjugated stencil `e^{(|x_q|²-|x_p|²)/4}`. Since that matrix
    /// is `E⁻¹ K E` with `E = diag(e^{|x|²/4})`, this measures how exactly
    /// `λ = ν + 1` carries over between the forms.
    pub fn drift_form_residual(&self, eig: &FieldEigen) -> f64 {
        let h2 = self.domain.h * self.domain.h;
        let phi: Vec<f64> = self.gauge.iter().map(|g| g.ln()).collect();
        let n = self.len();
        let mut worst: f64 = 0.0;
        for (u, lambda) in eig.eigenfunctions.iter().zip(eig.lambdas()) {
            let u = &u.values;
            let mut lu: Vec<f64> = (0..n)
                .map(|p| {
                    let (x, y) = self.stencil.centers[p];
                    (4.0 / h2 + 0.25 * (x * x + y * y) + 1.0) * u[p]
                })
                .collect();
            for p in 0..n {
                for q in [self.stencil.east[p], self.stencil.north[p]].into_iter().flatten() {
                    lu[p] -= (phi[q] - phi[p]).exp() * u[q] / h2;
                    lu[q] -= (phi[p] - phi[q]).exp() * u[p] / h2;
                }
            }
            let num: f64 = lu.iter().zip(u).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = lambda * u.iter().map(|b| b * b).sum::<f64>().sqrt();
            worst = worst.max(num / den);
        }
        worst
    }
}

fn orientation(u: &[f64]) -> f64 {
    let s: f64 = u.iter().sum();
    let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if s.abs() > 1e-8 * scale * u.len() as f64 {
        return s;
    }
    u.iter().copied().find(|v| v.abs() > 1e-3 * scale).unwrap_or(1.0)
}

fn random_source(centers: &[(f64, f64)], trial: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = centers.len();
    match trial % 4 {
        0 => (0..n).map(|_| rng.gen::<f64>()).collect(),
        1 => {
            let mut f = vec![0.0; n];
            for _ in 0..3 {
                f[rng.gen_range(0..n)] = rng.gen_range(0.5..1.0);
            }
            f
        }
        2 => {
            let (cx, cy) = centers[rng.gen_range(0..n)];
            let s: f64 = rng.gen_range(0.05..0.5);
            centers
                .iter()
                .map(|&(x, y)| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .collect()
        }
        _ => {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (cx, cy) = centers[rng.gen_range(0..n)];
            centers
                .iter()
                .map(|&(x, y)| if (x - cx) * a.cos() + (y - cy) * a.sin() > 0.0 { 1.0 } else { 0.0 })
                .collect()
        }
    }
}

/// The cellwise domination bound for precomputed eigenpairs and torsion.
pub fn domination_report(eig: &FieldEigen, w: &TorsionField, tol: f64) -> DominationReport {
    let entries = eig
        .eigenfunctions
        .iter()
        .zip(eig.lambdas())
        .enumerate()
        .map(|(i, (u, lambda))| {
            let m = u.sup_abs();
            let max_violation = u
                .values
                .iter()
                .zip(&w.w.values)
                .map(|(ui, wi)| ui.abs() - lambda * m * wi)
                .fold(f64::NEG_INFINITY, f64::max);
            DominationEntry {
                j: i + 1,
                lambda,
                sup_norm: m,
                max_violation,
            }
        })
        .collect();
    DominationReport { entries, tol }
}

pub fn eigenpairs(domain: &RasterDomain, k: usize, tol: f64) -> Result<FieldEigen> {
    FieldSolver::new(Arc::new(domain.clone()))?.eigenpairs(k, tol)
}

pub fn torsion(domain: &RasterDomain) -> Result<TorsionField> {
    FieldSolver::new(Arc::new(domain.clone()))?.torsion()
}

pub fn domination_check(domain: &RasterDomain, k: usize) -> Result<DominationReport> {
    FieldSolver::new(Arc::new(domain.clone()))?.domination(k, 1e-8)
}

pub fn maximum_principle_check(domain: &RasterDomain, trials: usize, seed: u64) -> Result<MaxPrincipleReport> {
    FieldSolver::new(Arc::new(domain.clone()))?.maximum_principle(trials, seed)
}

/// Eigenvalues from the drift form assembled directly: the energy
/// `Σ_faces e^{|x_f|²/2} (u_p - u_q)²` against the lumped mass
/// `e^{|x_p|²/2} h²`, reduced to a standard problem by `M^{-1/2}`. An
/// independent O(h²) discretization of the same operator.
pub fn drift_form_eigenvalues(domain: &RasterDomain, k: usize, tol: f64) -> Result<Vec<f64>> {
    let st = Stencil::new(domain);
    let h = domain.h;
    let weight = |x: f64, y: f64| (0.5 * (x * x + y * y)).exp();
    let n = st.centers.len();
    let mut diag = vec![0.0; n];
    let mut off = Vec::with_capacity(2 * n);
    let west_south = west_south_active(domain);
    for (p, &(x, y)) in st.centers.iter().enumerate() {
        for (nb, wf) in [(st.east[p], weight(x + 0.5 * h, y)), (st.north[p], weight(x, y + 0.5 * h))] {
            diag[p] += wf;
            if let Some(q) = nb {
                diag[q] += wf;
                off.push((q, p, -wf));
            }
        }
        // Faces towards inactive west/south cells; active ones were counted
        // from the neighbour.
        let (w_active, s_active) = west_south[p];
        if !w_active {
            diag[p] += weight(x - 0.5 * h, y);
        }
        if !s_active {
            diag[p] += weight(x, y - 0.5 * h);
        }
    }
    let mass: Vec<f64> = st.centers.iter().map(|&(x, y)| weight(x, y) * h * h).collect();
    let mut t = Vec::with_capacity(n + off.len());
    for p in 0..n {
        t.push((p, p, diag[p] / mass[p]));
    }
    for (q, p, v) in off {
        t.push((q, p, v / (mass[p] * mass[q]).sqrt()));
    }
    let a = SpdMatrix::new(n, t)?;
    Ok(smallest_eigenpairs(&a, k, tol, EIGEN_SEED)?.values)
}

fn west_south_active(d: &RasterDomain) -> Vec<(bool, bool)> {
    d.active_cells()
        .into_iter()
        .map(|c| {
            let (i, j) = (c % d.nx, c / d.nx);
            (i > 0 && d.mask[c - 1], j > 0 && d.mask[c - d.nx])
        })
        .collect()
}

/// Rasterizes a ball family (centers on the x-axis), rejecting overlaps.
pub fn rasterize_balls(config: &BallFamilyConfig, h: f64) -> Result<RasterDomain> {
    config.check_disjoint()?;
    let disks: Vec<([f64; 2], f64)> = config
        .centers
        .iter()
        .zip(&config.radii)
        .map(|(&c, &r)| ([c, 0.0], r))
        .collect();
    crate::raster::rasterize_disks(&disks, h)
}

/// Default radial cell count of the coarse polar grid in
/// [`offcenter_disk_eigenvalues`]; the fine grid doubles it.
pub const POLAR_CELLS: usize = 32;

/// The `k` smallest eigenvalues of `L` on the disk `B(center, rho)` from a
/// cell-centered finite-volume grid in polar coordinates about the disk's
/// center: `nr` radial by `4 nr` angular cells, Dirichlet condition on the
/// outer face.
pub fn polar_disk_eigenvalues(center: [f64; 2], rho: f64, k: usize, nr: usize) -> Result<Vec<f64>> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("disk radius must be positive, got {rho}")));
    }
    if !center.iter().all(|c| c.is_finite()) {
        return Err(Error::domain("disk center must be finite"));
    }
    if nr < 4 {
        return Err(Error::usage("polar grid needs at least 4 radial cells"));
    }
    let nt = 4 * nr;
    if k == 0 || k > nr * nt {
        return Err(Error::usage(format!("cannot compute {k} eigenvalues on a {nr}x{nt} grid")));
    }
    // |x|² depends on the center only through its length.
    let a = center[0].hypot(center[1]);
    let dr = rho / nr as f64;
    let dt = std::f64::consts::TAU / nt as f64;
    let idx = |i: usize, j: usize| i * nt + j;
    let mut diag = vec![0.0; nr * nt];
    let mut off = Vec::with_capacity(2 * nr * nt);
    let mut mass = vec![0.0; nr * nt];
    for i in 0..nr {
        let r = (i as f64 + 0.5) * dr;
        let g_ang = dr / (r * dt);
        let g_rad = if i + 1 < nr {
            (i as f64 + 1.0) * dr * dt / dr
        } else {
            rho * dt / (0.5 * dr)
        };
        for j in 0..nt {
            let t = (j as f64 + 0.5) * dt;
            let p = idx(i, j);
            let x2 = a * a + 2.0 * a * r * t.cos() + r * r;
            mass[p] = r * dr * dt;
            diag[p] += (0.25 * x2 + 1.0) * mass[p];
            let q = idx(i, (j + 1) % nt);
            diag[p] += g_ang;
            diag[q] += g_ang;
            off.push((p.max(q), p.min(q), -g_ang));
            diag[p] += g_rad;
            if i + 1 < nr {
                let q = idx(i + 1, j);
                diag[q] += g_rad;
                off.push((q, p, -g_rad));
            }
        }
    }
    let mut t = Vec::with_capacity(diag.len() + off.len());
    for (p, d) in diag.iter().enumerate() {
        t.push((p, p, d / mass[p]));
    }
    for (q, p, v) in off {
        t.push((q, p, v / (mass[p] * mass[q]).sqrt()));
    }
    let m = SpdMatrix::new(nr * nt, t)?;
    Ok(smallest_eigenpairs(&m, k, 1e-10, EIGEN_SEED)?.values)
}

/// Richardson-extrapolated [`polar_disk_eigenvalues`] over `nr` and `2 nr`.
pub fn offcenter_disk_eigenvalues(center: [f64; 2], rho: f64, k: usize) -> Result<Vec<f64>> {
    let coarse = polar_disk_eigenvalues(center, rho, k, POLAR_CELLS)?;
    let fine = polar_disk_eigenvalues(center, rho, k, 2 * POLAR_CELLS)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}
