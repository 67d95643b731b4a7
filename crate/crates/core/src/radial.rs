//! Dirichlet eigenproblems on centered balls, reduced to one radial variable by
//! spherical-harmonic decomposition.
//!
//! Degree ℓ gives `-(a u')' + ℓ(ℓ+N-2) r⁻² a u = λ a u` on `(0, R)` with
//! `a(r) = r^{N-1} e^{r²/2}`. The equivalent oscillator form uses weight
//! `r^{N-1}` and potential `ℓ(ℓ+N-2)/r² + r²/4`, with eigenvalue `λ - N/2`.
//! Both are discretized by a vertex-centered finite-volume scheme: conductances
//! at face midpoints, exact cell integrals for mass and potential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Dimension;
use crate::quad::GaussLegendre;
use crate::special::dirichlet_bessel_zero;
use crate::tridiag::SymTridiag;

/// Radius standing in for r → ∞ when measuring the infimum of λ₁(B_r).
pub const R_MAX: f64 = 8.0;
/// Default number of radial cells.
pub const DEFAULT_CELLS: usize = 2048;
/// Default eigenvalue tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Which of the two unitarily equivalent forms to discretize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialForm {
    /// Weight `r^{N-1} e^{r²/2}`, eigenvalue λ.
    #[default]
    Drift,
    /// Weight `r^{N-1}`, potential `r²/4`, eigenvalue reported as ν + N/2.
    Oscillator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialOperatorSpec {
    pub dim: Dimension,
    pub ell: u32,
    pub radius: f64,
    pub cells: usize,
    /// Mesh grading exponent γ ≥ 1: nodes `r_i = R (i/n)^γ`. Defaults to 1
    /// for ℓ = 0 and 1.5 otherwise; uniform meshes lose an order for ℓ = 1 in
    /// the plane.
    pub grading: f64,
    pub form: RadialForm,
}

impl RadialOperatorSpec {
    pub fn new(dim: Dimension, ell: u32, radius: f64, cells: usize) -> Result<Self> {
        let spec = Self {
            dim,
            ell,
            radius,
            cells,
            grading: if ell == 0 { 1.0 } else { 1.5 },
            form: RadialForm::Drift,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_grading(mut self, grading: f64) -> Result<Self> {
        self.grading = grading;
        self.validate()?;
        Ok(self)
    }

    pub fn with_form(mut self, form: RadialForm) -> Self {
        self.form = form;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::domain(format!("ball radius must be positive, got {}", self.radius)));
        }
        if self.cells < 16 {
            return Err(Error::domain(format!("need at least 16 radial cells, got {}", self.cells)));
        }
        if !(self.grading >= 1.0) {
            return Err(Error::domain(format!("grading exponent must be >= 1, got {}", self.grading)));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.cells as f64;
        (0..=self.cells)
            .map(|i| self.radius * (i as f64 / n).powf(self.grading))
            .collect()
    }
}

/// Symmetric pencil `(A, M)` with `A` stored in difference form:
/// `uᵀAu = Σ_f c_f (u_{f+1} - u_f)² + Σ_i p_i u_i²`, where the unknown vector
/// is padded with the Dirichlet zeros at its ends when those are present.
#[derive(Debug, Clone)]
pub struct RadialPencil {
    pub spec: RadialOperatorSpec,
    /// Radii of the unknowns.
    pub r: Vec<f64>,
    /// Conductance of the face between unknown i-1 and i (index 0: the left
    /// Dirichlet face, zero when the origin is a natural boundary).
    pub left: Vec<f64>,
    /// Conductance of the face to the right Dirichlet node for the last unknown.
    pub right_boundary: f64,
    pub potential: Vec<f64>,
    pub mass: Vec<f64>,
}

impl RadialPencil {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Diagonal and off-diagonal of the stiffness matrix.
    pub fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut d = self.potential.clone();
        let mut e = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            d[i] += self.left[i];
            let right = if i + 1 < n { self.left[i + 1] } else { self.right_boundary };
            d[i] += right;
            if i + 1 < n {
                e[i] = -self.left[i + 1];
            }
        }
        (d, e)
    }

    /// `C = M^{-1/2} A M^{-1/2}`.
    pub fn symmetric_form(&self) -> SymTridiag {
        let (mut d, mut e) = self.stiffness();
        let s: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        for i in 0..d.len() {
            d[i] *= s[i] * s[i];
            if i < e.len() {
                e[i] *= s[i] * s[i + 1];
            }
        }
        SymTridiag::new(d, e)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.len();
        let mut e = 0.0;
        for i in 0..n {
            let prev = if i > 0 { u[i - 1] } else { 0.0 };
            e += self.left[i] * (u[i] - prev).powi(2) + self.potential[i] * u[i] * u[i];
        }
        e + self.right_boundary * u[n - 1] * u[n - 1]
    }

    pub fn mass_norm_sq(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum()
    }

    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let prev = if i > 0 { u[i - 1] } else { 0.0 };
                let next = if i + 1 < n { u[i + 1] } else { 0.0 };
                let right = if i + 1 < n { self.left[i + 1] } else { self.right_boundary };
                self.left[i] * (u[i] - prev) + right * (u[i] - next) + self.potential[i] * u[i]
            })
            .collect()
    }
}

/// Builds the pencil for `spec`.
pub fn assemble(spec: &RadialOperatorSpec) -> RadialPencil {
    let nodes = spec.nodes();
    let n = spec.cells;
    let dim = spec.dim.as_f64();
    let ell = spec.ell as f64;
    let centrifugal = ell * (ell + dim - 2.0);
    let weight = |r: f64| match spec.form {
        RadialForm::Drift => r.powf(dim - 1.0) * (0.5 * r * r).exp(),
        RadialForm::Oscillator => r.powf(dim - 1.0),
    };
    let extra = |r: f64| match spec.form {
        RadialForm::Drift => 0.0,
        RadialForm::Oscillator => 0.25 * r * r,
    };
    let first = if spec.ell == 0 { 0 } else { 1 };
    let rule = GaussLegendre::new(8);
    let conduct = |i: usize| {
        let (a, b) = (nodes[i], nodes[i + 1]);
        weight(0.5 * (a + b)) / (b - a)
    };
    let mut r = Vec::with_capacity(n - first);
    let mut left = Vec::with_capacity(n - first);
    let mut potential = Vec::with_capacity(n - first);
    let mut mass = Vec::with_capacity(n - first);
    for i in first..n {
        let lo = if i == 0 { 0.0 } else { 0.5 * (nodes[i - 1] + nodes[i]) };
        let hi = 0.5 * (nodes[i] + nodes[i + 1]);
        r.push(nodes[i]);
        left.push(if i == 0 { 0.0 } else { conduct(i - 1) });
        mass.push(rule.integrate(lo, hi, weight));
        potential.push(rule.integrate(lo, hi, |t| {
            let c = if centrifugal > 0.0 { centrifugal / (t * t) } else { 0.0 };
            weight(t) * (c + extra(t))
        }));
    }
    RadialPencil {
        spec: *spec,
        r,
        left,
        right_boundary: conduct(n - 1),
        potential,
        mass,
    }
}

/// Nodal values of a radial function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: Dimension,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(dim: Dimension, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::usage("profile needs matching nodes and values (at least two)"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes[0] < 0.0 {
            return Err(Error::usage("profile nodes must be nonnegative and increasing"));
        }
        Ok(Self { dim, nodes, values })
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Piecewise-linear interpolation; zero beyond the last node.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.radius() {
            return if r == self.radius() { *self.values.last().unwrap() } else { 0.0 };
        }
        if r <= self.nodes[0] {
            return self.values[0];
        }
        let k = self.nodes.partition_point(|&x| x <= r) - 1;
        let t = (r - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    /// `∫ |f|^p dm_N` for the piecewise-linear interpolant (Gauss–Legendre per
    /// cell).
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let rule = GaussLegendre::new(6);
        let dim = self.dim;
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| {
                rule.integrate(x[0], x[1], |r| {
                    let t = (r - x[0]) / (x[1] - x[0]);
                    let f = v[0] + t * (v[1] - v[0]);
                    f.abs().powf(p) * dim.h(r)
                })
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub multiplicity: usize,
    pub ell: Option<u32>,
    pub radial_index: Option<usize>,
    pub residual: f64,
}

/// Eigenvalues in nondecreasing order with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Spectrum {
    pub entries: Vec<SpectrumEntry>,
}

impl Spectrum {
    /// The `j`-th eigenvalue (1-based) counted with multiplicity.
    pub fn eigenvalue(&self, j: usize) -> Option<f64> {
        let mut seen = 0;
        for e in &self.entries {
            seen += e.multiplicity;
            if seen >= j {
                return Some(e.lambda);
            }
        }
        None
    }

    /// Total multiplicity covered.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Eigenvalues listed with repetition.
    pub fn expanded(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .collect()
    }
}

/// Dimension of degree-ℓ spherical harmonics in ℝ^N.
pub fn harmonic_multiplicity(dim: Dimension, ell: u32) -> usize {
    if ell == 0 {
        return 1;
    }
    let n = dim.get() as u64;
    let l = ell as u64;
    // (2ℓ+N-2)(ℓ+N-3)! / (ℓ!(N-2)!) = (2ℓ+N-2)/(ℓ+N-2) · C(ℓ+N-2, ℓ)
    let mut binom: u64 = 1;
    for i in 1..=l {
        binom = binom * (n - 2 + i) / i;
    }
    ((2 * l + n - 2) * binom / (l + n - 2)) as usize
}

/// Eigenpairs of one ℓ-slice.
#[derive(Debug, Clone)]
pub struct SliceSolution {
    pub lambdas: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Eigenfunctions including the Dirichlet end nodes, normalized in the
    /// weighted mass inner product of the chosen form.
    pub profiles: Vec<RadialProfile>,
}

/// The `k` smallest eigenpairs of one ℓ-slice. Residuals are backward errors
/// `‖Cy - λy‖ / (‖C‖ ‖y‖)` of the symmetrized pencil.
pub fn lowest_eigenpairs(spec: &RadialOperatorSpec, k: usize, tol: f64) -> Result<SliceSolution> {
    if k == 0 {
        return Err(Error::usage("need at least one eigenpair"));
    }
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    let pencil = assemble(spec);
    if k > pencil.len() {
        return Err(Error::usage(format!("requested {k} eigenpairs from {} unknowns", pencil.len())));
    }
    let c = pencil.symmetric_form();
    let scale = c.norm_inf();
    let shift = match spec.form {
        RadialForm::Drift => 0.0,
        RadialForm::Oscillator => 0.5 * spec.dim.as_f64(),
    };
    let sqrt_m: Vec<f64> = pencil.mass.iter().map(|m| m.sqrt()).collect();
    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut lambdas = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut profiles = Vec::with_capacity(k);
    let mut cy = vec![0.0; c.len()];
    for j in 1..=k {
        let guess = c.eigenvalue(j);
        let y = c.eigenvector(guess, &ys)?;
        let mut u: Vec<f64> = y.iter().zip(&sqrt_m).map(|(a, s)| a / s).collect();
        let lam = pencil.energy(&u) / pencil.mass_norm_sq(&u);
        c.matvec(&y, &mut cy);
        let res = cy
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / scale;
        if !(res <= tol) {
            return Err(Error::Convergence {
                what: format!("radial eigenpair {j} (ell = {})", spec.ell),
                residual: res,
            });
        }
        // Sign convention: nonnegative at the first interior node.
        let probe = if spec.ell == 0 { 1 } else { 0 };
        if u[probe] < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        let nodes = spec.nodes();
        let mut values = vec![0.0; nodes.len()];
        let offset = nodes.len() - 1 - u.len();
        values[offset..offset + u.len()].copy_from_slice(&u);
        profiles.push(RadialProfile {
            dim: spec.dim,
            nodes,
            values,
        });
        lambdas.push(lam + shift);
        residuals.push(res);
        ys.push(y);
    }
    Ok(SliceSolution {
        lambdas,
        residuals,
        profiles,
    })
}

fn slice_eigenvalues(dim: Dimension, ell: u32, radius: f64, cells: usize, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = RadialOperatorSpec::new(dim, ell, radius, cells)?;
    let sol = lowest_eigenpairs(&spec, k, DEFAULT_TOL)?;
    Ok((sol.lambdas, sol.residuals))
}

/// Richardson-extrapolated eigenvalues of one slice from grids `n` and `2n`.
fn slice_extrapolated(dim: Dimension, ell: u32, radius: f64, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (coarse, _) = slice_eigenvalues(dim, ell, radius, DEFAULT_CELLS, k)?;
    let (fine, res) = slice_eigenvalues(dim, ell, radius, 2 * DEFAULT_CELLS, k)?;
    let values = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
    Ok((values, res))
}

/// The first `k` eigenvalues (counted with multiplicity) of the centered ball
/// `B_R`, merging ℓ-slices.
pub fn ball_spectrum(dim: Dimension, radius: f64, k: usize, tol: f64) -> Result<Spectrum> {
    if k == 0 {
        return Err(Error::usage("count must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    let mut entries: Vec<SpectrumEntry> = Vec::new();
    let mut ell = 0u32;
    loop {
        let (values, res) = slice_extrapolated(dim, ell, radius, k)?;
        if let Some(r) = res.iter().find(|r| !(**r <= tol)) {
            return Err(Error::Convergence {
                what: format!("ball spectrum slice ell = {ell}"),
                residual: *r,
            });
        }
        let mult = harmonic_multiplicity(dim, ell);
        for (i, (lambda, residual)) in values.iter().zip(&res).enumerate() {
            entries.push(SpectrumEntry {
                lambda: *lambda,
                multiplicity: mult,
                ell: Some(ell),
                radial_index: Some(i + 1),
                residual: *residual,
            });
        }
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let kth = Spectrum {
            entries: entries.clone(),
        }
        .eigenvalue(k);
        ell += 1;
        // Slice minima increase with ℓ; stop once the next one cannot enter.
        if let Some(kth) = kth {
            let (next, _) = slice_eigenvalues(dim, ell, radius, DEFAULT_CELLS, 1)?;
            // The coarse value overestimates slightly; pad by a relative margin.
            if next[0] * (1.0 - 1e-4) > kth {
                break;
            }
        }
    }
    let mut out = Vec::new();
    let mut seen = 0;
    for e in entries {
        if seen >= k {
            break;
        }
        seen += e.multiplicity;
        out.push(e);
    }
    Ok(Spectrum { entries: out })
}

/// λ₁ at one resolution, uniform mesh, ℓ = 0.
pub fn lambda1_at(dim: Dimension, radius: f64, cells: usize) -> Result<f64> {
    let spec = RadialOperatorSpec::new(dim, 0, radius, cells)?;
    Ok(lowest_eigenpairs(&spec, 1, DEFAULT_TOL)?.lambdas[0])
}

/// λ₁(B_R), Richardson-extrapolated from 2048 and 4096 cells.
pub fn lambda1_ball(dim: Dimension, radius: f64) -> Result<f64> {
    let coarse = lambda1_at(dim, radius, DEFAULT_CELLS)?;
    let fine = lambda1_at(dim, radius, 2 * DEFAULT_CELLS)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Extrapolated λ₁(B_R) together with an error estimate: the difference to
/// the extrapolation from the next finer pair of grids.
pub fn lambda1_ball_certified(dim: Dimension, radius: f64) -> Result<(f64, f64)> {
    let l1 = lambda1_at(dim, radius, DEFAULT_CELLS)?;
    let l2 = lambda1_at(dim, radius, 2 * DEFAULT_CELLS)?;
    let l3 = lambda1_at(dim, radius, 4 * DEFAULT_CELLS)?;
    let r1 = (4.0 * l2 - l1) / 3.0;
    let r2 = (4.0 * l3 - l2) / 3.0;
    Ok((r1, (r1 - r2).abs()))
}

/// Lower bound `N/2 + j²/R²` for λ₁(B_R).
pub fn sandwich_lower(dim: Dimension, radius: f64) -> f64 {
    let j = dirichlet_bessel_zero(dim.get());
    0.5 * dim.as_f64() + j * j / (radius * radius)
}

/// Upper bound `N/2 + j²/R² + R²/4` for λ₁(B_R).
pub fn sandwich_upper(dim: Dimension, radius: f64) -> f64 {
    sandwich_lower(dim, radius) + 0.25 * radius * radius
}

/// The radius r̃ with λ₁(B_r̃) = `target`, by bisection on the strictly
/// decreasing curve r ↦ λ₁(B_r) over `(0, R_MAX]`.
pub fn find_radius_for_lambda(dim: Dimension, target: f64) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::domain("target eigenvalue must be finite"));
    }
    let infimum = lambda1_ball(dim, R_MAX)?;
    if target <= infimum {
        return Err(Error::InfeasibleTarget { target, infimum });
    }
    let j = dirichlet_bessel_zero(dim.get());
    // λ₁(B_r) ≥ N/2 + j²/r² puts the root above this radius.
    let mut lo = (j / (target - 0.5 * dim.as_f64()).sqrt()).min(R_MAX);
    let mut hi = R_MAX;
    let mut f_lo = lambda1_ball(dim, lo)? - target;
    let mut f_hi = lambda1_ball(dim, hi)? - target;
    if f_lo < 0.0 {
        return Err(Error::Consistency(format!(
            "lower bound violated: lambda1 at r = {lo} is below {target}"
        )));
    }
    // Illinois-modified regula falsi keeps the bracket while converging fast.
    let mut side = 0i32;
    let mut r = lo;
    for _ in 0..200 {
        r = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(r > lo && r < hi) {
            r = 0.5 * (lo + hi);
        }
        let f = lambda1_ball(dim, r)? - target;
        if f.abs() <= 1e-10 || hi - lo <= 1e-13 * hi {
            return Ok(r);
        }
        if f > 0.0 {
            lo = r;
            f_lo = f;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = r;
            f_hi = f;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok(r)
}
