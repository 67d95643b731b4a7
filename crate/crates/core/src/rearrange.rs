//! Distribution functions, decreasing rearrangements and symmetrization with
//! respect to m_N for functions on raster domains.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Dimension;
use crate::raster::RasterDomain;

/// Values on the active cells of a raster domain, in row-major active order.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub domain: Arc<RasterDomain>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Arc<RasterDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.active_count() {
            return Err(Error::usage(format!(
                "{} values for {} active cells",
                values.len(),
                domain.active_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid function values must be finite"));
        }
        Ok(Self { domain, values })
    }

    /// Samples `f` at the active cell centers.
    pub fn from_fn(domain: Arc<RasterDomain>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = domain.active_centers().into_iter().map(|(x, y)| f(x, y)).collect();
        Self::new(domain, values)
    }

    /// `Σ |u|^p · cell measure`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(self.domain.cell_measures())
            .map(|(v, m)| v.abs().powf(p) * m)
            .sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn same_domain(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || *self.domain == *other.domain
    }
}

/// A nonincreasing function of the measure variable `s ∈ [0, total)`.
pub trait MeasureProfile {
    fn total(&self) -> f64;
    /// Value at `s` (zero for `s ≥ total`).
    fn eval(&self, s: f64) -> f64;
    /// `∫_0^s f(t)^p dt` for `s ∈ [0, total]`.
    fn partial_integral_pow(&self, p: f64, s: f64) -> f64;
    /// Essential supremum, the value at `0⁺`.
    fn sup(&self) -> f64;

    fn integral_pow(&self, p: f64) -> f64 {
        self.partial_integral_pow(p, self.total())
    }
}

/// A nonincreasing step function: `values[i]` on `[breakpoints[i], breakpoints[i+1])`
/// and zero from the last breakpoint up to `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneProfile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub total: f64,
}

impl MonotoneProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, total: f64) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || breakpoints[0] != 0.0 {
            return Err(Error::usage("breakpoints must start at 0 and bracket every value"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("breakpoints must be strictly increasing"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::usage("profile values must be nonincreasing"));
        }
        if *breakpoints.last().unwrap() > total * (1.0 + 1e-12) {
            return Err(Error::usage("breakpoints extend beyond the total measure"));
        }
        Ok(Self {
            breakpoints,
            values,
            total,
        })
    }

    /// Measure of `{φ* > t}`.
    pub fn superlevel_measure(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v > t);
        self.breakpoints[k]
    }

    /// Scales all values by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            total: self.total,
        }
    }
}

impl MeasureProfile for MonotoneProfile {
    fn total(&self) -> f64 {
        self.total
    }

    fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.sup();
        }
        let k = self.breakpoints.partition_point(|&b| b <= s);
        if k == 0 || k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    fn partial_integral_pow(&self, p: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if a >= s {
                break;
            }
            acc += v.abs().powf(p) * (b.min(s) - a);
        }
        acc
    }

    fn sup(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// `μ(t) = m_N({|u| > t})`.
pub fn distribution_function(u: &GridFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("level must be nonnegative, got {t}")));
    }
    Ok(u.values
        .iter()
        .zip(u.domain.cell_measures())
        .filter(|(v, _)| v.abs() > t)
        .map(|(_, m)| m)
        .sum())
}

/// The decreasing rearrangement φ* of |u|, exact as a step function: one step
/// per distinct value of |u|, zero values dropped.
pub fn decreasing_rearrangement(u: &GridFunction) -> MonotoneProfile {
    let measures = u.domain.cell_measures();
    let total: f64 = measures.iter().sum();
    let mut cells: Vec<(f64, f64)> = u
        .values
        .iter()
        .map(|v| v.abs())
        .zip(measures)
        .filter(|(v, _)| *v > 0.0)
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut breakpoints = vec![0.0];
    let mut values = Vec::new();
    let mut acc = 0.0;
    for (v, m) in cells {
        acc += m;
        if values.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = acc;
        } else {
            values.push(v);
            breakpoints.push(acc);
        }
    }
    let last = *breakpoints.last().unwrap();
    MonotoneProfile {
        breakpoints,
        values,
        total: total.max(last),
    }
}

/// A radial nonincreasing step function: `values[i]` on
/// `radii[i] ≤ |x| < radii[i+1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialStepProfile {
    pub dim: Dimension,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Radius of the ball Ω★ with the measure of the whole domain.
    pub outer_radius: f64,
}

impl RadialStepProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let k = self.radii.partition_point(|&b| b <= r);
        if k == 0 || k > self.values.len() {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    /// `∫ |φ★|^p dm_N`, exact for the step function.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs().powf(p) * (self.dim.big_h(self.radii[i + 1]) - self.dim.big_h(self.radii[i])))
            .sum()
    }
}

/// φ★(x) = φ*(H(|x|)) on the centered disk of the same m_2-measure.
pub fn symmetrize(u: &GridFunction) -> RadialStepProfile {
    let dim = Dimension::PLANE;
    let star = decreasing_rearrangement(u);
    let radii = star.breakpoints.iter().map(|&s| dim.big_h_inv(s)).collect();
    RadialStepProfile {
        dim,
        radii,
        values: star.values,
        outer_radius: dim.big_h_inv(star.total),
    }
}

/// Both sides of the Hardy–Littlewood inequality
/// `∫|uv| dm_N ≤ ∫_0^m u* v* ds`.
pub fn hardy_littlewood_check(u: &GridFunction, v: &GridFunction) -> Result<(f64, f64)> {
    if !u.same_domain(v) {
        return Err(Error::usage("functions live on different domains"));
    }
    let lhs = u
        .values
        .iter()
        .zip(&v.values)
        .zip(u.domain.cell_measures())
        .map(|((a, b), m)| (a * b).abs() * m)
        .sum();
    let (a, b) = (decreasing_rearrangement(u), decreasing_rearrangement(v));
    // Merge the breakpoints of the two step functions.
    let mut rhs = 0.0;
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < a.values.len() && j < b.values.len() {
        let end = a.breakpoints[i + 1].min(b.breakpoints[j + 1]);
        rhs += a.values[i] * b.values[j] * (end - s);
        s = end;
        if a.breakpoints[i + 1] <= end {
            i += 1;
        }
        if b.breakpoints[j + 1] <= end {
            j += 1;
        }
    }
    Ok((lhs, rhs))
}

/// Outcome of a discrete Pólya–Szegő comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyaSzegoReport {
    /// Weighted Dirichlet energy of u on the raster.
    pub lhs: f64,
    /// One-dimensional weighted energy of the symmetrized profile.
    pub rhs: f64,
    /// Allowed excess of `rhs` over `lhs`: `5 h lhs`.
    pub slack: f64,
}

impl PolyaSzegoReport {
    pub fn holds(&self) -> bool {
        self.rhs <= self.lhs + self.slack
    }
}

/// Weighted Dirichlet energy `Σ_faces e^{|x_f|²/2} (u_P - u_Q)²` of a grid
/// function, with u = 0 on inactive cells.
pub fn dirichlet_energy(u: &GridFunction) -> f64 {
    let d = &*u.domain;
    let mut full = vec![0.0; d.nx * d.ny];
    for (c, v) in d.active_cells().into_iter().zip(&u.values) {
        full[c] = *v;
    }
    let weight = |x: f64, y: f64| (0.5 * (x * x + y * y)).exp();
    let mut e = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let c = j * d.nx + i;
            let (x, y) = d.center(i, j);
            if i + 1 < d.nx && (d.mask[c] || d.mask[c + 1]) {
                e += weight(x + 0.5 * d.h, y) * (full[c] - full[c + 1]).powi(2);
            }
            if j + 1 < d.ny && (d.mask[c] || d.mask[c + d.nx]) {
                e += weight(x, y + 0.5 * d.h) * (full[c] - full[c + d.nx]).powi(2);
            }
        }
    }
    e
}

/// Compares the raster energy of `u ≥ 0` with the energy of its
/// symmetrization. The rearrangement is averaged over radial bins of width h
/// (m_N-weighted), placed at each bin's measure midpoint, and interpolated
/// linearly down to zero at the radius of Ω★.
pub fn polya_szego_check(u: &GridFunction) -> Result<PolyaSzegoReport> {
    if u.values.iter().any(|v| *v < 0.0) {
        return Err(Error::usage("Pólya–Szegő check needs a nonnegative function"));
    }
    let dim = Dimension::PLANE;
    let h = u.domain.h;
    let star = decreasing_rearrangement(u);
    let outer = dim.big_h_inv(star.total);
    let bins = (outer / h).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(bins + 1);
    let mut values = Vec::with_capacity(bins + 1);
    for k in 0..bins {
        let s0 = dim.big_h(k as f64 * h);
        let s1 = dim.big_h(((k + 1) as f64 * h).min(outer)).min(star.total);
        if !(s1 > s0) {
            break;
        }
        let avg = (star.partial_integral_pow(1.0, s1) - star.partial_integral_pow(1.0, s0)) / (s1 - s0);
        nodes.push(dim.big_h_inv(0.5 * (s0 + s1)));
        values.push(avg);
    }
    nodes.push(outer);
    values.push(0.0);
    let rhs: f64 = nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(r, v)| {
            let slope = (v[1] - v[0]) / (r[1] - r[0]);
            slope * slope * (dim.big_h(r[1]) - dim.big_h(r[0]))
        })
        .sum();
    let lhs = dirichlet_energy(u);
    Ok(PolyaSzegoReport {
        lhs,
        rhs,
        slack: 5.0 * h * lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{rasterize_disks, rasterize_rectangle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(h: f64) -> Arc<RasterDomain> {
        Arc::new(rasterize_disks(&[([0.0, 0.0], 1.0)], h).unwrap())
    }

    fn random_fn(domain: &Arc<RasterDomain>, rng: &mut impl Rng) -> GridFunction {
        let values = (0..domain.active_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        GridFunction::new(domain.clone(), values).unwrap()
    }

    #[test]
    fn distribution_of_constant() {
        let d = disk(1.0 / 16.0);
        let u = GridFunction::from_fn(d.clone(), |_, _| 1.0).unwrap();
        let m = d.weighted_measure();
        assert!((distribution_function(&u, 0.5).unwrap() - m).abs() < 1e-12 * m);
        assert_eq!(distribution_function(&u, 1.0).unwrap(), 0.0);
        assert!(distribution_function(&u, -1.0).is_err());
    }

    #[test]
    fn distribution_jumps_at_values_only() {
        let d = Arc::new(rasterize_rectangle([0.0, 1.0, 0.0, 0.5], 0.125).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_fn(&d, &mut rng);
        let meas = d.cell_measures();
        let mut levels: Vec<f64> = u.values.iter().map(|v| v.abs()).collect();
        levels.sort_by(f64::total_cmp);
        for (k, &t) in levels.iter().enumerate() {
            // Enumeration oracle: direct sum over cells.
            let oracle: f64 = u.values.iter().zip(&meas).filter(|(v, _)| v.abs() > t).map(|(_, m)| m).sum();
            assert_eq!(distribution_function(&u, t).unwrap(), oracle);
            let mid = if k + 1 < levels.len() { 0.5 * (t + levels[k + 1]) } else { t + 1.0 };
            assert_eq!(distribution_function(&u, mid).unwrap(), oracle);
        }
        let star = decreasing_rearrangement(&u);
        for &t in &levels {
            let mu = distribution_function(&u, t).unwrap();
            assert!((star.superlevel_measure(t) - mu).abs() <= 1e-12 * mu.max(1.0));
        }
    }

    #[test]
    fn rearrangement_of_indicator_and_constant() {
        let d = Arc::new(rasterize_rectangle([-0.5, 0.5, -0.5, 0.5], 1.0 / 32.0).unwrap());
        let u = GridFunction::from_fn(d.clone(), |x, _| if x < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let a = u.lp_norm_pow(1.0);
        let star = decreasing_rearrangement(&u);
        assert_eq!(star.values, vec![1.0]);
        assert!((star.breakpoints[1] - a).abs() < 1e-12 * a);
        assert_eq!(star.eval(0.5 * a), 1.0);
        assert_eq!(star.eval(1.01 * a), 0.0);
        let c = GridFunction::from_fn(d.clone(), |_, _| 2.5).unwrap();
        let cs = decreasing_rearrangement(&c);
        assert_eq!(cs.values, vec![2.5]);
        assert!((cs.breakpoints[1] - d.weighted_measure()).abs() < 1e-12 * cs.total);
    }

    #[test]
    fn rearrangement_preserves_norms() {
        let d = disk(1.0 / 32.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let u = random_fn(&d, &mut rng);
            let star = decreasing_rearrangement(&u);
            let sym = symmetrize(&u);
            for p in [1.0, 2.0, 4.0] {
                let a = u.lp_norm_pow(p);
                assert!(((star.integral_pow(p) - a) / a).abs() < 1e-12);
                assert!(((sym.lp_norm_pow(p) - a) / a).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn symmetrized_indicator_is_centered_ball() {
        let d = Arc::new(rasterize_rectangle([0.2, 1.0, -0.3, 0.4], 1.0 / 64.0).unwrap());
        let u = GridFunction::from_fn(d.clone(), |x, y| if x + y > 0.6 { 1.0 } else { 0.0 }).unwrap();
        let a = u.lp_norm_pow(1.0);
        let sym = symmetrize(&u);
        let r = Dimension::PLANE.big_h_inv(a);
        assert_eq!(sym.values, vec![1.0]);
        assert!((sym.radii[1] - r).abs() < 1e-12);
        assert_eq!(sym.eval(0.99 * r), 1.0);
        assert_eq!(sym.eval(1.01 * r), 0.0);
    }

    #[test]
    fn symmetrization_fixes_radial_decreasing_functions() {
        let h = 1.0 / 128.0;
        let d = disk(h);
        let g = |r: f64| (1.0 - r * r).max(0.0);
        let u = GridFunction::from_fn(d.clone(), |x, y| g((x * x + y * y).sqrt())).unwrap();
        let sym = symmetrize(&u);
        for r in [0.1, 0.4, 0.7, 0.9] {
            assert!((sym.eval(r) - g(r)).abs() < 3.0 * h, "r={r}");
        }
    }

    #[test]
    fn hardy_littlewood_cases() {
        let d = disk(1.0 / 8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_fn(&d, &mut rng);
        let (l, r) = hardy_littlewood_check(&u, &u).unwrap();
        assert!((l - r).abs() < 1e-12 * r);
        let one = GridFunction::from_fn(d.clone(), |_, _| 1.0).unwrap();
        let (l, r) = hardy_littlewood_check(&one, &u).unwrap();
        let norm = u.lp_norm_pow(1.0);
        assert!((l - norm).abs() < 1e-12 * norm && (r - norm).abs() < 1e-12 * norm);
        let other = Arc::new(rasterize_disks(&[([0.0, 0.0], 0.5)], 1.0 / 8.0).unwrap());
        let w = GridFunction::from_fn(other, |_, _| 1.0).unwrap();
        assert!(matches!(hardy_littlewood_check(&u, &w), Err(Error::Usage(_))));
    }

    /// `∫u*v* ds = ∫∫ min(μ_u(s), μ_v(t)) ds dt`, enumerated over the level
    /// sets of |u| and |v| directly from the cells.
    fn layer_cake(u: &GridFunction, v: &GridFunction) -> f64 {
        let meas = u.domain.cell_measures();
        let levels = |f: &GridFunction| {
            let mut l: Vec<f64> = f.values.iter().map(|x| x.abs()).collect();
            l.push(0.0);
            l.sort_by(|a, b| b.total_cmp(a));
            l.dedup();
            l
        };
        let mu = |f: &GridFunction, t: f64| -> f64 {
            f.values.iter().zip(&meas).filter(|(x, _)| x.abs() > t).map(|(_, m)| m).sum()
        };
        let (a, b) = (levels(u), levels(v));
        let mut total = 0.0;
        for k in 0..a.len() - 1 {
            let mk = mu(u, a[k + 1]);
            for l in 0..b.len() - 1 {
                total += (a[k] - a[k + 1]) * (b[l] - b[l + 1]) * mk.min(mu(v, b[l + 1]));
            }
        }
        total
    }

    #[test]
    fn hardy_littlewood_random_pairs() {
        let d = Arc::new(rasterize_rectangle([0.0, 1.0, 0.0, 1.0], 0.125).unwrap());
        assert!(d.active_count() <= 64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let u = random_fn(&d, &mut rng);
            let v = random_fn(&d, &mut rng);
            let (l, r) = hardy_littlewood_check(&u, &v).unwrap();
            let oracle = layer_cake(&u, &v);
            assert!((r - oracle).abs() < 1e-11 * oracle, "{r} vs {oracle}");
            assert!(l <= r + 1e-12 * r);
        }
    }

    #[test]
    fn polya_szego_equality_and_strict_cases() {
        let h = 1.0 / 64.0;
        let d = disk(h);
        let u = GridFunction::from_fn(d.clone(), |x, y| (1.0 - x * x - y * y).max(0.0)).unwrap();
        let rep = polya_szego_check(&u).unwrap();
        assert!(rep.holds());
        assert!((rep.rhs - rep.lhs).abs() < 5.0 * h * rep.lhs, "{rep:?}");
        let off = Arc::new(rasterize_disks(&[([0.6, 0.0], 0.5)], h).unwrap());
        let v = GridFunction::from_fn(off, |x, y| (0.25 - (x - 0.6).powi(2) - y * y).max(0.0)).unwrap();
        let rep = polya_szego_check(&v).unwrap();
        assert!(rep.rhs < rep.lhs, "{rep:?}");
        let neg = GridFunction::from_fn(d, |_, _| -1.0).unwrap();
        assert!(polya_szego_check(&neg).is_err());
    }
}
