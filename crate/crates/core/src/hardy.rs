//! The Hardy weight ρ_N(r) = r^{1-N} e^{-r²/2} / ∫_r^∞ t^{1-N} e^{-t²/2} dt,
//! its minimum point T, and Hardy quotients of radial profiles.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Dimension;
use crate::quad::{adaptive_gk_panels, GaussLegendre};
use crate::radial::RadialProfile;

/// Truncation length of the tail integral beyond r.
const TAIL: f64 = 12.0;

/// `∫_0^{TAIL} (1 + x/r)^{1-N} e^{-rx - x²/2} dx`, which equals
/// `∫_r^∞ t^{1-N} e^{-t²/2} dt / (r^{1-N} e^{-r²/2})` up to a remainder below
/// `e^{-72}`.
fn scaled_tail(dim: Dimension, r: f64) -> f64 {
    let p = 1.0 - dim.as_f64();
    let f = |x: f64| (p * (x / r).ln_1p() - r * x - 0.5 * x * x).exp();
    // Geometric breakpoints resolve both the scale r (algebraic factor) and
    // 1/r (exponential factor).
    let mut breaks = vec![0.0];
    let mut x = 1e-3 * r.min(1.0 / r).min(1.0);
    while x < TAIL {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.push(TAIL);
    adaptive_gk_panels(f, &breaks, 1e-14, 0.0).expect("smooth, bounded integrand")
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("Hardy weight needs r > 0, got {r}")));
    }
    Ok(())
}

/// ρ_N(r) for r > 0.
pub fn rho(dim: Dimension, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(1.0 / scaled_tail(dim, r))
}

/// `∫_r^∞ t^{1-N} e^{-t²/2} dt`.
pub fn tail_integral(dim: Dimension, r: f64) -> Result<f64> {
    check_r(r)?;
    let log_f = (1.0 - dim.as_f64()) * r.ln() - 0.5 * r * r;
    Ok(log_f.exp() * scaled_tail(dim, r))
}

/// Central-difference step used by [`ode_residual`].
pub fn ode_step(r: f64) -> f64 {
    1e-5 * r.min(1.0)
}

/// `|ρ' + (N-1)ρ/r + rρ - ρ²|` with ρ' from a central difference.
pub fn ode_residual(dim: Dimension, r: f64) -> Result<f64> {
    check_r(r)?;
    let dr = ode_step(r);
    let rp = rho(dim, r + dr)?;
    let rm = rho(dim, r - dr)?;
    let p = rho(dim, r)?;
    let deriv = (rp - rm) / (2.0 * dr);
    Ok((deriv + (dim.as_f64() - 1.0) * p / r + r * p - p * p).abs())
}

/// ρ_N together with its minimum point T and minimum value ρ_N(T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyWeight {
    pub dim: Dimension,
    pub t: f64,
    pub rho_t: f64,
}

/// Locates the unique minimum T of ρ_N in [1e-3, 10].
///
/// Unimodality is checked on a 1000-point logarithmic grid, golden-section
/// search narrows the bracket, and the stationarity condition
/// ρ_N(T) = T + (N-1)/T (from the Riccati equation with ρ' = 0) pins T down to
/// full precision.
pub fn find_t(dim: Dimension) -> Result<HardyWeight> {
    let (a, b) = (1e-3f64, 10.0f64);
    let samples = 1000;
    let grid: Vec<f64> = (0..samples)
        .map(|i| a * (b / a).powf(i as f64 / (samples - 1) as f64))
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&r| rho(dim, r)).collect::<Result<_>>()?;
    let imin = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    let decreasing = values[..=imin].windows(2).all(|w| w[1] < w[0]);
    let increasing = values[imin..].windows(2).all(|w| w[1] > w[0]);
    if !decreasing || !increasing || imin == 0 || imin == samples - 1 {
        return Err(Error::Consistency(
            "Hardy weight is not unimodal on [1e-3, 10]".into(),
        ));
    }
    let (mut lo, mut hi) = (grid[imin - 1], grid[imin + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (rho(dim, x1)?, rho(dim, x2)?);
    while hi - lo > 1e-5 * hi {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rho(dim, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rho(dim, x2)?;
        }
    }
    // Widen slightly so the stationarity bracket surely contains T.
    lo *= 0.99;
    hi *= 1.01;
    let n1 = dim.as_f64() - 1.0;
    let stat = |r: f64| rho(dim, r).map(|p| p - r - n1 / r);
    let mut s_lo = stat(lo)?;
    if s_lo.signum() == stat(hi)?.signum() {
        return Err(Error::Consistency("stationarity condition not bracketed".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = stat(mid)?;
        if s.signum() == s_lo.signum() {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(HardyWeight {
        dim,
        t,
        rho_t: rho(dim, t)?,
    })
}

/// ρ_{N,T}: equal to ρ_N below T and to ρ_N(T) beyond.
pub fn rho_truncated(w: &HardyWeight, r: f64) -> Result<f64> {
    check_r(r)?;
    if r < w.t {
        rho(w.dim, r)
    } else {
        Ok(w.rho_t)
    }
}

/// ρ_N at ascending points `xs > 0`. `G = 1/ρ_N` satisfies
/// `G(x) = G(y) e^{φ(y)-φ(x)} + ∫_x^y e^{φ(t)-φ(x)} dt` with `φ = log(t^{1-N} e^{-t²/2})`,
/// which is swept backwards from the last point; gaps too wide for a 6-point
/// rule restart from a direct evaluation.
pub fn rho_many(dim: Dimension, xs: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = xs.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::domain(format!("Hardy weight needs r > 0, got {bad}")));
    }
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::usage("points must be ascending"));
    }
    let n = xs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let p = 1.0 - dim.as_f64();
    let phi = |t: f64| p * t.ln() - 0.5 * t * t;
    let rule = GaussLegendre::new(6);
    let mut g = vec![0.0; n];
    g[n - 1] = scaled_tail(dim, xs[n - 1]);
    for j in (0..n - 1).rev() {
        let (x, y) = (xs[j], xs[j + 1]);
        if x == y {
            g[j] = g[j + 1];
            continue;
        }
        let stiffness = (y - x) * (y - p / x);
        g[j] = if stiffness > 0.5 || (y - x) > 0.1 * x {
            scaled_tail(dim, x)
        } else {
            let px = phi(x);
            g[j + 1] * (phi(y) - px).exp() + rule.integrate(x, y, |t| (phi(t) - px).exp())
        };
    }
    Ok(g.into_iter().map(|v| 1.0 / v).collect())
}

/// How the weight in a Hardy quotient is evaluated.
#[derive(Clone, Copy)]
enum Weight {
    Full,
    Truncated(HardyWeight),
}

/// `∫|u'|² a dr / ∫ u² q² a dr` for the piecewise-linear interpolant of `u`,
/// with `a = r^{N-1} e^{r²/2}` and `q` either ρ_N or ρ_{N,T}.
fn quotient(u: &RadialProfile, weight: Weight) -> Result<f64> {
    let dim = u.dim;
    let nf = dim.as_f64();
    let a = |r: f64| r.powf(nf - 1.0) * (0.5 * r * r).exp();
    let rule = GaussLegendre::new(4);
    let m = rule.nodes.len();
    let cells = u.nodes.len() - 1;
    let first = usize::from(u.nodes[0] == 0.0);
    let mut points = Vec::with_capacity(m * cells);
    let mut weights = Vec::with_capacity(m * cells);
    for i in first..cells {
        for (x, w) in rule.mapped(u.nodes[i], u.nodes[i + 1]) {
            points.push(x);
            weights.push(w);
        }
    }
    let mut q = rho_many(dim, &points)?;
    if let Weight::Truncated(w) = weight {
        for (qi, x) in q.iter_mut().zip(&points) {
            if *x >= w.t {
                *qi = w.rho_t;
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..cells {
        let (x0, x1) = (u.nodes[i], u.nodes[i + 1]);
        let (v0, v1) = (u.values[i], u.values[i + 1]);
        let slope = (v1 - v0) / (x1 - x0);
        num += slope * slope * rule.integrate(x0, x1, a);
        if i < first {
            continue;
        }
        let base = (i - first) * m;
        for k in 0..m {
            let x = points[base + k];
            let v = v0 + (x - x0) * slope;
            den += weights[base + k] * v * v * q[base + k].powi(2) * a(x);
        }
    }
    if first == 1 {
        den += origin_cell(dim, u.nodes[1], u.values[0], u.values[1], weight)?;
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate("Hardy quotient has zero denominator".into()));
    }
    Ok(num / den)
}

/// `∫_0^{x1} v(r)² q(r)² a(r) dr` for linear `v`, after substituting
/// `r = x1 e^{-s}`, `s = σ/(1-σ)`. For N = 2 the integrand decays only like
/// `1/s²`; once `r` underflows the asymptotics
/// `r ρ_2(r) ≈ 1/(log(1/r) + (log 2 - γ)/2)` and `r ρ_N(r) → N-2` take over.
fn origin_cell(dim: Dimension, x1: f64, v0: f64, v1: f64, weight: Weight) -> Result<f64> {
    let nf = dim.as_f64();
    let ln_x1 = x1.ln();
    let euler = 0.577_215_664_901_532_9;
    let c2 = 0.5 * (std::f64::consts::LN_2 - euler);
    let f = |sigma: f64| -> f64 {
        let s = sigma / (1.0 - sigma);
        let jac = 1.0 / ((1.0 - sigma) * (1.0 - sigma));
        let log_r = ln_x1 - s;
        if log_r < -600.0 {
            // r^{N-2} (rρ)² with r below 1e-260.
            return if dim.get() == 2 {
                v0 * v0 / (c2 - log_r).powi(2) * jac
            } else {
                0.0
            };
        }
        let r = log_r.exp();
        let mut q = 1.0 / scaled_tail(dim, r);
        if let Weight::Truncated(w) = weight {
            if r >= w.t {
                q = w.rho_t;
            }
        }
        let v = v0 + (v1 - v0) * r / x1;
        // q² a r = (rq)² r^{N-2} e^{r²/2}
        v * v * (r * q).powi(2) * r.powf(nf - 2.0) * (0.5 * r * r).exp() * jac
    };
    let mut breaks = vec![0.0, 0.5];
    let mut gap = 0.1;
    while gap > 1e-12 {
        breaks.push(1.0 - gap);
        gap *= 0.1;
    }
    breaks.push(1.0);
    adaptive_gk_panels(f, &breaks, 1e-10, 0.0)
}

/// `∫|u'|² dm_N / ∫ u² ρ_{N,T}(|x|)² dm_N` for a radial profile `u`, which
/// is taken to vanish beyond its last node.
pub fn hardy_ratio(w: &HardyWeight, u: &RadialProfile) -> Result<f64> {
    if u.dim != w.dim {
        return Err(Error::usage("profile and Hardy weight have different dimensions"));
    }
    quotient(u, Weight::Truncated(*w))
}

/// Outer end of the grid for the sharpness sequence and start of its cutoff.
pub const SHARPNESS_RADIUS: f64 = 10.0;
pub const SHARPNESS_CUTOFF_START: f64 = 9.0;
const SHARPNESS_NODES: usize = 100_000;

/// ψ_k: constant `F(1/k)^{1/2}` on (0, 1/k), `F(r)^{1/2}` beyond, where
/// `F(r) = ∫_r^∞ t^{1-N} e^{-t²/2} dt`; multiplied by a linear cutoff from 1 at
/// r = 9 to 0 at r = 10. Without the cutoff ψ_k has infinite energy.
pub fn sharpness_profile(dim: Dimension, k: u32) -> Result<RadialProfile> {
    if k == 0 {
        return Err(Error::domain("sharpness index k must be at least 1"));
    }
    let r0 = 1.0 / k as f64;
    let ratio = (SHARPNESS_RADIUS / r0).ln() / (SHARPNESS_NODES - 2) as f64;
    let mut nodes = Vec::with_capacity(SHARPNESS_NODES);
    nodes.push(0.0);
    for i in 0..SHARPNESS_NODES - 1 {
        nodes.push(r0 * (ratio * i as f64).exp());
    }
    *nodes.last_mut().unwrap() = SHARPNESS_RADIUS;
    let rhos = rho_many(dim, &nodes[1..])?;
    let p = 1.0 - dim.as_f64();
    // F = f / ρ with f = r^{1-N} e^{-r²/2}.
    let tail = |r: f64, rho: f64| ((p * r.ln() - 0.5 * r * r).exp() / rho).sqrt();
    let mut values = Vec::with_capacity(nodes.len());
    values.push(tail(r0, rhos[0]));
    for (&r, &q) in nodes[1..].iter().zip(&rhos) {
        let cut = ((SHARPNESS_RADIUS - r) / (SHARPNESS_RADIUS - SHARPNESS_CUTOFF_START)).clamp(0.0, 1.0);
        values.push(tail(r, q) * cut);
    }
    RadialProfile::new(dim, nodes, values)
}

/// ψ_k and its quotient `∫(ψ')² a / ∫ψ² ρ_N² a`.
pub fn sharpness_sequence(dim: Dimension, k: u32) -> Result<(RadialProfile, f64)> {
    let profile = sharpness_profile(dim, k)?;
    let ratio = quotient(&profile, Weight::Full)?;
    Ok((profile, ratio))
}

/// A random compactly supported radial profile: a sum of cubic B-spline bumps
/// supported in [0, 6], sampled on 2000 uniform cells of [0, 8].
pub fn random_profile(dim: Dimension, rng: &mut impl Rng) -> RadialProfile {
    let cells = 2000;
    let nodes: Vec<f64> = (0..=cells).map(|i| 8.0 * i as f64 / cells as f64).collect();
    let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let width = rng.gen_range(0.05..1.0);
            let center = rng.gen_range(0.0..(6.0 - 2.0 * width));
            let amp = rng.gen_range(-1.0..1.0);
            (center, width, amp)
        })
        .collect();
    let values = nodes
        .iter()
        .map(|&r| {
            bumps
                .iter()
                .map(|&(c, w, a)| a * cubic_bspline((r - c) / w))
                .sum()
        })
        .collect();
    RadialProfile { dim, nodes, values }
}

fn cubic_bspline(t: f64) -> f64 {
    let x = t.abs();
    if x >= 2.0 {
        0.0
    } else if x >= 1.0 {
        (2.0 - x).powi(3) / 6.0
    } else {
        (4.0 - 6.0 * x * x + 3.0 * x * x * x) / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    /// E₁(x) by its power series (x ≤ 2) or continued fraction.
    fn expint_e1(x: f64) -> f64 {
        if x <= 2.0 {
            let euler = 0.577_215_664_901_532_9;
            let mut sum = 0.0;
            let mut term = 1.0;
            for k in 1..200 {
                term *= -x / k as f64;
                sum += term / k as f64;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            -euler - x.ln() - sum
        } else {
            // Lentz evaluation of e^{-x} / (x + 1/(1 + 1/(x + 2/(1 + ...)))).
            let mut f = x;
            let tiny = 1e-300;
            let mut c = f;
            let mut dd = 0.0;
            for k in 1..300 {
                let (an, bn) = if k % 2 == 1 { ((k / 2 + 1) as f64, 1.0) } else { ((k / 2) as f64, x) };
                dd = bn + an * dd;
                if dd.abs() < tiny {
                    dd = tiny;
                }
                c = bn + an / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                dd = 1.0 / dd;
                let delta = c * dd;
                f *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            (-x).exp() / f
        }
    }

    fn rho_closed(dim: u32, r: f64) -> f64 {
        let f = r.powi(1 - dim as i32) * (-0.5 * r * r).exp();
        let tail = match dim {
            2 => 0.5 * expint_e1(0.5 * r * r),
            3 => (-0.5 * r * r).exp() / r - (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(r / 2f64.sqrt()),
            _ => unreachable!(),
        };
        f / tail
    }

    #[test]
    fn rho_matches_closed_forms() {
        for dim in [2, 3] {
            for &r in &[0.01, 0.3, 1.0, 2.0, 4.0] {
                let got = rho(d(dim), r).unwrap();
                let exact = rho_closed(dim, r);
                assert!(((got - exact) / exact).abs() < 1e-9, "N={dim} r={r}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn swept_weight_matches_direct_evaluation() {
        for dim in [2, 3, 4] {
            let xs: Vec<f64> = (0..3000).map(|i| 1e-3 * 1.004f64.powi(i)).collect();
            let swept = rho_many(d(dim), &xs).unwrap();
            for (i, x) in xs.iter().enumerate().step_by(97) {
                let direct = rho(d(dim), *x).unwrap();
                assert!(((swept[i] - direct) / direct).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn rho_limits() {
        let r = 1e-6;
        assert!((r * rho(d(3), r).unwrap() - 1.0).abs() < 1e-4);
        let r: f64 = 1e-8;
        assert!((r * (1.0 / r).ln() * rho(d(2), r).unwrap() - 1.0).abs() < 1e-2);
        assert!((rho(d(2), 10.0).unwrap() / 10.0 - 1.0).abs() < 2e-2);
        // ρ_N(r) = r + N/r - 2N/r³ + O(r⁻⁵)
        for n in 2..=4 {
            let r = 30.0;
            let expect = r + n as f64 / r - 2.0 * n as f64 / (r * r * r);
            assert!((rho(d(n), r).unwrap() - expect).abs() < 1e-5);
        }
        assert!(rho(d(2), 0.0).is_err());
    }

    #[test]
    fn ode_residual_bounds() {
        for (dim, r) in [(2, 1.0), (3, 0.1), (3, 5.0)] {
            let p = rho(d(dim), r).unwrap();
            assert!(ode_residual(d(dim), r).unwrap() <= 1e-5 * (1.0 + p * p));
        }
    }

    #[test]
    fn minimum_point_matches_grid_scan() {
        for dim in [2, 3] {
            let w = find_t(d(dim)).unwrap();
            let (a, b) = (1e-3f64, 10.0f64);
            let n = 1_000_000;
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..n {
                let r = a + (b - a) * i as f64 / (n - 1) as f64;
                let v = rho_closed(dim, r);
                if v < best.0 {
                    best = (v, r);
                }
            }
            assert!((w.t - best.1).abs() < 1e-4, "N={dim}: {} vs {}", w.t, best.1);
            let dl = 1e-3;
            assert!(rho(d(dim), w.t - dl).unwrap() > w.rho_t);
            assert!(rho(d(dim), w.t + dl).unwrap() > w.rho_t);
            assert!(rho(d(dim), 1e-4).unwrap() > w.rho_t);
            assert!(rho(d(dim), 10.0).unwrap() > w.rho_t);
        }
    }

    #[test]
    fn truncated_weight() {
        let w = find_t(d(3)).unwrap();
        assert_eq!(rho_truncated(&w, 0.5 * w.t).unwrap(), rho(d(3), 0.5 * w.t).unwrap());
        assert_eq!(rho_truncated(&w, 2.0 * w.t).unwrap(), w.rho_t);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let r: f64 = rng.gen_range(1e-3..20.0);
            let t = rho_truncated(&w, r).unwrap();
            assert!(t > 0.0 && t <= rho(d(3), r).unwrap());
        }
    }

    #[test]
    fn ratio_is_scale_invariant_and_rejects_zero() {
        let w = find_t(d(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_profile(d(2), &mut rng);
        let mut v = u.clone();
        v.values.iter_mut().for_each(|x| *x *= 3.0);
        let (a, b) = (hardy_ratio(&w, &u).unwrap(), hardy_ratio(&w, &v).unwrap());
        assert!(((a - b) / a).abs() < 1e-14);
        let mut z = u.clone();
        z.values.iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(hardy_ratio(&w, &z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn psi_continuous_at_inner_radius() {
        let p = sharpness_profile(d(3), 10).unwrap();
        assert_eq!(p.values[0], p.values[1]);
        let f = tail_integral(d(3), 0.1).unwrap().sqrt();
        assert!((p.eval(0.1) - f).abs() < 1e-12 * f);
    }
}
