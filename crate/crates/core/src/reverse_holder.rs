//! Reverse Hölder constants built from the first eigenfunction of a centered
//! ball, the associated Sturm–Liouville problem in the measure variable, and
//! the concentration comparison for rearranged eigenfunctions.
//!
//! For a target eigenvalue λ let `B_r̃` be the centered ball with
//! `λ₁(B_r̃) = λ` and `z̃` its first eigenfunction. Written in the measure
//! variable `s = m_N(B_r)`, `z̃*(s) = z̃(H⁻¹(s))` on `(0, L̃)`, `L̃ = m_N(B_r̃)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Dimension;
use crate::quad::GaussLegendre;
use crate::radial::{find_radius_for_lambda, lowest_eigenpairs, RadialOperatorSpec, RadialProfile, DEFAULT_CELLS, DEFAULT_TOL};
use crate::rearrange::{GridFunction, MeasureProfile};
use crate::tridiag::SymTridiag;

const GL_POINTS: usize = 8;

/// `z̃*` as a function of the measure variable. Integrals are taken in `s`
/// directly: each panel `[H(r_i), H(r_{i+1})]` is mapped back to `r` by a
/// local Newton inversion of `H`.
#[derive(Debug, Clone)]
pub struct MeasureReparam {
    dim: Dimension,
    profile: RadialProfile,
    /// `H(r_i)` at the profile nodes.
    s_nodes: Vec<f64>,
    scale: f64,
}

impl MeasureReparam {
    pub fn new(profile: RadialProfile) -> Self {
        let dim = profile.dim;
        let s_nodes = if dim.get() == 2 {
            profile.nodes.iter().map(|&r| dim.big_h(r)).collect()
        } else {
            let rule = GaussLegendre::new(GL_POINTS);
            let mut acc = vec![0.0; profile.nodes.len()];
            for (i, w) in profile.nodes.windows(2).enumerate() {
                acc[i + 1] = acc[i] + rule.integrate(w[0], w[1], |t| dim.h(t));
            }
            acc
        };
        Self {
            dim,
            profile,
            s_nodes,
            scale: 1.0,
        }
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// The same profile multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    /// `r` with `H(r) = s` inside panel `i`.
    fn radius_in_panel(&self, i: usize, s: f64) -> f64 {
        let (ra, rb) = (self.profile.nodes[i], self.profile.nodes[i + 1]);
        let (sa, sb) = (self.s_nodes[i], self.s_nodes[i + 1]);
        if s <= sa {
            return ra;
        }
        if s >= sb {
            return rb;
        }
        if self.dim.get() == 2 {
            return self.dim.big_h_inv(s);
        }
        let rule = GaussLegendre::new(GL_POINTS);
        let mut r = ra + (rb - ra) * (s - sa) / (sb - sa);
        let (mut lo, mut hi) = (ra, rb);
        for _ in 0..60 {
            let f = sa + rule.integrate(ra, r, |t| self.dim.h(t)) - s;
            let step = f / self.dim.h(r);
            if step.abs() <= 1e-15 * rb {
                return r - step;
            }
            if f > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let next = r - step;
            r = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * rb {
                break;
            }
        }
        r
    }

    fn panel(&self, s: f64) -> usize {
        self.s_nodes.partition_point(|&x| x <= s).saturating_sub(1).min(self.s_nodes.len() - 2)
    }

    fn panel_integral(&self, i: usize, p: f64, upto: f64) -> f64 {
        let rule = GaussLegendre::new(GL_POINTS);
        let sa = self.s_nodes[i];
        let sb = self.s_nodes[i + 1].min(upto);
        if sb <= sa {
            return 0.0;
        }
        let f = |s: f64| (self.scale * self.profile.eval(self.radius_in_panel(i, s))).abs().powf(p);
        if i == 0 {
            // r ~ s^{1/N} at the origin; s = s₁ τ^N makes the integrand smooth.
            let n = self.dim.as_f64();
            let s1 = self.s_nodes[1];
            let tb = (sb / s1).powf(1.0 / n);
            return rule.integrate(0.0, tb, |t| f(s1 * t.powf(n)) * n * s1 * t.powf(n - 1.0));
        }
        rule.integrate(sa, sb, f)
    }

    /// Cumulative `∫_0^{H(r_i)} z̃*^p ds` at every node.
    pub fn cumulative_pow(&self, p: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.s_nodes.len()];
        for i in 0..self.s_nodes.len() - 1 {
            acc[i + 1] = acc[i] + self.panel_integral(i, p, f64::INFINITY);
        }
        acc
    }

    fn partial_from_cumulative(&self, cum: &[f64], p: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.total() {
            return *cum.last().unwrap();
        }
        let i = self.panel(s);
        cum[i] + self.panel_integral(i, p, s)
    }
}

impl MeasureProfile for MeasureReparam {
    fn total(&self) -> f64 {
        *self.s_nodes.last().unwrap()
    }

    fn eval(&self, s: f64) -> f64 {
        if s >= self.total() {
            return 0.0;
        }
        if s <= 0.0 {
            return self.sup();
        }
        let i = self.panel(s);
        self.scale * self.profile.eval(self.radius_in_panel(i, s))
    }

    fn partial_integral_pow(&self, p: f64, s: f64) -> f64 {
        let cum = self.cumulative_pow(p);
        self.partial_from_cumulative(&cum, p, s)
    }

    fn sup(&self) -> f64 {
        self.scale * self.profile.values[0]
    }
}

/// Matched-ball data for a target eigenvalue.
#[derive(Debug, Clone)]
pub struct ChitiData {
    pub dim: Dimension,
    pub lambda: f64,
    pub r_tilde: f64,
    pub l_tilde: f64,
    pub z_star: MeasureReparam,
}

/// Finds `r̃` with `λ₁(B_r̃) = lambda` and the positive, nonincreasing first
/// eigenfunction of `B_r̃`, normalized in L²(m_N).
pub fn build_chiti(dim: Dimension, lambda: f64) -> Result<ChitiData> {
    let r_tilde = find_radius_for_lambda(dim, lambda)?;
    let spec = RadialOperatorSpec::new(dim, 0, r_tilde, DEFAULT_CELLS)?;
    let sol = lowest_eigenpairs(&spec, 1, DEFAULT_TOL)?;
    let profile = sol.profiles.into_iter().next().expect("one eigenpair");
    let v = &profile.values;
    let n = v.len();
    if v[..n - 1].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Consistency("matched-ball eigenfunction is not positive".into()));
    }
    if v.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::Consistency("matched-ball eigenfunction is not nonincreasing".into()));
    }
    let z_star = MeasureReparam::new(profile);
    Ok(ChitiData {
        dim,
        lambda,
        r_tilde,
        l_tilde: z_star.total(),
        z_star,
    })
}

fn check_exponents(r: f64, q: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::usage(format!("exponent r must be positive and finite, got {r}")));
    }
    if !(q > r) {
        return Err(Error::usage(format!("need r < q, got r = {r}, q = {q}")));
    }
    Ok(())
}

/// `‖z̃*‖_q / ‖z̃*‖_r` over `(0, L̃)`; `q = ∞` gives `z̃*(0)`.
pub fn chiti_constant(data: &ChitiData, r: f64, q: f64) -> Result<f64> {
    check_exponents(r, q)?;
    Ok(profile_norm_ratio(&data.z_star, r, q))
}

fn profile_norm_ratio(p: &impl MeasureProfile, r: f64, q: f64) -> f64 {
    let num = if q.is_infinite() {
        p.sup()
    } else {
        p.integral_pow(q).powf(1.0 / q)
    };
    num / p.integral_pow(r).powf(1.0 / r)
}

/// `‖u‖_q / ‖u‖_r` in L^p(m_N) on the raster; `q = ∞` uses the maximum of
/// `|u|`.
pub fn grid_norm_ratio(u: &GridFunction, r: f64, q: f64) -> Result<f64> {
    check_exponents(r, q)?;
    let num = if q.is_infinite() {
        u.sup_abs()
    } else {
        u.lp_norm_pow(q).powf(1.0 / q)
    };
    let den = u.lp_norm_pow(r).powf(1.0 / r);
    if !(den > 0.0) {
        return Err(Error::Degenerate("function vanishes".into()));
    }
    Ok(num / den)
}

/// Number of linear elements used by [`sl_sigma1`] on the coarse grid.
pub const SL_ELEMENTS: usize = 2000;

/// σ₁ at one resolution: linear elements on the mesh `s_i = L (i/n)²` with
/// lumped weighted mass, Dirichlet at 0 and natural condition at `L`.
pub fn sl_sigma1_at(dim: Dimension, l: f64, n: usize) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain(format!("interval length must be positive, got {l}")));
    }
    if n < 4 {
        return Err(Error::usage("need at least 4 elements"));
    }
    let s: Vec<f64> = (0..=n).map(|i| l * (i as f64 / n as f64).powi(2)).collect();
    let r: Vec<f64> = s.iter().map(|&x| dim.big_h_inv(x)).collect();
    let rule = GaussLegendre::new(GL_POINTS);
    // ∫ φ_a φ_b I⁻² ds over an element, computed in r where ds = h dr and
    // I = h, so the weight becomes 1/h(r).
    let mut mass = vec![0.0; n + 1];
    for e in 0..n {
        let (sa, sb) = (s[e], s[e + 1]);
        let (left, right) = rule
            .mapped(r[e], r[e + 1])
            .fold((0.0, 0.0), |(a, b), (x, w)| {
                let t = (dim.big_h(x).clamp(sa, sb) - sa) / (sb - sa);
                let g = w / dim.h(x);
                (a + g * (1.0 - t), b + g * t)
            });
        mass[e] += left;
        mass[e + 1] += right;
    }
    // Unknowns are nodes 1..=n.
    let stiff_d: Vec<f64> = (1..=n)
        .map(|i| 1.0 / (s[i] - s[i - 1]) + if i < n { 1.0 / (s[i + 1] - s[i]) } else { 0.0 })
        .collect();
    let stiff_e: Vec<f64> = (1..n).map(|i| -1.0 / (s[i + 1] - s[i])).collect();
    let m = &mass[1..];
    let d: Vec<f64> = stiff_d.iter().zip(m).map(|(k, mi)| k / mi).collect();
    let e: Vec<f64> = stiff_e
        .iter()
        .enumerate()
        .map(|(i, k)| k / (m[i] * m[i + 1]).sqrt())
        .collect();
    let c = SymTridiag::new(d, e);
    let y = c.eigenvector(c.eigenvalue(1), &[])?;
    let phi: Vec<f64> = y.iter().zip(m).map(|(a, mi)| a / mi.sqrt()).collect();
    // Rayleigh quotient in difference form.
    let mut num = phi[0].powi(2) / (s[1] - s[0]);
    for i in 1..n {
        num += (phi[i] - phi[i - 1]).powi(2) / (s[i + 1] - s[i]);
    }
    let den: f64 = phi.iter().zip(m).map(|(p, mi)| p * p * mi).sum();
    Ok(num / den)
}

/// σ₁(0, L), Richardson-extrapolated from [`SL_ELEMENTS`] and twice as many.
pub fn sl_sigma1(dim: Dimension, l: f64) -> Result<f64> {
    let coarse = sl_sigma1_at(dim, l, SL_ELEMENTS)?;
    let fine = sl_sigma1_at(dim, l, 2 * SL_ELEMENTS)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub q: f64,
    /// Minimum over sampled `s ∈ (0, L̃)` of
    /// `(∫_0^s z̃*^q - ∫_0^s u*^q) / ∫_0^{L̃} z̃*^q`.
    pub worst_margin: f64,
    pub worst_at: f64,
    pub slack: f64,
    pub samples: usize,
}

impl ConcentrationReport {
    pub fn holds(&self) -> bool {
        self.worst_margin >= -self.slack
    }
}

/// Scales `u_star` so that its total q-integral equals that of `z̃*`.
pub fn normalize_to<P: MeasureProfile>(u_star: &P, data: &ChitiData, q: f64, scale: impl Fn(&P, f64) -> P) -> Result<P> {
    let target = data.z_star.integral_pow(q);
    let have = u_star.integral_pow(q);
    if !(have > 0.0) {
        return Err(Error::Degenerate("rearranged profile vanishes".into()));
    }
    Ok(scale(u_star, (target / have).powf(1.0 / q)))
}

/// Checks `∫_0^s u*^q ≤ ∫_0^s z̃*^q` on `(0, L̃)` at `samples` points placed
/// uniformly in `r` (dense near 0 in `s`), allowing a relative `slack`.
pub fn concentration_comparison(
    u_star: &impl MeasureProfile,
    data: &ChitiData,
    q: f64,
    slack: f64,
    samples: usize,
) -> Result<ConcentrationReport> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::usage(format!("q must be positive and finite, got {q}")));
    }
    if samples == 0 {
        return Err(Error::usage("need at least one sample"));
    }
    let z = &data.z_star;
    let cum = z.cumulative_pow(q);
    let total = *cum.last().unwrap();
    let have = u_star.integral_pow(q);
    if ((have - total) / total).abs() > 1e-6 {
        return Err(Error::usage(format!(
            "q-integrals differ ({have} vs {total}); normalize the rearrangement first"
        )));
    }
    let mut worst = f64::INFINITY;
    let mut worst_at = 0.0;
    for i in 1..=samples {
        let r = data.r_tilde * i as f64 / (samples + 1) as f64;
        let s = data.dim.big_h(r);
        let margin = (z.partial_from_cumulative(&cum, q, s) - u_star.partial_integral_pow(q, s)) / total;
        if margin < worst {
            worst = margin;
            worst_at = s;
        }
    }
    Ok(ConcentrationReport {
        q,
        worst_margin: worst,
        worst_at,
        slack,
        samples,
    })
}
