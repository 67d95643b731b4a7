//! Geometry of the measure dm_N = e^{|x|²/2} dx: shell density h, centered
//! ball volume H, its inverse, the isoperimetric profile I = h∘H⁻¹ and volumes
//! of off-center planar balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_gk, GaussLegendre};
use crate::special::unit_ball_volume;

/// An m_N-measure value.
pub type WeightedVolume = f64;

/// Ambient dimension N ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub const PLANE: Dimension = Dimension(2);

    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("dimension must be at least 2, got {n}")));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Lebesgue volume ω_N of the unit ball.
    pub fn omega(self) -> f64 {
        unit_ball_volume(self.0)
    }

    /// h(r) = N ω_N e^{r²/2} r^{N-1}, for r ≥ 0.
    pub(crate) fn h(self, r: f64) -> f64 {
        self.as_f64() * self.omega() * (0.5 * r * r).exp() * r.powi(self.0 as i32 - 1)
    }

    /// H(r) = ∫_0^r h, for r ≥ 0.
    pub(crate) fn big_h(self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        if self.0 == 2 {
            return 2.0 * PI * (0.5 * r * r).exp_m1();
        }
        adaptive_gk(|t| self.h(t), 0.0, r, 1e-13).expect("smooth integrand on a finite interval")
    }

    /// H⁻¹(s), for s ≥ 0.
    pub(crate) fn big_h_inv(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if self.0 == 2 {
            return (2.0 * (s / (2.0 * PI)).ln_1p()).sqrt();
        }
        // Bracket by geometric expansion, then safeguarded Newton.
        let mut lo = 0.0;
        let mut hi = 1.0f64;
        while self.big_h(hi) < s {
            lo = hi;
            hi *= 2.0;
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.big_h(r) - s;
            if f.abs() <= 1e-15 * s {
                return r;
            }
            if f > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let newton = r - f / self.h(r);
            r = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        r
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("radius must be finite and nonnegative, got {r}")));
    }
    Ok(())
}

/// Weighted perimeter density of the centered sphere of radius r.
pub fn shell_density(dim: Dimension, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(dim.h(r))
}

/// m_N-volume H(r) of the centered ball of radius r.
pub fn ball_volume(dim: Dimension, r: f64) -> Result<WeightedVolume> {
    check_radius(r)?;
    Ok(dim.big_h(r))
}

/// Radius of the centered ball with m_N-volume `s`.
pub fn radius_of_volume(dim: Dimension, s: WeightedVolume) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("volume must be finite and nonnegative, got {s}")));
    }
    Ok(dim.big_h_inv(s))
}

/// Isoperimetric profile I(s) = h(H⁻¹(s)) of the measure m_N.
pub fn isoperimetric_profile(dim: Dimension, s: WeightedVolume) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("isoperimetric profile needs s > 0, got {s}")));
    }
    Ok(dim.h(dim.big_h_inv(s)))
}

/// ∫_{B(center, rho)} e^{|x|²/2} dx in the plane, by tensor Gauss–Legendre in
/// polar coordinates about the center, refined until two successive rules
/// agree to 1e-10 relative.
pub fn offcenter_ball_volume(center: [f64; 2], rho: f64) -> Result<WeightedVolume> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("ball radius must be positive, got {rho}")));
    }
    let mut n = 64;
    let mut prev = polar_gl_volume(center, rho, n);
    loop {
        n *= 2;
        let next = polar_gl_volume(center, rho, n);
        if (next - prev).abs() <= 1e-10 * next.abs() {
            return Ok(next);
        }
        if n >= 2048 {
            return Err(Error::Convergence {
                what: "off-center ball volume".into(),
                residual: ((next - prev) / next).abs(),
            });
        }
        prev = next;
    }
}

fn polar_gl_volume(center: [f64; 2], rho: f64, n: usize) -> f64 {
    let rule = GaussLegendre::new(n);
    let c2 = center[0] * center[0] + center[1] * center[1];
    let angular: Vec<(f64, f64)> = rule
        .mapped(0.0, 2.0 * PI)
        .map(|(t, w)| (center[0] * t.cos() + center[1] * t.sin(), w))
        .collect();
    rule.mapped(0.0, rho)
        .map(|(r, wr)| {
            let inner: f64 = angular
                .iter()
                .map(|&(proj, wt)| wt * (0.5 * (c2 + 2.0 * r * proj + r * r)).exp())
                .sum();
            wr * r * inner
        })
        .sum()
}
