//! Gamma at half-integers, unit-ball volumes and the first Bessel zero.

use std::f64::consts::PI;

/// Γ(k/2) for integer k ≥ 1, by recurrence from Γ(1) = 1 and Γ(1/2) = √π.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1, "gamma_half requires k >= 1");
    let mut x;
    let mut g;
    if k.is_multiple_of(2) {
        x = 1.0;
        g = 1.0;
    } else {
        x = 0.5;
        g = PI.sqrt();
    }
    let target = k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// Lebesgue volume of the unit ball in ℝ^N: π^{N/2} / Γ(N/2 + 1).
pub fn unit_ball_volume(n: u32) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// J_ν(x) for ν = `twice_nu` / 2 ≥ 0 by its power series; accurate for x ≲ 20.
pub fn bessel_j_half_order(twice_nu: u32, x: f64) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powf(nu) / gamma_half(twice_nu + 2);
    let mut sum = term;
    for m in 1..500 {
        let mf = m as f64;
        term *= -q / (mf * (mf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && mf > q.sqrt() {
            break;
        }
    }
    sum
}

/// First positive zero j_{ν,1} of J_ν, ν = `twice_nu` / 2, by scanning for a
/// sign change and bisecting to machine precision.
pub fn bessel_first_zero(twice_nu: u32) -> f64 {
    let nu = twice_nu as f64 / 2.0;
    let mut a = nu.max(0.0) + 0.5;
    let fa0 = bessel_j_half_order(twice_nu, a);
    let mut b = a;
    let mut fb = fa0;
    while fb.signum() == fa0.signum() {
        a = b;
        b += 0.05;
        fb = bessel_j_half_order(twice_nu, b);
    }
    let mut fa = bessel_j_half_order(twice_nu, a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = bessel_j_half_order(twice_nu, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// j_{N/2-1,1}, the first Dirichlet zero governing λ₁^{-Δ} of the unit ball in ℝ^N.
pub fn dirichlet_bessel_zero(n: u32) -> f64 {
    assert!(n >= 2);
    bessel_first_zero(n - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_values() {
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half(10) - 24.0).abs() < 1e-12);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn half_order_bessel_is_elementary() {
        // J_{1/2}(x) = sqrt(2/(πx)) sin x
        for &x in &[0.3, 1.0, 2.5, 4.0] {
            let exact = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j_half_order(1, x) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn first_zeros() {
        assert!((dirichlet_bessel_zero(3) - PI).abs() < 1e-13);
        assert!((dirichlet_bessel_zero(2) - 2.404_825_557_695_773).abs() < 1e-13);
        assert!((dirichlet_bessel_zero(4) - 3.831_705_970_207_512).abs() < 1e-12);
    }
}
