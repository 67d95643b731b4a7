//! Invariant suites over every module, with a quick variant for interactive
//! use. Each check returns pass/fail with a one-line detail.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{self, FieldSolver};
use crate::hardy;
use crate::measure::{ball_volume, offcenter_ball_volume, radius_of_volume, Dimension};
use crate::radial::{
    ball_spectrum, lambda1_ball, lowest_eigenpairs, sandwich_lower, sandwich_upper, RadialOperatorSpec, DEFAULT_CELLS,
    DEFAULT_TOL,
};
use crate::raster::{rasterize_annulus, rasterize_disks, rasterize_rectangle, RasterDomain};
use crate::rearrange::{self, GridFunction};
use crate::reverse_holder::{self, build_chiti, chiti_constant, grid_norm_ratio};
use crate::shapeopt::{self, BallFamilyConfig, ObjectiveSpec};
use crate::special::dirichlet_bessel_zero;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub quick: bool,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type CheckFn = Box<dyn Fn() -> Result<(bool, String)> + Send + Sync>;

struct Check {
    suite: &'static str,
    name: &'static str,
    run: CheckFn,
}

fn check(suite: &'static str, name: &'static str, run: impl Fn() -> Result<(bool, String)> + Send + Sync + 'static) -> Check {
    Check {
        suite,
        name,
        run: Box::new(run),
    }
}

/// A random planar domain: a union of one to three disks or an axis-aligned
/// rectangle, inside `[-2, 2]²`.
pub fn random_domain(rng: &mut impl Rng, h: f64) -> Result<RasterDomain> {
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(1..=3);
        let disks: Vec<([f64; 2], f64)> = (0..n)
            .map(|_| {
                let r = rng.gen_range(0.35..0.9);
                let c = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
                (c, r)
            })
            .collect();
        rasterize_disks(&disks, h)
    } else {
        let w: f64 = rng.gen_range(0.6..2.0);
        let t: f64 = rng.gen_range(0.6..2.0);
        let x0 = rng.gen_range(-1.5..1.5 - w);
        let y0 = rng.gen_range(-1.5..1.5 - t);
        rasterize_rectangle([x0, x0 + w, y0, y0 + t], h)
    }
}

/// λ₁(Ω) against the centered ball of equal m_N-measure; returns
/// `(λ₁(Ω), λ₁(Ω★))`.
pub fn faber_krahn_pair(domain: &RasterDomain) -> Result<(f64, f64)> {
    let lam = field::eigenpairs(domain, 1, field::DEFAULT_TOL)?.lambdas()[0];
    let star = lambda1_ball(Dimension::PLANE, radius_of_volume(Dimension::PLANE, domain.weighted_measure())?)?;
    Ok((lam, star))
}

fn measure_suite() -> Vec<Check> {
    vec![
        check("measure_geom", "volume_roundtrip", || {
            let mut worst: f64 = 0.0;
            for n in 2..=4 {
                let dim = Dimension::new(n)?;
                for s in [1e-6, 0.3, 1.0, 10.0, 500.0] {
                    let back = ball_volume(dim, radius_of_volume(dim, s)?)?;
                    worst = worst.max(((back - s) / s).abs());
                }
            }
            Ok((worst <= 1e-10, format!("max relative error {worst:.2e}")))
        }),
        check("measure_geom", "offcenter_volume_at_origin", || {
            let mut worst: f64 = 0.0;
            for r in [0.2, 1.0, 2.5] {
                let a = offcenter_ball_volume([0.0, 0.0], r)?;
                let b = ball_volume(Dimension::PLANE, r)?;
                worst = worst.max(((a - b) / b).abs());
            }
            Ok((worst <= 1e-9, format!("max relative difference {worst:.2e}")))
        }),
    ]
}

fn radial_suite(quick: bool) -> Vec<Check> {
    let steps = if quick { 12 } else { 40 };
    vec![
        check("radial_solver", "sandwich", || {
            let mut bad = Vec::new();
            for n in [2, 3] {
                let dim = Dimension::new(n)?;
                for r in [0.5, 1.0, 2.0] {
                    let l = lambda1_ball(dim, r)?;
                    if !(l >= sandwich_lower(dim, r) && l <= sandwich_upper(dim, r)) {
                        bad.push(format!("N={n} R={r}: {l}"));
                    }
                }
            }
            Ok((bad.is_empty(), if bad.is_empty() { "6 cases inside".into() } else { bad.join("; ") }))
        }),
        check("radial_solver", "monotone_sweep", move || {
            let dim = Dimension::PLANE;
            let (a, b) = (0.25f64, 8.0f64);
            let values: Vec<f64> = (0..steps)
                .map(|i| lambda1_ball(dim, a + (b - a) * i as f64 / (steps - 1) as f64))
                .collect::<Result<_>>()?;
            let decreasing = values.windows(2).all(|w| w[1] < w[0]);
            let plateau = *values.last().unwrap();
            Ok((
                decreasing && plateau > 2.0 - 1e-3,
                format!("{steps} samples, plateau {plateau:.9}"),
            ))
        }),
        check("radial_solver", "mode_ordering", || {
            let sp = ball_spectrum(Dimension::PLANE, 1.0, 5, DEFAULT_TOL)?;
            let ells: Vec<Option<u32>> = sp.entries.iter().map(|e| e.ell).collect();
            let ok = sp.count() >= 5 && ells.first() == Some(&Some(0)) && ells.get(1) == Some(&Some(1));
            Ok((ok, format!("ell sequence {ells:?}")))
        }),
    ]
}

fn hardy_suite(quick: bool, seed: u64) -> Vec<Check> {
    let profiles = if quick { 20 } else { 100 };
    let points = if quick { 100 } else { 1000 };
    let ks: Vec<u32> = if quick { vec![10, 100, 1000] } else { vec![10, 100, 1000, 10000] };
    vec![
        check("hardy", "random_profiles", move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<_> = (2..=4).map(|n| hardy::find_t(Dimension::new(n)?)).collect::<Result<_>>()?;
            let mut worst = f64::INFINITY;
            for i in 0..profiles {
                let w = &weights[i % 3];
                let u = hardy::random_profile(w.dim, &mut rng);
                worst = worst.min(hardy::hardy_ratio(w, &u)?);
            }
            Ok((worst >= 0.25 - 1e-6, format!("{profiles} profiles, min ratio {worst:.6}")))
        }),
        check("hardy", "sharpness", move || {
            let ratios: Vec<f64> = ks
                .iter()
                .map(|&k| hardy::sharpness_sequence(Dimension::PLANE, k).map(|p| p.1))
                .collect::<Result<_>>()?;
            let ok = ratios.windows(2).all(|w| w[1] < w[0]) && *ratios.last().unwrap() <= 0.27 && ratios.iter().all(|&r| r >= 0.25 - 1e-6);
            Ok((ok, format!("ratios {ratios:.5?}")))
        }),
        check("hardy", "ode_residual", move || {
            let mut worst: f64 = 0.0;
            for n in 2..=4 {
                let dim = Dimension::new(n)?;
                for i in 0..points {
                    let r = 10f64.powf(-3.0 + 4.0 * i as f64 / (points - 1) as f64);
                    let rho = hardy::rho(dim, r)?;
                    worst = worst.max(hardy::ode_residual(dim, r)?.abs() / (1e-5 * (1.0 + rho * rho)));
                }
            }
            Ok((worst <= 1.0, format!("{points} points per N, worst residual/bound {worst:.2e}")))
        }),
    ]
}

fn rearrange_suite(seed: u64) -> Vec<Check> {
    vec![
        check("rearrange", "hardy_littlewood", move || {
            let d = Arc::new(rasterize_disks(&[([0.3, -0.2], 1.0)], 1.0 / 32.0)?);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
            let mut ok = true;
            let mut worst = f64::INFINITY;
            for _ in 0..10 {
                let n = d.active_count();
                let u = GridFunction::new(d.clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
                let v = GridFunction::new(d.clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
                let (lhs, rhs) = rearrange::hardy_littlewood_check(&u, &v)?;
                ok &= lhs <= rhs * (1.0 + 1e-12);
                worst = worst.min(rhs - lhs);
            }
            Ok((ok, format!("min rhs - lhs {worst:.3e}")))
        }),
        check("rearrange", "polya_szego", || {
            let d = Arc::new(rasterize_rectangle([-0.2, 1.0, -0.6, 0.5], 1.0 / 64.0)?);
            let w = FieldSolver::new(d)?.torsion()?;
            let rep = rearrange::polya_szego_check(&w.w)?;
            Ok((rep.holds(), format!("raster {:.5} vs symmetrized {:.5}", rep.lhs, rep.rhs)))
        }),
    ]
}

fn field_suite(quick: bool, seed: u64) -> Vec<Check> {
    let fk_domains = if quick { 4 } else { 20 };
    let fk_h = if quick { 1.0 / 64.0 } else { 1.0 / 128.0 };
    let mp_trials = if quick { 10 } else { 50 };
    vec![
        check("field_solver_2d", "disk_vs_radial", || {
            let d = rasterize_disks(&[([0.0, 0.0], 1.0)], 1.0 / 256.0)?;
            let l = field::eigenpairs(&d, 1, field::DEFAULT_TOL)?.lambdas()[0];
            let r = lambda1_ball(Dimension::PLANE, 1.0)?;
            let rel = ((l - r) / r).abs();
            Ok((rel <= 5e-3, format!("h=1/256: {l:.6} vs {r:.6}, relative {rel:.2e}")))
        }),
        check("field_solver_2d", "form_consistency", || {
            let d = Arc::new(rasterize_disks(&[([0.2, 0.1], 0.9)], 1.0 / 64.0)?);
            let s = FieldSolver::new(d.clone())?;
            let eig = s.eigenpairs(3, field::DEFAULT_TOL)?;
            let res = s.drift_form_residual(&eig);
            let u = field::drift_form_eigenvalues(&d, 1, field::DEFAULT_TOL)?[0];
            let rel = ((u - eig.lambdas()[0]) / u).abs();
            Ok((res <= 1e-8 && rel <= 5e-3, format!("transform residual {res:.2e}, face-weighted form differs by {rel:.2e}")))
        }),
        check("field_solver_2d", "merged_union", || {
            let h = 1.0 / 32.0;
            let parts = [([-1.0, 0.0], 0.6), ([0.9, 0.3], 0.5)];
            let union = rasterize_disks(&parts, h)?;
            let lam = field::eigenpairs(&union, 4, 1e-10)?.lambdas();
            let mut merged: Vec<f64> = Vec::new();
            for p in union.components() {
                merged.extend(field::eigenpairs(&p, 4, 1e-10)?.lambdas());
            }
            merged.sort_by(f64::total_cmp);
            let gap = lam.iter().zip(&merged).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((gap <= 1e-8, format!("max gap {gap:.2e}")))
        }),
        check("field_solver_2d", "torsion_and_domination", || {
            let h = 1.0 / 64.0;
            let domains = [
                ("disk", rasterize_disks(&[([0.0, 0.0], 1.0)], h)?),
                ("two balls", rasterize_disks(&[([-1.0, 0.0], 0.6), ([0.8, 0.0], 0.5)], h)?),
                ("annulus", rasterize_annulus(0.3, 1.0, h)?),
            ];
            let mut notes = Vec::new();
            let mut ok = true;
            for (name, d) in domains {
                let s = FieldSolver::new(Arc::new(d))?;
                let w = s.torsion()?;
                let rep = s.domination(3, 1e-8)?;
                let worst = rep.entries.iter().map(|e| e.max_violation).fold(f64::NEG_INFINITY, f64::max);
                ok &= w.min() > 0.0 && rep.holds();
                notes.push(format!("{name}: min w {:.2e}, violation {worst:.2e}", w.min()));
            }
            Ok((ok, notes.join("; ")))
        }),
        check("field_solver_2d", "maximum_principle", move || {
            let d = Arc::new(rasterize_disks(&[([-0.9, 0.2], 0.7), ([0.7, -0.1], 0.6)], 1.0 / 64.0)?);
            let rep = FieldSolver::new(d)?.maximum_principle(mp_trials, seed)?;
            Ok((rep.holds(), format!("{} trials, {} violations", rep.trials, rep.violations)))
        }),
        check("field_solver_2d", "faber_krahn_and_floors", move || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfa);
            let j = dirichlet_bessel_zero(2);
            let mut worst = f64::INFINITY;
            let mut ok = true;
            for _ in 0..fk_domains {
                let d = random_domain(&mut rng, fk_h)?;
                let (lam, star) = faber_krahn_pair(&d)?;
                let r_leb = (d.lebesgue_area() / std::f64::consts::PI).sqrt();
                let lower = 1.0 + j * j / (r_leb * r_leb);
                ok &= lam >= star * (1.0 - 5.0 * fk_h) && lam > 2.0 && lam >= lower * (1.0 - 5.0 * fk_h);
                worst = worst.min(lam / star - 1.0);
            }
            Ok((ok, format!("{fk_domains} domains, min λ₁/λ₁(Ω★) - 1 = {worst:.3e}")))
        }),
    ]
}

fn reverse_holder_suite(quick: bool, seed: u64) -> Vec<Check> {
    let lambdas: Vec<f64> = if quick { vec![12.0] } else { vec![8.0, 12.0, 20.0] };
    let domains = if quick { 2 } else { 10 };
    vec![
        check("reverse_holder", "sigma1_cross_check", move || {
            let mut worst: f64 = 0.0;
            for &lam in &lambdas {
                let d = build_chiti(Dimension::PLANE, lam)?;
                worst = worst.max((reverse_holder::sl_sigma1(Dimension::PLANE, d.l_tilde)? - lam).abs());
            }
            Ok((worst <= 1e-4, format!("max |σ₁ - λ| {worst:.2e}")))
        }),
        check("reverse_holder", "ball_equality", || {
            let d = build_chiti(Dimension::PLANE, 12.0)?;
            let spec = RadialOperatorSpec::new(Dimension::PLANE, 0, d.r_tilde, 2 * DEFAULT_CELLS + 1)?;
            let p = &lowest_eigenpairs(&spec, 1, DEFAULT_TOL)?.profiles[0];
            let mut worst: f64 = 0.0;
            for (r, q) in [(1.0, 2.0), (2.0, f64::INFINITY)] {
                let c = chiti_constant(&d, r, q)?;
                let num = if q.is_infinite() { p.values[0] } else { p.lp_norm_pow(q).powf(1.0 / q) };
                let ratio = num / p.lp_norm_pow(r).powf(1.0 / r);
                worst = worst.max((ratio / c - 1.0).abs());
            }
            Ok((worst <= 1e-4, format!("max relative gap {worst:.2e}")))
        }),
        check("reverse_holder", "random_domains", move || {
            let h = 1.0 / 64.0;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc4);
            let mut ok = true;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..domains {
                let dom = random_domain(&mut rng, h)?;
                let eig = field::eigenpairs(&dom, 1, field::DEFAULT_TOL)?;
                let data = build_chiti(Dimension::PLANE, eig.lambdas()[0])?;
                let u = &eig.eigenfunctions[0];
                for (r, q) in [(1.0, 2.0), (2.0, f64::INFINITY)] {
                    let rel = grid_norm_ratio(u, r, q)? / chiti_constant(&data, r, q)? - 1.0;
                    ok &= rel <= 5.0 * h;
                    worst = worst.max(rel);
                }
                let star = rearrange::decreasing_rearrangement(u);
                let star = reverse_holder::normalize_to(&star, &data, 2.0, |p, c| p.scaled(c))?;
                ok &= reverse_holder::concentration_comparison(&star, &data, 2.0, 5.0 * h, 100)?.holds();
            }
            Ok((ok, format!("{domains} domains, max ratio/C - 1 = {worst:.3e}")))
        }),
    ]
}

fn shapeopt_suite() -> Vec<Check> {
    vec![
        check("shapeopt", "projection", || {
            let c = ball_volume(Dimension::PLANE, 1.0)?;
            let cfg = BallFamilyConfig::new(vec![-0.9, 0.9], vec![0.3, 0.3])?;
            let p = shapeopt::project_to_constraint(&cfg, c)?;
            let again = shapeopt::project_to_constraint(&p.config, c)?;
            let each = offcenter_ball_volume([0.9, 0.0], p.config.radii[0])?;
            let drift = p.config.radii.iter().zip(&again.config.radii).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let ok = ((2.0 * each - c) / c).abs() <= 1e-8 && drift <= 1e-10;
            Ok((ok, format!("half-volume error {:.2e}, reprojection drift {drift:.2e}", (each - 0.5 * c) / c)))
        }),
        check("shapeopt", "offcenter_worse_than_centered", || {
            let c = ball_volume(Dimension::PLANE, 1.0)?;
            let spec = ObjectiveSpec::new(1, c, 1.0 / 64.0)?;
            let off = shapeopt::project_to_constraint(&BallFamilyConfig::new(vec![0.5], vec![1.0])?, c)?;
            let a = shapeopt::objective(&off.config, &spec)?;
            let b = shapeopt::objective(&BallFamilyConfig::new(vec![0.0], vec![1.0])?, &spec)?;
            Ok((a > b, format!("offset 0.5: {a:.6}, centered: {b:.6}")))
        }),
        check("shapeopt", "equal_balls_merge", || {
            let c = ball_volume(Dimension::PLANE, 1.0)?;
            let spec = ObjectiveSpec::new(2, c, 1.0 / 64.0)?;
            let p = shapeopt::project_to_constraint(&BallFamilyConfig::new(vec![-0.8, 0.8], vec![1.0, 1.0])?, c)?;
            let l2 = shapeopt::objective(&p.config, &spec)?;
            let l1 = shapeopt::ball_eigenvalues(0.8, p.config.radii[1], 1)?[0];
            Ok(((l2 - l1).abs() <= 1e-6, format!("λ₂(union) - λ₁(ball) = {:.2e}", l2 - l1)))
        }),
    ]
}

/// Runs every suite; `quick` trims sample counts and grid sizes.
pub fn run(quick: bool, seed: u64) -> VerifyReport {
    let mut checks = measure_suite();
    checks.extend(radial_suite(quick));
    checks.extend(hardy_suite(quick, seed));
    checks.extend(rearrange_suite(seed));
    checks.extend(field_suite(quick, seed));
    checks.extend(reverse_holder_suite(quick, seed));
    checks.extend(shapeopt_suite());
    let outcomes = checks
        .par_iter()
        .map(|c| {
            let t = Instant::now();
            let (passed, detail) = match (c.run)() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                suite: c.suite.into(),
                name: c.name.into(),
                passed,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();
    VerifyReport {
        quick,
        seed,
        checks: outcomes,
    }
}
