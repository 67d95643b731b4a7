use std::sync::Arc;

use driftlap::field;
use driftlap::raster::{rasterize_disks, RasterDomain};
use driftlap::rearrange::{polya_szego_check, symmetrize, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn paraboloid(h: f64) -> GridFunction {
    let d = Arc::new(rasterize_disks(&[([0.0, 0.0], 1.0)], h).unwrap());
    GridFunction::from_fn(d, |x, y| (1.0 - x * x - y * y).max(0.0)).unwrap()
}

#[test]
fn polya_szego_slack_shrinks_in_equality_case() {
    let gaps: Vec<f64> = [32.0, 64.0, 256.0]
        .iter()
        .map(|&n| {
            let rep = polya_szego_check(&paraboloid(1.0 / n)).unwrap();
            assert!((rep.lhs - rep.rhs).abs() <= 5.0 / n * rep.lhs, "{rep:?}");
            (rep.lhs - rep.rhs).abs()
        })
        .collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn polya_szego_on_random_bumps() {
    let h = 1.0 / 64.0;
    let d = Arc::new(rasterize_disks(&[([0.0, 0.0], 1.2)], h).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let bumps: Vec<([f64; 2], f64, f64)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let c = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                (c, rng.gen_range(0.2..0.6), rng.gen_range(0.5..2.0))
            })
            .collect();
        let u = GridFunction::from_fn(d.clone(), |x, y| {
            bumps
                .iter()
                .map(|&([cx, cy], s, a)| a * (1.0 - ((x - cx).powi(2) + (y - cy).powi(2)) / (s * s)).max(0.0).powi(2))
                .sum()
        })
        .unwrap();
        let rep = polya_szego_check(&u).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }
}

#[test]
fn off_center_eigenfunction_loses_energy() {
    let h = 1.0 / 64.0;
    let d = rasterize_disks(&[([0.7, 0.2], 0.6)], h).unwrap();
    let u = &field::eigenpairs(&d, 1, 1e-9).unwrap().eigenfunctions[0];
    let rep = polya_szego_check(u).unwrap();
    assert!(rep.rhs < rep.lhs, "{rep:?}");
}

#[test]
fn symmetrization_lives_on_ball_of_equal_measure() {
    let d: RasterDomain = rasterize_disks(&[([-0.8, 0.0], 0.5), ([0.9, 0.3], 0.4)], 1.0 / 64.0).unwrap();
    let m = d.weighted_measure();
    let u = GridFunction::from_fn(Arc::new(d), |x, y| 1.0 + x * y).unwrap();
    let star = symmetrize(&u);
    for p in [1.0, 2.0, 4.0] {
        let (a, b) = (u.lp_norm_pow(p), star.lp_norm_pow(p));
        assert!((a - b).abs() <= 1e-10 * a, "p={p}: {a} vs {b}");
    }
    assert!(star.eval(driftlap::measure::radius_of_volume(driftlap::Dimension::PLANE, m).unwrap() + 1e-9) == 0.0);
}
