//! Search for minimizers of λ_k over families of disjoint balls with a fixed
//! weighted volume.

use std::cell::Cell;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, offcenter_disk_eigenvalues};
use crate::measure::{ball_volume, offcenter_ball_volume, radius_of_volume, Dimension, WeightedVolume};
use crate::radial::{ball_spectrum, lambda1_ball, DEFAULT_TOL};
use crate::raster::rasterize_annulus;

/// Balls with centers on the x-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamilyConfig {
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
}

impl BallFamilyConfig {
    pub fn new(centers: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::usage("ball family is empty"));
        }
        if centers.len() != radii.len() {
            return Err(Error::usage(format!(
                "{} centers but {} radii",
                centers.len(),
                radii.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(Error::domain(format!("ball radius must be positive, got {r}")));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("ball centers must be finite"));
        }
        Ok(Self { centers, radii })
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// Largest pairwise overlap depth `r_i + r_j - |c_i - c_j|`, with the pair.
    pub fn worst_overlap(&self) -> Option<(usize, usize, f64)> {
        let mut worst: Option<(usize, usize, f64)> = None;
        for i in 0..self.count() {
            for j in i + 1..self.count() {
                let depth = self.radii[i] + self.radii[j] - (self.centers[i] - self.centers[j]).abs();
                if depth > 0.0 && worst.is_none_or(|w| depth > w.2) {
                    worst = Some((i, j, depth));
                }
            }
        }
        worst
    }

    pub fn check_disjoint(&self) -> Result<()> {
        match self.worst_overlap() {
            Some((first, second, depth)) => Err(Error::Overlap { first, second, depth }),
            None => Ok(()),
        }
    }
}

/// Radii at or below this are treated as absent balls.
pub const MIN_RADIUS: f64 = 1e-6;
/// Objective penalty per unit of overlap depth.
pub const OVERLAP_PENALTY: f64 = 1e3;
/// Objective value for configurations with no ball left.
pub const EMPTY_SENTINEL: f64 = 1e6;
pub const MAX_EVALUATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub k: usize,
    pub c: WeightedVolume,
    /// Cell side for rasterized members of the family.
    pub h: f64,
}

impl ObjectiveSpec {
    pub fn new(k: usize, c: WeightedVolume, h: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("volume constraint must be positive, got {c}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("cell side must be positive, got {h}")));
        }
        Ok(Self { k, c, h })
    }
}

/// A configuration scaled onto the volume constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub config: BallFamilyConfig,
    /// Largest overlap depth after scaling (0 when disjoint).
    pub overlap: f64,
}

impl Projection {
    pub fn feasible(&self) -> bool {
        self.overlap <= 0.0
    }
}

fn total_volume(config: &BallFamilyConfig, t: f64) -> Result<f64> {
    config
        .centers
        .iter()
        .zip(&config.radii)
        .map(|(&c, &r)| {
            if c == 0.0 {
                ball_volume(Dimension::PLANE, t * r)
            } else {
                offcenter_ball_volume([c, 0.0], t * r)
            }
        })
        .sum()
}

/// Scales all radii by one factor so the total m_N-volume equals `c`
/// (relative error ≤ 1e-10), keeping the centers.
pub fn project_to_constraint(config: &BallFamilyConfig, c: WeightedVolume) -> Result<Projection> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("volume constraint must be positive, got {c}")));
    }
    let f = |t: f64| total_volume(config, t).map(|v| v - c);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut f_lo = -c;
    let mut f_hi = f(hi)?;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = f(hi)?;
    }
    // Illinois regula falsi on the increasing map t ↦ volume.
    let mut side = 0i32;
    let mut t = hi;
    for _ in 0..200 {
        t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = f(t)?;
        if ft.abs() <= 1e-11 * c || hi - lo <= 1e-15 * hi {
            break;
        }
        if ft < 0.0 {
            lo = t;
            f_lo = ft;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            f_hi = ft;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    let scaled = BallFamilyConfig {
        centers: config.centers.clone(),
        radii: config.radii.iter().map(|r| r * t).collect(),
    };
    let overlap = scaled.worst_overlap().map_or(0.0, |w| w.2);
    Ok(Projection { config: scaled, overlap })
}

/// The first `k` eigenvalues of one ball: radial solver when centered,
/// polar-grid field solver otherwise.
pub fn ball_eigenvalues(center: f64, radius: f64, k: usize) -> Result<Vec<f64>> {
    if center == 0.0 {
        Ok(ball_spectrum(Dimension::PLANE, radius, k, DEFAULT_TOL)?.expanded()[..k].to_vec())
    } else {
        offcenter_disk_eigenvalues([center, 0.0], radius, k)
    }
}

/// k-th eigenvalue of the union: the k-th smallest of the merged component
/// spectra, plus the overlap penalty for infeasible configurations.
pub fn objective(config: &BallFamilyConfig, spec: &ObjectiveSpec) -> Result<f64> {
    let overlap = config.worst_overlap().map_or(0.0, |w| w.2);
    let mut merged: Vec<f64> = config
        .centers
        .par_iter()
        .zip(&config.radii)
        .map(|(&c, &r)| ball_eigenvalues(c, r, spec.k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    merged.sort_by(f64::total_cmp);
    Ok(merged[spec.k - 1] + OVERLAP_PENALTY * overlap)
}

fn decode(x: &[f64]) -> Option<BallFamilyConfig> {
    let (centers, radii): (Vec<f64>, Vec<f64>) = x
        .chunks(2)
        .filter(|p| p[1] > MIN_RADIUS)
        .map(|p| (p[0], p[1]))
        .unzip();
    (!centers.is_empty()).then_some(BallFamilyConfig { centers, radii })
}

fn encode(config: &BallFamilyConfig) -> Vec<f64> {
    config
        .centers
        .iter()
        .zip(&config.radii)
        .flat_map(|(&c, &r)| [c, r])
        .collect()
}

/// Projected objective of a raw parameter vector `[c₁, r₁, c₂, r₂, …]`.
fn evaluate(x: &[f64], spec: &ObjectiveSpec) -> Result<(f64, Option<BallFamilyConfig>)> {
    match decode(x) {
        None => Ok((EMPTY_SENTINEL, None)),
        Some(cfg) => {
            let p = project_to_constraint(&cfg, spec.c)?;
            let v = objective(&p.config, spec)?;
            Ok((v, Some(p.config)))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluations: usize,
    pub best: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    /// Best configuration after projection; absent balls are dropped.
    pub best: BallFamilyConfig,
    pub value: f64,
    pub evaluations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// Nelder–Mead over the centers and radii of `init`, projecting each trial
/// onto the volume constraint. Stops when the spread of simplex values falls
/// below `tol` or after [`MAX_EVALUATIONS`] evaluations.
pub fn nelder_mead(spec: &ObjectiveSpec, init: &BallFamilyConfig, tol: f64) -> Result<SearchResult> {
    if !(tol > 0.0) {
        return Err(Error::usage("tolerance must be positive"));
    }
    let start = project_to_constraint(init, spec.c)?;
    if !start.feasible() {
        return Err(Error::Overlap {
            first: 0,
            second: 1,
            depth: start.overlap,
        });
    }
    let x0 = encode(&start.config);
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..dim {
        let mut x = x0.clone();
        x[i] += if i % 2 == 0 { 0.25 } else { 0.2 * x0[i].abs().max(0.1) };
        simplex.push(x);
    }
    let evals = Cell::new(0usize);
    let eval = |x: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        Ok(evaluate(x, spec)?.0)
    };
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect::<Result<_>>()?;
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(TraceEntry {
            evaluations: evals.get(),
            best: values[0],
        });
        if values[dim] - values[0] < tol {
            converged = true;
            break;
        }
        if evals.get() >= MAX_EVALUATIONS {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|x| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr)?;
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe)?;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
        } else {
            let (xc, fc) = if fr < values[dim] {
                let xc = along(0.5);
                let fc = eval(&xc)?;
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc)?;
                (xc, fc)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = xc;
                values[dim] = fc;
            } else {
                for i in 1..=dim {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    values[i] = eval(&shrunk)?;
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let (value, best) = evaluate(&simplex[0], spec)?;
    let best = best.ok_or_else(|| Error::Degenerate("search removed every ball".into()))?;
    Ok(SearchResult {
        best,
        value,
        evaluations: evals.get(),
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct K2Entry {
    pub name: String,
    pub params: BTreeMap<String, Vec<f64>>,
    pub lambda_k: f64,
}

/// Internal identities checked alongside the experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct K2Identities {
    /// λ₂ of the two-equal-balls union minus λ₁ of one of its balls.
    pub equal_balls_merge_gap: f64,
    /// λ₁ of one of those balls minus λ₁ of the centered ball of volume c/2.
    pub equal_balls_vs_centered_half: f64,
    /// Degree of the spherical harmonic carrying λ₂ of the centered ball.
    pub centered_lambda2_ell: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct K2Report {
    pub experiment: String,
    pub c: f64,
    pub h: f64,
    pub configs: Vec<K2Entry>,
    pub ranked: Vec<String>,
    pub identities: K2Identities,
}

const GOLDEN_STEPS: usize = 40;
const ANNULUS_INNER: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

fn params(pairs: &[(&str, Vec<f64>)]) -> BTreeMap<String, Vec<f64>> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Two balls of volume c/2 centered at `±d`.
fn equal_pair(d: f64, c: f64) -> Result<Projection> {
    project_to_constraint(&BallFamilyConfig::new(vec![-d, d], vec![1.0, 1.0])?, c)
}

/// Smallest offset at which the symmetric equal pair is disjoint.
fn touching_offset(c: f64) -> Result<f64> {
    let gap = |d: f64| -> Result<f64> {
        let p = equal_pair(d, c)?;
        Ok(d - p.config.radii[0])
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    while gap(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    let fa = f(a)?;
    Ok([(a, fa), (x1, f1), (x2, f2)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap())
}

/// λ₂ for the centered ball, two equal balls, two unequal balls and the
/// best of a few centered annuli, all with m_N-volume `c`, ranked.
pub fn experiment_k2(c: WeightedVolume, h: f64) -> Result<K2Report> {
    let spec = ObjectiveSpec::new(2, c, h)?;
    let plane = Dimension::PLANE;
    let mut configs = Vec::new();

    let r_a = radius_of_volume(plane, c)?;
    let sp = ball_spectrum(plane, r_a, 2, DEFAULT_TOL)?;
    let lambda_a = sp.eigenvalue(2).expect("two eigenvalues");
    let ell_a = {
        let mut seen = 0;
        sp.entries.iter().find(|e| {
            seen += e.multiplicity;
            seen >= 2
        })
        .and_then(|e| e.ell)
    };
    configs.push(K2Entry {
        name: "centered_ball".into(),
        params: params(&[("centers", vec![0.0]), ("radii", vec![r_a])]),
        lambda_k: lambda_a,
    });

    let d0 = touching_offset(c)?;
    let (d_best, _) = golden_min(d0, d0 + 2.0, |d| {
        let p = equal_pair(d, c)?;
        objective(&p.config, &spec)
    })?;
    let pair = equal_pair(d_best, c)?;
    let lambda_b = objective(&pair.config, &spec)?;
    let single = ball_eigenvalues(pair.config.centers[1], pair.config.radii[1], 1)?[0];
    let half = lambda1_ball(plane, radius_of_volume(plane, 0.5 * c)?)?;
    configs.push(K2Entry {
        name: "two_equal_balls".into(),
        params: params(&[("centers", pair.config.centers.clone()), ("radii", pair.config.radii.clone())]),
        lambda_k: lambda_b,
    });

    // Start from an asymmetric perturbation of the equal pair, pushed apart
    // until the projected balls are disjoint.
    let mut spread = 0.05;
    let init = loop {
        let cfg = BallFamilyConfig::new(vec![-d_best - spread, d_best + spread], vec![1.15, 0.85])?;
        if project_to_constraint(&cfg, c)?.feasible() {
            break cfg;
        }
        spread += 0.05;
    };
    let search = nelder_mead(&spec, &init, 1e-7)?;
    configs.push(K2Entry {
        name: "two_unequal_balls".into(),
        params: params(&[("centers", search.best.centers.clone()), ("radii", search.best.radii.clone())]),
        lambda_k: search.value,
    });

    let annuli: Vec<(f64, f64, f64)> = ANNULUS_INNER
        .par_iter()
        .map(|&a| {
            let b = radius_of_volume(plane, c + ball_volume(plane, a)?)?;
            let dom = rasterize_annulus(a, b, h)?;
            let l = field::eigenpairs(&dom, 2, field::DEFAULT_TOL)?.lambdas()[1];
            Ok((a, b, l))
        })
        .collect::<Result<_>>()?;
    let (a, b, lambda_d) = annuli
        .into_iter()
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .expect("nonempty scan");
    configs.push(K2Entry {
        name: "centered_annulus".into(),
        params: params(&[("inner_radius", vec![a]), ("outer_radius", vec![b])]),
        lambda_k: lambda_d,
    });

    let mut ranked: Vec<&K2Entry> = configs.iter().collect();
    ranked.sort_by(|p, q| p.lambda_k.total_cmp(&q.lambda_k));
    let ranked = ranked.into_iter().map(|e| e.name.clone()).collect();
    Ok(K2Report {
        experiment: "k2".into(),
        c,
        h,
        configs,
        ranked,
        identities: K2Identities {
            equal_balls_merge_gap: lambda_b - single,
            equal_balls_vs_centered_half: single - half,
            centered_lambda2_ell: ell_a,
        },
    })
}
