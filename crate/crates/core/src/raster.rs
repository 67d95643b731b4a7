//! Cell-centered boolean masks over a bounding box in the plane.
//!
//! All rasterizers place cell centers on the global lattice `(k + ½) h`, so
//! masks built at the same `h` are sub-rasters of each other's bounding boxes.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterDomain {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    /// Row-major: cell `(i, j)` at index `j * nx + i`.
    pub mask: Vec<bool>,
}

impl RasterDomain {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, h: f64, mask: Vec<bool>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("cell side must be positive, got {h}")));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::domain("raster origin must be finite"));
        }
        if mask.len() != nx * ny {
            return Err(Error::usage(format!(
                "mask has {} cells, expected {nx} x {ny}",
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Degenerate("raster domain has no active cells".into()));
        }
        Ok(Self { nx, ny, x0, y0, h, mask })
    }

    /// Mask of the cells whose centers satisfy `inside`, over a box covering
    /// `[xmin, xmax] × [ymin, ymax]` padded by two cells and aligned to the
    /// global lattice.
    pub fn from_predicate(
        bbox: [f64; 4],
        h: f64,
        inside: impl Fn(f64, f64) -> bool,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::domain(format!("cell side must be positive, got {h}")));
        }
        let [xmin, xmax, ymin, ymax] = bbox;
        let i0 = (xmin / h).floor() as i64 - 2;
        let i1 = (xmax / h).ceil() as i64 + 2;
        let j0 = (ymin / h).floor() as i64 - 2;
        let j1 = (ymax / h).ceil() as i64 + 2;
        let nx = (i1 - i0) as usize;
        let ny = (j1 - j0) as usize;
        let x0 = i0 as f64 * h;
        let y0 = j0 as f64 * h;
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            let y = y0 + (j as f64 + 0.5) * h;
            for i in 0..nx {
                let x = x0 + (i as f64 + 0.5) * h;
                mask[j * nx + i] = inside(x, y);
            }
        }
        Self::new(nx, ny, x0, y0, h, mask)
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0 + (i as f64 + 0.5) * self.h,
            self.y0 + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.mask[j * self.nx + i]
    }

    /// Linear indices of active cells in row-major order.
    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&c| self.mask[c]).collect()
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Centers of the active cells, in the order of [`Self::active_cells`].
    pub fn active_centers(&self) -> Vec<(f64, f64)> {
        self.active_cells()
            .into_iter()
            .map(|c| self.center(c % self.nx, c / self.nx))
            .collect()
    }

    /// m_N-measures `e^{|x_c|²/2} h²` of the active cells.
    pub fn cell_measures(&self) -> Vec<f64> {
        let h2 = self.h * self.h;
        self.active_centers()
            .into_iter()
            .map(|(x, y)| (0.5 * (x * x + y * y)).exp() * h2)
            .collect()
    }

    pub fn weighted_measure(&self) -> f64 {
        self.cell_measures().iter().sum()
    }

    pub fn lebesgue_area(&self) -> f64 {
        self.active_count() as f64 * self.h * self.h
    }

    /// Largest distance from the origin to an active cell corner.
    pub fn max_radius(&self) -> f64 {
        let hh = 0.5 * self.h;
        self.active_centers()
            .into_iter()
            .map(|(x, y)| ((x.abs() + hh).powi(2) + (y.abs() + hh).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// 4-connected components, each cropped to its own padded bounding box on
    /// the same lattice.
    pub fn components(&self) -> Vec<RasterDomain> {
        let mut label = vec![usize::MAX; self.mask.len()];
        let mut out = Vec::new();
        for start in 0..self.mask.len() {
            if !self.mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut cells = Vec::new();
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(c) = queue.pop_front() {
                cells.push(c);
                let (i, j) = (c % self.nx, c / self.nx);
                let mut visit = |n: usize| {
                    if self.mask[n] && label[n] == usize::MAX {
                        label[n] = id;
                        queue.push_back(n);
                    }
                };
                if i > 0 {
                    visit(c - 1);
                }
                if i + 1 < self.nx {
                    visit(c + 1);
                }
                if j > 0 {
                    visit(c - self.nx);
                }
                if j + 1 < self.ny {
                    visit(c + self.nx);
                }
            }
            out.push(self.crop(&cells));
        }
        out
    }

    fn crop(&self, cells: &[usize]) -> RasterDomain {
        let imin = cells.iter().map(|c| c % self.nx).min().unwrap();
        let imax = cells.iter().map(|c| c % self.nx).max().unwrap();
        let jmin = cells.iter().map(|c| c / self.nx).min().unwrap();
        let jmax = cells.iter().map(|c| c / self.nx).max().unwrap();
        let nx = imax - imin + 5;
        let ny = jmax - jmin + 5;
        let mut mask = vec![false; nx * ny];
        for &c in cells {
            let (i, j) = (c % self.nx - imin + 2, c / self.nx - jmin + 2);
            mask[j * nx + i] = true;
        }
        RasterDomain {
            nx,
            ny,
            x0: self.x0 + (imin as f64 - 2.0) * self.h,
            y0: self.y0 + (jmin as f64 - 2.0) * self.h,
            h: self.h,
            mask,
        }
    }

    /// Parses the text mask format: a header `nx ny x0 y0 h`, then `ny` rows of
    /// `nx` characters from {0, 1}; row j holds cells centered at
    /// `y0 + (j + ½) h`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header needs 5 fields `nx ny x0 y0 h`, found {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: 1,
            msg: format!("invalid {what}"),
        };
        let nx: usize = fields[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = fields[1].parse().map_err(|_| bad("ny"))?;
        let x0: f64 = fields[2].parse().map_err(|_| bad("x0"))?;
        let y0: f64 = fields[3].parse().map_err(|_| bad("y0"))?;
        let h: f64 = fields[4].parse().map_err(|_| bad("h"))?;
        let mut mask = Vec::with_capacity(nx * ny);
        let mut rows = 0;
        for (idx, line) in lines {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if rows == ny {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("more than {ny} rows"),
                });
            }
            if line.chars().count() != nx {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {nx} cells, found {}", line.chars().count()),
                });
            }
            for ch in line.chars() {
                match ch {
                    '0' => mask.push(false),
                    '1' => mask.push(true),
                    other => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            msg: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
            rows += 1;
        }
        if rows != ny {
            return Err(Error::Parse {
                line: rows + 2,
                msg: format!("expected {ny} rows, found {rows}"),
            });
        }
        Self::new(nx, ny, x0, y0, h, mask)
    }

    /// Text form accepted by [`Self::parse`]. Floats use the shortest
    /// round-tripping representation.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.nx + 1) * self.ny + 64);
        writeln!(s, "{} {} {:?} {:?} {:?}", self.nx, self.ny, self.x0, self.y0, self.h).unwrap();
        for j in 0..self.ny {
            for i in 0..self.nx {
                s.push(if self.is_active(i, j) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Union of disks `(center, radius)`.
pub fn rasterize_disks(disks: &[([f64; 2], f64)], h: f64) -> Result<RasterDomain> {
    if disks.is_empty() {
        return Err(Error::usage("no disks to rasterize"));
    }
    if let Some((_, r)) = disks.iter().find(|(_, r)| !(*r > 0.0)) {
        return Err(Error::domain(format!("disk radius must be positive, got {r}")));
    }
    let bbox = disks.iter().fold(
        [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
        |b, (c, r)| [b[0].min(c[0] - r), b[1].max(c[0] + r), b[2].min(c[1] - r), b[3].max(c[1] + r)],
    );
    RasterDomain::from_predicate(bbox, h, |x, y| {
        disks
            .iter()
            .any(|(c, r)| (x - c[0]).powi(2) + (y - c[1]).powi(2) < r * r)
    })
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
pub fn rasterize_rectangle(rect: [f64; 4], h: f64) -> Result<RasterDomain> {
    let [xmin, xmax, ymin, ymax] = rect;
    if !(xmax > xmin && ymax > ymin) {
        return Err(Error::domain("rectangle must have positive side lengths"));
    }
    RasterDomain::from_predicate(rect, h, |x, y| x > xmin && x < xmax && y > ymin && y < ymax)
}

/// Annulus `inner < |x| < outer` centered at the origin.
pub fn rasterize_annulus(inner: f64, outer: f64, h: f64) -> Result<RasterDomain> {
    if !(inner >= 0.0 && outer > inner) {
        return Err(Error::domain(format!("invalid annulus radii {inner}, {outer}")));
    }
    RasterDomain::from_predicate([-outer, outer, -outer, outer], h, |x, y| {
        let r2 = x * x + y * y;
        r2 > inner * inner && r2 < outer * outer
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_area_converges() {
        let h = 1.0 / 128.0;
        let d = rasterize_disks(&[([0.0, 0.0], 1.0)], h).unwrap();
        assert!((d.lebesgue_area() - PI).abs() < 3.0 * h);
        assert_eq!(d.components().len(), 1);
    }

    #[test]
    fn centered_disk_is_symmetric() {
        let d = rasterize_disks(&[([0.0, 0.0], 0.77)], 1.0 / 64.0).unwrap();
        for j in 0..d.ny {
            for i in 0..d.nx {
                assert_eq!(d.is_active(i, j), d.is_active(d.nx - 1 - i, j));
                assert_eq!(d.is_active(i, j), d.is_active(i, d.ny - 1 - j));
            }
        }
    }

    #[test]
    fn components_of_two_disks() {
        let d = rasterize_disks(&[([-1.0, 0.0], 0.5), ([1.0, 0.0], 0.4)], 1.0 / 32.0).unwrap();
        let comps = d.components();
        assert_eq!(comps.len(), 2);
        let total: usize = comps.iter().map(|c| c.active_count()).sum();
        assert_eq!(total, d.active_count());
        let m: f64 = comps.iter().map(|c| c.weighted_measure()).sum();
        assert!((m - d.weighted_measure()).abs() < 1e-12 * m);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(rasterize_disks(&[], 0.1).is_err());
        assert!(matches!(
            RasterDomain::new(2, 2, 0.0, 0.0, 1.0, vec![false; 4]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let d = rasterize_disks(&[([0.3, -0.1], 0.45)], 0.1).unwrap();
        let back = RasterDomain::parse(&d.to_text()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(RasterDomain::parse("2 1 0 0 1\n1x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(RasterDomain::parse("2 2 0 0 1\n11\n"), Err(Error::Parse { .. })));
        assert!(matches!(RasterDomain::parse("2 1 0 0\n11\n"), Err(Error::Parse { line: 1, .. })));
        let d = RasterDomain::parse("3 2 -1.5 -1 1\n010\n111\n").unwrap();
        assert_eq!(d.active_count(), 4);
        assert_eq!(d.center(1, 0), (0.0, -0.5));
    }
}
