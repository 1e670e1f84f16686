//! Raster cell maps: path-loss-only association over a square grid.

use std::io::Write;

use rayon::prelude::*;

use crate::config::NetworkModel;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, section_index, Deployment, Point2};

pub const MIN_RESOLUTION: usize = 16;
pub const DEFAULT_RESOLUTION: usize = 1024;

/// Side of the default map square, `4/√(πλ)`.
pub fn default_extent(model: &NetworkModel<f64>) -> f64 {
    4.0 * model.cell_radius()
}

/// Station index per grid cell over a square of side `extent` centred on the
/// origin. Row 0 is the bottom edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMap {
    grid: Vec<u32>,
    extent_bits: u64,
    pub resolution: usize,
}

impl CellMap {
    pub fn extent(&self) -> f64 {
        f64::from_bits(self.extent_bits)
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.grid[row * self.resolution + col] as usize
    }

    pub fn cells(&self) -> &[u32] {
        &self.grid
    }

    /// Centre of cell `(row, col)`.
    pub fn centre(&self, row: usize, col: usize) -> Point2 {
        cell_centre(self.extent(), self.resolution, row, col)
    }

    /// Fraction of cells assigned to the same station in both maps.
    pub fn agreement(&self, other: &CellMap) -> Result<f64> {
        if self.resolution != other.resolution || self.extent_bits != other.extent_bits {
            return Err(Error::invalid("maps cover different grids"));
        }
        let same = self.grid.iter().zip(&other.grid).filter(|(a, b)| a == b).count();
        Ok(same as f64 / self.grid.len() as f64)
    }

    /// Cells with a 4-neighbour served by another station, as `(row, col)`.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        let n = self.resolution;
        let mut out = Vec::new();
        for row in 0..n {
            for col in 0..n {
                let s = self.get(row, col);
                let differs = (col + 1 < n && self.get(row, col + 1) != s)
                    || (col > 0 && self.get(row, col - 1) != s)
                    || (row + 1 < n && self.get(row + 1, col) != s)
                    || (row > 0 && self.get(row - 1, col) != s);
                if differs {
                    out.push((row, col));
                }
            }
        }
        out
    }

    /// Binary PGM of station indices, top row first. Uses two bytes per
    /// sample when an index exceeds 255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        let max = self.grid.iter().copied().max().unwrap_or(0).max(1);
        if max > u16::MAX as u32 {
            return Err(Error::invalid(format!("{max} stations exceed the PGM sample range")));
        }
        let n = self.resolution;
        write!(out, "P5\n{n} {n}\n{max}\n")?;
        let mut buf = Vec::with_capacity(n * n * 2);
        for row in (0..n).rev() {
            for &v in &self.grid[row * n..(row + 1) * n] {
                if max > 255 {
                    buf.extend_from_slice(&(v as u16).to_be_bytes());
                } else {
                    buf.push(v as u8);
                }
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    /// `x,y,station` for every boundary cell centre.
    pub fn write_boundary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,station")?;
        for (row, col) in self.boundary() {
            let p = self.centre(row, col);
            writeln!(out, "{},{},{}", p.x, p.y, self.get(row, col))?;
        }
        Ok(())
    }
}

/// `index,x,y` legend for the PGM samples.
pub fn write_legend_csv<W: Write>(dep: &Deployment, mut out: W) -> Result<()> {
    writeln!(out, "index,x,y")?;
    for (i, p) in dep.positions().iter().enumerate() {
        writeln!(out, "{i},{},{}", p.x, p.y)?;
    }
    Ok(())
}

fn cell_centre(extent: f64, resolution: usize, row: usize, col: usize) -> Point2 {
    let step = extent / resolution as f64;
    let half = extent / 2.0;
    Point2::new(-half + (col as f64 + 0.5) * step, -half + (row as f64 + 0.5) * step)
}

fn check(dep: &Deployment, extent: f64, resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!("resolution {resolution} below {MIN_RESOLUTION}")));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid(format!("extent {extent} must be > 0")));
    }
    if dep.is_empty() {
        return Err(Error::invalid("deployment has no stations"));
    }
    if dep.len() > u32::MAX as usize {
        return Err(Error::invalid("too many stations"));
    }
    Ok(())
}

fn build(extent: f64, resolution: usize, score: impl Fn(&Point2) -> u32 + Sync) -> CellMap {
    let grid = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|row| {
            let score = &score;
            (0..resolution).map(move |col| score(&cell_centre(extent, resolution, row, col)))
        })
        .collect();
    CellMap {
        grid,
        extent_bits: extent.to_bits(),
        resolution,
    }
}

/// Assigns each grid cell to the station with the largest path-loss-only
/// received power `P_T r^{−α}`, using the exponent of the section facing the
/// cell. The comparison runs on `−α ln r`, so `P_T` only enters as a common
/// factor. Ties go to the lower index; a cell centred on a station takes
/// that station.
pub fn fractal_cells(dep: &Deployment, model: &NetworkModel<f64>, extent: f64, resolution: usize) -> Result<CellMap> {
    check(dep, extent, resolution)?;
    if !(model.tx_power > 0.0) {
        return Err(Error::invalid("transmit power must be > 0"));
    }
    let sections = dep.sections;
    let uniform: Vec<bool> = (0..dep.len())
        .map(|i| dep.exponents_of(i).windows(2).all(|w| w[0] == w[1]))
        .collect();
    Ok(build(extent, resolution, |p| {
        let mut best = 0u32;
        let mut best_score = f64::NEG_INFINITY;
        for (i, s) in dep.positions().iter().enumerate() {
            let dx = p.x - s.x;
            let dy = p.y - s.y;
            let d2 = dx * dx + dy * dy;
            if d2 == 0.0 {
                return i as u32;
            }
            let alpha = if uniform[i] {
                dep.exponents_of(i)[0]
            } else {
                let bearing = normalize_angle(dy.atan2(dx));
                dep.exponents_of(i)[section_index(bearing, sections)]
            };
            let score = -0.5 * alpha * d2.ln();
            if score > best_score {
                best_score = score;
                best = i as u32;
            }
        }
        best
    }))
}

/// Nearest-station assignment on the same grid.
pub fn voronoi_reference(dep: &Deployment, extent: f64, resolution: usize) -> Result<CellMap> {
    check(dep, extent, resolution)?;
    Ok(build(extent, resolution, |p| {
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (i, s) in dep.positions().iter().enumerate() {
            let d = (p.x - s.x).powi(2) + (p.y - s.y).powi(2);
            if d < best_d {
                best_d = d;
                best = i as u32;
            }
        }
        best
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_deployment, PolarPoint};

    fn two(alpha: [f64; 2], sections: usize) -> Deployment {
        Deployment::from_parts(
            vec![PolarPoint::new(30.0, std::f64::consts::PI), PolarPoint::new(30.0, 0.0)],
            vec![vec![alpha[0]; sections], vec![alpha[1]; sections]],
            200.0,
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_station_owns_everything() {
        let d = Deployment::from_parts(vec![PolarPoint::new(5.0, 1.0)], vec![vec![4.0]], 100.0, 0).unwrap();
        let m = voronoi_reference(&d, 100.0, 32).unwrap();
        assert!(m.cells().iter().all(|&c| c == 0));
        assert!(m.boundary().is_empty());
        let f = fractal_cells(&d, &NetworkModel::default(), 100.0, 32).unwrap();
        assert_eq!(f, m);
    }

    #[test]
    fn equal_exponents_split_on_bisector() {
        let d = two([4.0, 4.0], 1);
        let m = fractal_cells(&d, &NetworkModel::default(), 100.0, 64).unwrap();
        for row in 0..64 {
            for col in 0..64 {
                assert_eq!(m.get(row, col), usize::from(col >= 32));
            }
        }
        assert_eq!(m, voronoi_reference(&d, 100.0, 64).unwrap());
    }

    #[test]
    fn weighted_bisector_matches_power_equality() {
        let d = two([3.0, 4.5], 1);
        let m = fractal_cells(&d, &NetworkModel::default(), 160.0, 128).unwrap();
        let (a, b) = (d.position(0), d.position(1));
        for row in 0..128 {
            for col in 0..128 {
                let p = m.centre(row, col);
                let p0 = -3.0 * p.distance(&a).ln();
                let p1 = -4.5 * p.distance(&b).ln();
                assert_eq!(m.get(row, col), usize::from(p1 > p0), "{p:?}");
            }
        }
        // the smaller exponent wins more area
        let own0 = m.cells().iter().filter(|&&c| c == 0).count();
        assert!(own0 > 128 * 128 / 2);
    }

    #[test]
    fn isotropic_model_reproduces_voronoi() {
        let model = NetworkModel::<f64>::default().with_sections(5);
        let extent = default_extent(&model);
        let dep = sample_deployment(&model, 2.0 * extent, 4).unwrap();
        let f = fractal_cells(&dep, &model, extent, 256).unwrap();
        let v = voronoi_reference(&dep, extent, 256).unwrap();
        assert!(f.agreement(&v).unwrap() >= 0.99);
    }

    #[test]
    fn transmit_power_is_a_common_factor() {
        let model = NetworkModel::<f64>::default().with_sigma(1.0).with_sections(5);
        let extent = default_extent(&model);
        let dep = sample_deployment(&model, 2.0 * extent, 6).unwrap();
        let base = fractal_cells(&dep, &model, extent, 128).unwrap();
        for scale in [1e-3, 7.0, 1e4] {
            let scaled = NetworkModel {
                tx_power: model.tx_power * scale,
                ..model
            };
            assert_eq!(fractal_cells(&dep, &scaled, extent, 128).unwrap(), base);
        }
    }

    #[test]
    fn section_rays_break_the_boundary() {
        // station 0 at the origin with one weak section facing +x
        let mut exps = vec![4.0; 4];
        exps[0] = 5.5;
        let d = Deployment::from_parts(
            vec![PolarPoint::new(0.0, 0.0), PolarPoint::new(60.0, 0.785)],
            vec![exps, vec![4.0; 4]],
            200.0,
            0,
        )
        .unwrap();
        let f = fractal_cells(&d, &NetworkModel::default(), 160.0, 128).unwrap();
        let v = voronoi_reference(&d, 160.0, 128).unwrap();
        assert!(f.agreement(&v).unwrap() < 0.99);
        // cells just above the x axis (section 0) lose, just below (section 3) keep
        let near = |y: f64| f.cells()[((y + 80.0) / 160.0 * 128.0) as usize * 128 + 90];
        assert_eq!(near(-1.0), 0);
        assert_eq!(near(1.0), 1);
    }

    #[test]
    fn rejects_coarse_grids() {
        let d = two([4.0, 4.0], 1);
        assert!(fractal_cells(&d, &NetworkModel::default(), 100.0, 8).is_err());
        assert!(voronoi_reference(&d, 0.0, 32).is_err());
    }

    #[test]
    fn pgm_layout() {
        let d = two([4.0, 4.0], 1);
        let m = voronoi_reference(&d, 100.0, 16).unwrap();
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        let header = b"P5\n16 16\n1\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 256);
        let mut csv = Vec::new();
        m.write_boundary_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 32);
    }
}
