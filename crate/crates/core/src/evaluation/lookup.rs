use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use super::raster::Cell;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scan_io::{LaserScan, Trajectory};

/// Grid placement. Cell `(0, 0)` has its lower-left corner at `origin`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub origin: Point,
    pub resolution: f64,
}

// absorbs representation error so that 0.03 / 0.01 lands in cell 3
const SNAP: f64 = 1e-9;

impl GridGeometry {
    pub fn new(resolution: f64) -> Self {
        Self {
            origin: Point::default(),
            resolution,
        }
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        let f = |v: f64, o: f64| ((v - o) / self.resolution + SNAP).floor() as i64;
        (f(p.x, self.origin.x), f(p.y, self.origin.y))
    }

    pub fn cell_center(&self, c: Cell) -> Point {
        Point::new(
            self.origin.x + (c.0 as f64 + 0.5) * self.resolution,
            self.origin.y + (c.1 as f64 + 0.5) * self.resolution,
        )
    }
}

/// Gaussian-smeared occupancy of registered scan points, stored sparsely.
#[derive(Clone, Debug)]
pub struct LookupTable {
    geometry: GridGeometry,
    sigma: f64,
    cells: HashMap<Cell, f64>,
}

impl LookupTable {
    pub fn new(geometry: GridGeometry, sigma: f64) -> Self {
        Self {
            geometry,
            sigma,
            cells: HashMap::new(),
        }
    }

    /// Smears every valid return of every scan, registered with its pose.
    /// Scans are processed in parallel and combined by cellwise max.
    pub fn build(
        scans: &[LaserScan],
        trajectory: &Trajectory,
        geometry: GridGeometry,
        sigma: f64,
    ) -> Result<Self> {
        check_params(geometry, sigma)?;
        let poses = scans
            .iter()
            .map(|s| trajectory.require(s.scan_index).copied())
            .collect::<Result<Vec<_>>>()?;
        let cells = scans
            .par_iter()
            .zip(poses.par_iter())
            .map(|(scan, pose)| {
                let mut t = LookupTable::new(geometry, sigma);
                for p in scan.world_points(pose) {
                    t.add_point(p);
                }
                t.cells
            })
            .reduce(HashMap::new, merge_max);
        Ok(Self {
            geometry,
            sigma,
            cells,
        })
    }

    pub fn from_points(
        points: impl IntoIterator<Item = Point>,
        geometry: GridGeometry,
        sigma: f64,
    ) -> Result<Self> {
        check_params(geometry, sigma)?;
        let mut t = LookupTable::new(geometry, sigma);
        for p in points {
            if !p.is_finite() {
                return Err(Error::NonFinite("lookup point"));
            }
            t.add_point(p);
        }
        Ok(t)
    }

    /// Raises every cell whose center lies within two standard deviations
    /// of `p` to at least `exp(−d²/2σ²)`.
    pub fn add_point(&mut self, p: Point) {
        let radius = 2.0 * self.sigma;
        let r2 = radius * radius * (1.0 + 1e-12);
        let lo = self.geometry.cell_of(Point::new(p.x - radius, p.y - radius));
        let hi = self.geometry.cell_of(Point::new(p.x + radius, p.y + radius));
        let two_var = 2.0 * self.sigma * self.sigma;
        for i in lo.0 - 1..=hi.0 + 1 {
            for j in lo.1 - 1..=hi.1 + 1 {
                let v = self.geometry.cell_center((i, j)) - p;
                let d2 = v.dot(v);
                if d2 <= r2 {
                    let v = (-d2 / two_var).exp();
                    let slot = self.cells.entry((i, j)).or_insert(0.0);
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Cell value; zero outside the smeared region.
    pub fn value(&self, cell: Cell) -> f64 {
        self.cells.get(&cell).copied().unwrap_or(0.0)
    }

    pub fn value_at(&self, p: Point) -> f64 {
        self.value(self.geometry.cell_of(p))
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn mean_occupied_value(&self) -> Option<f64> {
        if self.cells.is_empty() {
            return None;
        }
        Some(self.cells.values().sum::<f64>() / self.cells.len() as f64)
    }

    /// Inclusive cell bounds of the occupied region.
    pub fn bounds(&self) -> Option<(Cell, Cell)> {
        let mut it = self.cells.keys();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), &(i, j)| {
            ((lo.0.min(i), lo.1.min(j)), (hi.0.max(i), hi.1.max(j)))
        }))
    }

    /// Bounding box of the occupied region in world coordinates.
    pub fn world_bounds(&self) -> Option<(Point, Point)> {
        let (lo, hi) = self.bounds()?;
        let r = self.geometry.resolution;
        let o = self.geometry.origin;
        Some((
            Point::new(o.x + lo.0 as f64 * r, o.y + lo.1 as f64 * r),
            Point::new(o.x + (hi.0 + 1) as f64 * r, o.y + (hi.1 + 1) as f64 * r),
        ))
    }

    /// Binary PGM of the occupied region, darker for higher values, top row
    /// at the largest y.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let Some((lo, hi)) = self.bounds() else {
            writeln!(w, "P5\n1 1\n255")?;
            w.write_all(&[255])?;
            return Ok(());
        };
        let width = (hi.0 - lo.0 + 1) as usize;
        let height = (hi.1 - lo.1 + 1) as usize;
        writeln!(w, "P5\n{width} {height}\n255")?;
        let mut row = vec![0u8; width];
        for j in (lo.1..=hi.1).rev() {
            for (k, i) in (lo.0..=hi.0).enumerate() {
                row[k] = 255 - (self.value((i, j)) * 255.0).round() as u8;
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

fn check_params(geometry: GridGeometry, sigma: f64) -> Result<()> {
    if !(geometry.resolution.is_finite() && geometry.resolution > 0.0) {
        return Err(Error::param("eval.resolution_m", "must be positive"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::param("eval.sigma_m", "must be positive"));
    }
    if !geometry.origin.is_finite() {
        return Err(Error::NonFinite("grid origin"));
    }
    Ok(())
}

fn merge_max(mut a: HashMap<Cell, f64>, b: HashMap<Cell, f64>) -> HashMap<Cell, f64> {
    if a.len() < b.len() {
        return merge_max(b, a);
    }
    for (k, v) in b {
        let slot = a.entry(k).or_insert(0.0);
        if v > *slot {
            *slot = v;
        }
    }
    a
}
