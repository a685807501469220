use std::collections::HashSet;

use super::lookup::GridGeometry;
use crate::geometry::{LineSegment, Point};

/// Integer grid coordinates.
pub type Cell = (i64, i64);

/// A segment pixel with its direction bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DirectedPixel {
    pub cell: Cell,
    pub angle_bin: u32,
}

/// Bin of a heading measured counterclockwise from +x, in `[0, 360 / bin_deg)`.
pub fn angle_bin(heading: f64, bin_deg: f64) -> u32 {
    let bins = bin_count(bin_deg);
    let deg = heading.to_degrees().rem_euclid(360.0);
    ((deg / bin_deg + 1e-9).floor() as u32) % bins
}

pub(crate) fn bin_count(bin_deg: f64) -> u32 {
    ((360.0 / bin_deg).round() as u32).max(1)
}

/// Circular distance between two bins.
pub(crate) fn bin_distance(a: u32, b: u32, bins: u32) -> u32 {
    let d = a.abs_diff(b) % bins;
    d.min(bins - d)
}

/// Bresenham pixels of `s`, each tagged with the bin of its heading.
/// Traversal starts from the lexicographically smaller end cell so that a
/// segment and its reverse cover the same cells.
pub fn rasterize_segment(s: &LineSegment, grid: &GridGeometry, bin_deg: f64) -> Vec<DirectedPixel> {
    let angle_bin = angle_bin(s.heading(), bin_deg);
    let a = grid.cell_of(s.start());
    let b = grid.cell_of(s.end());
    let (from, to) = if a <= b { (a, b) } else { (b, a) };
    bresenham(from, to)
        .into_iter()
        .map(|cell| DirectedPixel { cell, angle_bin })
        .collect()
}

fn bresenham(from: Cell, to: Cell) -> Vec<Cell> {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x, y));
        if (x, y) == to {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Cells whose centers lie inside the rectangle spanning `s` lengthwise and
/// `half_width` to either side.
pub fn strip_cells(s: &LineSegment, grid: &GridGeometry, half_width: f64) -> HashSet<Cell> {
    let dir = s.direction();
    let normal = Point::new(-dir.y, dir.x) * half_width;
    let corners = [
        s.start() + normal,
        s.start() - normal,
        s.end() + normal,
        s.end() - normal,
    ];
    let (mut lo, mut hi) = (grid.cell_of(corners[0]), grid.cell_of(corners[0]));
    for c in &corners[1..] {
        let k = grid.cell_of(*c);
        lo = (lo.0.min(k.0), lo.1.min(k.1));
        hi = (hi.0.max(k.0), hi.1.max(k.1));
    }
    let len = s.length();
    let eps = 1e-9 * grid.resolution;
    let mut out = HashSet::new();
    for i in lo.0..=hi.0 {
        for j in lo.1..=hi.1 {
            let v = grid.cell_center((i, j)) - s.start();
            let along = v.dot(dir);
            let across = dir.cross(v).abs();
            if along >= -eps && along <= len + eps && across <= half_width + eps {
                out.insert((i, j));
            }
        }
    }
    out
}
