//! Line segment extraction from a single scan, in the sensor frame.
//!
//! The default extractor is split-and-merge (iterative end-point fit):
//! 1. break the ordered returns wherever consecutive points are more than
//!    `max_point_gap` apart;
//! 2. recursively split each run at the point farthest from the chord
//!    between its end points while that distance exceeds `split_threshold`;
//! 3. merge neighbouring pieces whose union still fits one line;
//! 4. refit each piece by total least squares, drop end points that sit
//!    well off the fit (typically a corner point of the neighbouring wall),
//!    and clip the line to the projections of the remaining end points.
//!
//! Segments are directed in beam order: the lower-angle end is the start.

use crate::error::{Error, Result};
use crate::geometry::{LineSegment, Point};
use crate::scan_io::LaserScan;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractionParams {
    pub min_length: f64,
    pub min_points: usize,
    pub split_threshold: f64,
    pub max_point_gap: f64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            min_length: 0.6,
            min_points: 10,
            split_threshold: 0.05,
            max_point_gap: 0.5,
        }
    }
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_length > 0.0) {
            return Err(Error::param("extraction.min_length_m", "must be positive"));
        }
        if self.min_points < 2 {
            return Err(Error::param("extraction.min_points", "must be at least 2"));
        }
        if !(self.split_threshold > 0.0) {
            return Err(Error::param("extraction.split_threshold_m", "must be positive"));
        }
        if !(self.max_point_gap > 0.0) {
            return Err(Error::param("extraction.max_point_gap_m", "must be positive"));
        }
        Ok(())
    }
}

/// Anything that turns a scan into sensor-frame segments of weight 1,
/// ordered by beam angle.
pub trait SegmentExtractor: Send + Sync {
    fn extract(&self, scan: &LaserScan) -> Vec<LineSegment>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SplitAndMerge {
    pub params: ExtractionParams,
}

impl SplitAndMerge {
    pub fn new(params: ExtractionParams) -> Self {
        Self { params }
    }
}

impl SegmentExtractor for SplitAndMerge {
    fn extract(&self, scan: &LaserScan) -> Vec<LineSegment> {
        extract_segments(scan, &self.params)
    }
}

pub fn extract_segments(scan: &LaserScan, params: &ExtractionParams) -> Vec<LineSegment> {
    let points: Vec<Point> = scan.points().into_iter().map(|(_, p)| p).collect();
    extract_from_points(&points, params)
}

/// Split-and-merge over an ordered point sequence.
pub fn extract_from_points(points: &[Point], params: &ExtractionParams) -> Vec<LineSegment> {
    let mut out = Vec::new();
    let mut run_start = 0;
    for i in 1..=points.len() {
        let boundary = i == points.len() || points[i - 1].distance(points[i]) > params.max_point_gap;
        if boundary {
            extract_run(&points[run_start..i], params, &mut out);
            run_start = i;
        }
    }
    out
}

fn extract_run(run: &[Point], params: &ExtractionParams, out: &mut Vec<LineSegment>) {
    if run.len() < params.min_points.max(2) {
        return;
    }
    let mut pieces = Vec::new();
    split(run, 0, run.len() - 1, params.split_threshold, &mut pieces);
    let pieces = merge_collinear(run, pieces, params.split_threshold);
    for (a, b) in pieces {
        let piece = trim_outlying_ends(&run[a..=b], params.split_threshold);
        if piece.len() < params.min_points {
            continue;
        }
        if let Some(seg) = fit_segment(piece) {
            if seg.length() >= params.min_length {
                out.push(seg);
            }
        }
    }
}

/// Index of the point in `(a, b)` farthest from the chord `a–b`, with its
/// distance.
fn farthest_from_chord(pts: &[Point], a: usize, b: usize) -> Option<(usize, f64)> {
    let (p, q) = (pts[a], pts[b]);
    let d = q - p;
    let len = d.norm();
    (a + 1..b)
        .map(|k| {
            let dist = if len > 0.0 {
                d.cross(pts[k] - p).abs() / len
            } else {
                pts[k].distance(p)
            };
            (k, dist)
        })
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
}

/// Recursive split into inclusive index ranges. Adjacent ranges share their
/// split point.
fn split(pts: &[Point], a: usize, b: usize, threshold: f64, out: &mut Vec<(usize, usize)>) {
    let mut stack = vec![(a, b)];
    let mut leaves = Vec::new();
    while let Some((a, b)) = stack.pop() {
        match farthest_from_chord(pts, a, b) {
            Some((k, d)) if d > threshold => {
                // push right first so the left half is processed first
                stack.push((k, b));
                stack.push((a, k));
            }
            _ => leaves.push((a, b)),
        }
    }
    out.extend(leaves);
}

fn max_residual(pts: &[Point]) -> f64 {
    match line_fit(pts) {
        Some((c, u)) => pts.iter().map(|p| u.cross(*p - c).abs()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

fn merge_collinear(pts: &[Point], pieces: Vec<(usize, usize)>, threshold: f64) -> Vec<(usize, usize)> {
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(pieces.len());
    for (a, b) in pieces {
        if let Some(last) = merged.last_mut() {
            if last.1 == a && max_residual(&pts[last.0..=b]) <= threshold {
                last.1 = b;
                continue;
            }
        }
        merged.push((a, b));
    }
    merged
}

/// Total-least-squares line: centroid and unit direction.
fn line_fit(pts: &[Point]) -> Option<(Point, Point)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let c = pts.iter().fold(Point::default(), |acc, p| acc + *p) * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = *p - c;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    if sxx + syy == 0.0 {
        return None;
    }
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut u = Point::unit(phi);
    if (pts[pts.len() - 1] - pts[0]).dot(u) < 0.0 {
        u = u * -1.0;
    }
    Some((c, u))
}

/// Drops first or last points whose residual exceeds three times the RMS
/// residual of the interior points, with a floor of a tenth of `threshold`.
fn trim_outlying_ends(mut pts: &[Point], threshold: f64) -> &[Point] {
    while pts.len() > 3 {
        let Some((c, u)) = line_fit(pts) else { break };
        let r = |p: Point| u.cross(p - c).abs();
        let interior = &pts[1..pts.len() - 1];
        let rms = (interior.iter().map(|p| r(*p).powi(2)).sum::<f64>() / interior.len() as f64).sqrt();
        let limit = (3.0 * rms).max(0.1 * threshold);
        let (head, tail) = (r(pts[0]), r(pts[pts.len() - 1]));
        if head.max(tail) <= limit {
            break;
        }
        pts = if head >= tail { &pts[1..] } else { &pts[..pts.len() - 1] };
    }
    pts
}

/// Fits a line to `pts` and clips it to the projections of the first and
/// last point.
fn fit_segment(pts: &[Point]) -> Option<LineSegment> {
    let (c, u) = line_fit(pts)?;
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let start = c + u * (first - c).dot(u);
    let end = c + u * (last - c).dot(u);
    LineSegment::new(start, end).ok()
}
