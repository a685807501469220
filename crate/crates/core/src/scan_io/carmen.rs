//! CARMEN `FLASER` records.
//!
//! Layout: `FLASER n r_1 … r_n x y theta odom_x odom_y odom_theta ts host log_ts`.
//! The beam fan is symmetric about the sensor's x-axis. With an odd beam
//! count the first and last beams sit on the fan edges, so the increment is
//! `fov / (n − 1)`; with an even count it is `fov / n` (180 beams → 1°).

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{Point, Pose2D};

/// One laser sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct LaserScan {
    /// Ordinal of the record in its log, starting at 0.
    pub scan_index: usize,
    pub ranges: Vec<f64>,
    pub angle_min: f64,
    pub angle_increment: f64,
    /// Returns at or beyond this range are invalid.
    pub max_range: f64,
    pub odometry: Option<Pose2D>,
    /// Laser pose as logged. Kept for reference only.
    pub laser_pose: Option<Pose2D>,
    pub timestamp: f64,
}

impl LaserScan {
    pub fn beam_angle(&self, beam: usize) -> f64 {
        self.angle_min + beam as f64 * self.angle_increment
    }

    pub fn is_valid(&self, beam: usize) -> bool {
        let r = self.ranges[beam];
        r.is_finite() && r > 0.0 && r < self.max_range
    }

    /// Valid returns in the sensor frame, in beam order, with their beam
    /// numbers.
    pub fn points(&self) -> Vec<(usize, Point)> {
        (0..self.ranges.len())
            .filter(|&i| self.is_valid(i))
            .map(|i| {
                let (s, c) = self.beam_angle(i).sin_cos();
                let r = self.ranges[i];
                (i, Point::new(r * c, r * s))
            })
            .collect()
    }

    /// Valid returns mapped into the world frame with `pose`.
    pub fn world_points(&self, pose: &Pose2D) -> Vec<Point> {
        self.points()
            .into_iter()
            .map(|(_, p)| pose.transform_point(p))
            .collect()
    }
}

/// Sensor geometry assumed when reading `FLASER` records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarmenOptions {
    pub max_range: f64,
    /// Total angular field of view, radians.
    pub fov: f64,
}

impl Default for CarmenOptions {
    fn default() -> Self {
        Self {
            max_range: 80.0,
            fov: PI,
        }
    }
}

pub(crate) fn angle_increment(beams: usize, fov: f64) -> f64 {
    match beams {
        0 | 1 => fov,
        n if n % 2 == 1 => fov / (n - 1) as f64,
        n => fov / n as f64,
    }
}

fn num(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("non-numeric {what} {tok:?}")))
}

fn parse_flaser(tokens: &[&str], line: usize, scan_index: usize, opts: &CarmenOptions) -> Result<LaserScan> {
    let n: usize = tokens
        .get(1)
        .ok_or_else(|| Error::parse(line, "FLASER record without beam count"))?
        .parse()
        .map_err(|_| Error::parse(line, format!("bad beam count {:?}", tokens[1])))?;
    if n == 0 {
        return Err(Error::parse(line, "FLASER record with zero beams"));
    }
    let expected = n + 11;
    if tokens.len() != expected {
        return Err(Error::parse(
            line,
            format!("FLASER with {n} beams needs {expected} tokens, found {}", tokens.len()),
        ));
    }
    let ranges = tokens[2..2 + n]
        .iter()
        .map(|t| num(t, line, "range"))
        .collect::<Result<Vec<_>>>()?;
    let rest = &tokens[2 + n..];
    let mut f = [0.0; 7];
    for (k, v) in f.iter_mut().enumerate() {
        *v = num(rest[k], line, "pose/timestamp field")?;
    }
    let inc = angle_increment(n, opts.fov);
    Ok(LaserScan {
        scan_index,
        ranges,
        angle_min: -0.5 * inc * (n - 1) as f64,
        angle_increment: inc,
        max_range: opts.max_range,
        laser_pose: Some(Pose2D::new(f[0], f[1], f[2])),
        odometry: Some(Pose2D::new(f[3], f[4], f[5])),
        timestamp: f[6],
    })
}

/// Reads every `FLASER` record in file order; other record types are ignored.
pub fn parse_carmen_log<R: BufRead>(reader: R, opts: &CarmenOptions) -> Result<Vec<LaserScan>> {
    let mut scans = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.first() != Some(&"FLASER") {
            continue;
        }
        scans.push(parse_flaser(&tokens, n + 1, scans.len(), opts)?);
    }
    Ok(scans)
}

pub fn parse_carmen_str(text: &str, opts: &CarmenOptions) -> Result<Vec<LaserScan>> {
    parse_carmen_log(text.as_bytes(), opts)
}

/// Writes scans as `FLASER` records. Invalid returns are written as
/// `max_range`.
pub fn write_carmen_log<W: Write>(scans: &[LaserScan], header: &[String], mut w: W) -> Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    for s in scans {
        write!(w, "FLASER {}", s.ranges.len())?;
        for (i, r) in s.ranges.iter().enumerate() {
            if s.is_valid(i) {
                write!(w, " {r:.6}")?;
            } else {
                write!(w, " {:.6}", s.max_range)?;
            }
        }
        let lp = s.laser_pose.or(s.odometry).unwrap_or_default();
        let od = s.odometry.unwrap_or_default();
        writeln!(
            w,
            " {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} linemerge {:.6}",
            lp.x, lp.y, lp.theta, od.x, od.y, od.theta, s.timestamp, s.timestamp
        )?;
    }
    Ok(())
}

/// Keyframe gate: a scan is kept when the robot has moved more than
/// `min_translation` or turned more than `min_rotation` since the last kept
/// scan. The first scan is always kept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyframeParams {
    pub min_translation: f64,
    pub min_rotation: f64,
}

impl Default for KeyframeParams {
    fn default() -> Self {
        Self {
            min_translation: 0.2,
            min_rotation: 10f64.to_radians(),
        }
    }
}

impl KeyframeParams {
    /// Gate that keeps every scan.
    pub fn all() -> Self {
        Self {
            min_translation: -1.0,
            min_rotation: -1.0,
        }
    }
}

/// Returns the scan indices that pass the keyframe gate.
pub fn select_keyframes<'a>(
    poses: impl IntoIterator<Item = (usize, &'a Pose2D)>,
    params: &KeyframeParams,
) -> Vec<usize> {
    let mut kept = Vec::new();
    let mut last: Option<Pose2D> = None;
    for (idx, pose) in poses {
        let keep = match last {
            None => true,
            Some(prev) => {
                let moved = prev.position().distance(pose.position());
                let turned = crate::geometry::wrap_angle(pose.theta - prev.theta).abs();
                moved > params.min_translation || turned > params.min_rotation
            }
        };
        if keep {
            kept.push(idx);
            last = Some(*pose);
        }
    }
    kept
}
