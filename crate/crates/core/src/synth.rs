//! Ray-cast scan generation for walled worlds.
//!
//! A world is a set of walls and a waypoint path. The robot turns in place
//! toward each next waypoint, then drives to it in fixed steps, taking one
//! scan per pose. Odometry is the exact motion corrupted by a heading bias
//! and Gaussian noise, integrated along the path.
//!
//! World files are line oriented:
//!
//! ```text
//! # comment
//! wall x1 y1 x2 y2
//! waypoint x y
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::geometry::{LineSegment, Point, Pose2D};
use crate::scan_io::carmen::angle_increment;
use crate::scan_io::{CarmenOptions, LaserScan, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub walls: Vec<LineSegment>,
    pub waypoints: Vec<Point>,
}

impl World {
    pub fn new(walls: Vec<LineSegment>, waypoints: Vec<Point>) -> Result<Self> {
        if walls.is_empty() {
            return Err(Error::param("world", "no walls"));
        }
        if waypoints.len() < 2 {
            return Err(Error::param("world", "at least two waypoints are required"));
        }
        if waypoints.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("waypoint"));
        }
        Ok(Self { walls, waypoints })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut walls = Vec::new();
        let mut waypoints = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut tok = body.split_whitespace();
            let kind = tok.next().unwrap_or_default();
            let nums = tok
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("non-numeric value {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            match (kind, nums.as_slice()) {
                ("wall", &[x1, y1, x2, y2]) => walls.push(
                    LineSegment::from_coords(x1, y1, x2, y2)
                        .map_err(|e| Error::parse(line, e.to_string()))?,
                ),
                ("waypoint", &[x, y]) => {
                    let p = Point::new(x, y);
                    if !p.is_finite() {
                        return Err(Error::parse(line, "non-finite waypoint"));
                    }
                    waypoints.push(p);
                }
                ("wall", _) => return Err(Error::parse(line, "wall needs 4 numbers")),
                ("waypoint", _) => return Err(Error::parse(line, "waypoint needs 2 numbers")),
                (other, _) => return Err(Error::parse(line, format!("unknown record {other:?}"))),
            }
        }
        World::new(walls, waypoints)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.walls {
            let (a, b) = (w.start(), w.end());
            let _ = writeln!(s, "wall {} {} {} {}", a.x, a.y, b.x, b.y);
        }
        for p in &self.waypoints {
            let _ = writeln!(s, "waypoint {} {}", p.x, p.y);
        }
        s
    }

    /// `"square-room"` or `"loop-corridor"`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "square-room" => Some(Self::square_room()),
            "loop-corridor" => Some(Self::loop_corridor()),
            _ => None,
        }
    }

    /// 6 m room with one cut corner, driven around once.
    pub fn square_room() -> Self {
        let walls = [
            (0.0, 0.0, 6.0, 0.0),
            (6.0, 0.0, 6.0, 5.0),
            (6.0, 5.0, 5.0, 6.0),
            (5.0, 6.0, 0.0, 6.0),
            (0.0, 6.0, 0.0, 0.0),
        ];
        let waypoints = [(1.0, 1.0), (5.0, 1.0), (5.0, 5.0), (1.0, 5.0)];
        build(&walls, &waypoints)
    }

    /// 2 m wide rectangular corridor around a 14 m × 8 m block. The path
    /// returns to its start, then drives a second lap.
    pub fn loop_corridor() -> Self {
        let walls = [
            (-1.0, -1.0, 17.0, -1.0),
            (17.0, -1.0, 17.0, 11.0),
            (17.0, 11.0, -1.0, 11.0),
            (-1.0, 11.0, -1.0, -1.0),
            (1.0, 1.0, 15.0, 1.0),
            (15.0, 1.0, 15.0, 9.0),
            (15.0, 9.0, 1.0, 9.0),
            (1.0, 9.0, 1.0, 1.0),
        ];
        let waypoints = [
            (4.0, 0.0),
            (16.0, 0.0),
            (16.0, 10.0),
            (0.0, 10.0),
            (0.0, 0.0),
            (16.0, 0.0),
            (16.0, 10.0),
            (0.0, 10.0),
            (0.0, 0.0),
            (6.0, 0.0),
        ];
        build(&walls, &waypoints)
    }

    /// Distance along the ray to the nearest wall, if within `max_range`.
    pub fn raycast(&self, origin: Point, angle: f64, max_range: f64) -> Option<f64> {
        let u = Point::unit(angle);
        let mut best: Option<f64> = None;
        for w in &self.walls {
            let e = w.delta();
            let denom = u.cross(e);
            if denom.abs() < 1e-12 {
                continue;
            }
            let ap = w.start() - origin;
            let t = ap.cross(e) / denom;
            let s = ap.cross(u) / denom;
            if t > 1e-9 && (0.0..=1.0).contains(&s) && t <= max_range && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }
}

fn build(walls: &[(f64, f64, f64, f64)], waypoints: &[(f64, f64)]) -> World {
    World {
        walls: walls
            .iter()
            .map(|&(a, b, c, d)| LineSegment::from_coords(a, b, c, d).expect("preset wall"))
            .collect(),
        waypoints: waypoints.iter().map(|&(x, y)| Point::new(x, y)).collect(),
    }
}

/// Odometry error model, applied per step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftParams {
    /// Systematic heading error per meter driven, radians.
    pub heading_bias_per_m: f64,
    /// Relative error of every rotation increment.
    pub turn_scale_error: f64,
    /// Relative standard deviation of the translation increment.
    pub translation_noise: f64,
    /// Heading noise standard deviation per meter or radian of motion.
    pub rotation_noise: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            heading_bias_per_m: 0.002,
            turn_scale_error: 0.0,
            translation_noise: 0.01,
            rotation_noise: 0.002,
        }
    }
}

impl DriftParams {
    pub fn none() -> Self {
        Self {
            heading_bias_per_m: 0.0,
            turn_scale_error: 0.0,
            translation_noise: 0.0,
            rotation_noise: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub beams: usize,
    pub fov: f64,
    /// Returns beyond this distance are reported as invalid.
    pub sensor_range: f64,
    /// Gaussian range noise standard deviation, meters.
    pub range_noise: f64,
    /// Longest straight-line step between scans, meters.
    pub step: f64,
    /// Largest in-place turn between scans, radians.
    pub turn_step: f64,
    pub drift: DriftParams,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            beams: 181,
            fov: PI,
            sensor_range: 8.0,
            range_noise: 0.01,
            step: 0.3,
            turn_step: 15f64.to_radians(),
            drift: DriftParams::default(),
            seed: 7,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.beams < 2 {
            return Err(Error::param("beams", "at least two beams are required"));
        }
        let positive = [
            ("fov", self.fov),
            ("sensor_range", self.sensor_range),
            ("step", self.step),
            ("turn_step", self.turn_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("range_noise", self.range_noise),
            ("translation_noise", self.drift.translation_noise),
            ("rotation_noise", self.drift.rotation_noise),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if !self.drift.heading_bias_per_m.is_finite() {
            return Err(Error::NonFinite("heading_bias_per_m"));
        }
        if !self.drift.turn_scale_error.is_finite() {
            return Err(Error::NonFinite("turn_scale_error"));
        }
        if self.sensor_range >= CarmenOptions::default().max_range {
            return Err(Error::param("sensor_range", "must be below the log's invalid marker"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub scans: Vec<LaserScan>,
    pub exact: Trajectory,
    pub drifted: Trajectory,
    /// First scan back near the start after having left it.
    pub loop_closure: Option<usize>,
}

/// Poses along the waypoint path: turn in place, then drive.
pub fn path_poses(waypoints: &[Point], step: f64, turn_step: f64) -> Vec<Pose2D> {
    let Some((&first, rest)) = waypoints.split_first() else {
        return Vec::new();
    };
    let heading_to = |a: Point, b: Point| (b.y - a.y).atan2(b.x - a.x);
    let mut theta = rest.first().map_or(0.0, |&b| heading_to(first, b));
    let mut poses = vec![Pose2D::new(first.x, first.y, theta)];
    let mut at = first;
    for &next in rest {
        let len = at.distance(next);
        if len < 1e-12 {
            continue;
        }
        let target = heading_to(at, next);
        let turn = crate::geometry::wrap_angle(target - theta);
        let turns = (turn.abs() / turn_step - 1e-9).ceil() as usize;
        for k in 1..=turns {
            poses.push(Pose2D::new(at.x, at.y, theta + turn * k as f64 / turns as f64));
        }
        theta = target;
        let steps = (len / step - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=steps {
            let f = k as f64 / steps as f64;
            let p = at + (next - at) * f;
            poses.push(Pose2D::new(p.x, p.y, theta));
        }
        at = next;
    }
    poses
}

/// Generates scans, exact poses and drifted odometry. Deterministic per seed.
pub fn synthesize(world: &World, params: &SynthParams) -> Result<SynthOutput> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let gauss = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::param("noise", e.to_string()));
    let range_noise = gauss(params.range_noise)?;
    let trans_noise = gauss(params.drift.translation_noise)?;
    let rot_noise = gauss(params.drift.rotation_noise)?;

    let exact = path_poses(&world.waypoints, params.step, params.turn_step);
    let mut drifted = Vec::with_capacity(exact.len());
    for (i, pose) in exact.iter().enumerate() {
        if i == 0 {
            drifted.push(*pose);
            continue;
        }
        let d = exact[i - 1].between(pose);
        let dist = d.x.hypot(d.y);
        let scale = 1.0 + rng.sample(trans_noise);
        let dtheta = d.theta * (1.0 + params.drift.turn_scale_error)
            + params.drift.heading_bias_per_m * dist
            + rng.sample(rot_noise) * (dist + d.theta.abs());
        let noisy = Pose2D::new(d.x * scale, d.y * scale, dtheta);
        drifted.push(drifted[i - 1].compose(&noisy));
    }

    let invalid = CarmenOptions::default().max_range;
    let inc = angle_increment(params.beams, params.fov);
    let angle_min = -0.5 * inc * (params.beams - 1) as f64;
    let scans = exact
        .iter()
        .zip(&drifted)
        .enumerate()
        .map(|(i, (pose, odo))| {
            let ranges = (0..params.beams)
                .map(|b| {
                    let angle = pose.theta + angle_min + b as f64 * inc;
                    match world.raycast(pose.position(), angle, params.sensor_range) {
                        Some(r) => {
                            let noisy = r + rng.sample(range_noise);
                            if noisy > 0.0 && noisy < params.sensor_range {
                                noisy
                            } else {
                                invalid
                            }
                        }
                        None => invalid,
                    }
                })
                .collect();
            LaserScan {
                scan_index: i,
                ranges,
                angle_min,
                angle_increment: inc,
                max_range: invalid,
                odometry: Some(*odo),
                laser_pose: Some(*odo),
                timestamp: i as f64 * 0.1,
            }
        })
        .collect();

    let loop_closure = find_loop_closure(&exact);
    Ok(SynthOutput {
        scans,
        exact: Trajectory::from_poses(exact.into_iter().enumerate().collect())?,
        drifted: Trajectory::from_poses(drifted.into_iter().enumerate().collect())?,
        loop_closure,
    })
}

fn find_loop_closure(poses: &[Pose2D]) -> Option<usize> {
    const LEFT: f64 = 2.0;
    const BACK: f64 = 0.5;
    let start = poses.first()?.position();
    let mut farthest: f64 = 0.0;
    poses.iter().position(|p| {
        let d = p.position().distance(start);
        farthest = farthest.max(d);
        farthest > LEFT && d < BACK
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{extract_segments, ExtractionParams};
    use crate::fusion::heading_deviation;

    #[test]
    fn parse_and_print() {
        let w = World::parse("# room\nwall 0 0 4 0 # floor\n\nwaypoint 1 1\nwaypoint 2 1\n").unwrap();
        assert_eq!(w.walls.len(), 1);
        assert_eq!(World::parse(&w.to_text()).unwrap(), w);
        for bad in [
            "wall 0 0 1\nwaypoint 0 0\nwaypoint 1 1",
            "wall 0 0 0 0\nwaypoint 0 0\nwaypoint 1 1",
            "door 0 0 1 1",
            "wall 0 0 1 0\nwaypoint 0 0",
            "waypoint 0 0\nwaypoint 1 1",
            "wall 0 0 x 0",
        ] {
            assert!(World::parse(bad).is_err(), "{bad}");
        }
        assert!(matches!(World::parse("wall 0 0 1 0\nwall 1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn raycast_hits_nearest_wall() {
        let w = World::square_room();
        let r = w.raycast(Point::new(1.0, 1.0), 0.0, 10.0).unwrap();
        assert!((r - 5.0).abs() < 1e-12);
        let r = w.raycast(Point::new(1.0, 1.0), -PI / 2.0, 10.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(w.raycast(Point::new(1.0, 1.0), 0.0, 4.0).is_none());
        // the cut corner sits on x + y = 11
        let r = w.raycast(Point::new(5.0, 5.0), PI / 4.0, 10.0).unwrap();
        assert!((r - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn path_turns_then_drives() {
        let wps = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)];
        let p = path_poses(&wps, 0.5, 30f64.to_radians());
        // start, 2 steps, 3 turns, 2 steps
        assert_eq!(p.len(), 8);
        assert_eq!(p[2], Pose2D::new(1.0, 0.0, 0.0));
        assert!((p[5].theta - PI / 2.0).abs() < 1e-12);
        assert_eq!(p[7].position(), Point::new(1.0, 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let w = World::square_room();
        let a = synthesize(&w, &SynthParams::default()).unwrap();
        let b = synthesize(&w, &SynthParams::default()).unwrap();
        assert_eq!(a.scans, b.scans);
        assert_eq!(a.drifted, b.drifted);
        let c = synthesize(&w, &SynthParams { seed: 8, ..Default::default() }).unwrap();
        assert_ne!(a.scans, c.scans);
    }

    #[test]
    fn noiseless_walls_are_recovered() {
        let w = World::square_room();
        let params = SynthParams {
            range_noise: 0.0,
            drift: DriftParams::none(),
            ..Default::default()
        };
        let out = synthesize(&w, &params).unwrap();
        assert_eq!(out.exact, out.drifted);
        let ep = ExtractionParams::default();
        let mut checked = 0;
        for scan in &out.scans {
            let pose = out.exact.pose(scan.scan_index).unwrap();
            for s in extract_segments(scan, &ep) {
                let g = s.transformed(pose);
                let wall = w
                    .walls
                    .iter()
                    .min_by(|a, b| {
                        let da = a.general_form().distance(g.center());
                        let db = b.general_form().distance(g.center());
                        da.total_cmp(&db)
                    })
                    .unwrap();
                let line = wall.general_form();
                assert!(
                    line.distance(g.start()) < 0.01 && line.distance(g.end()) < 0.01,
                    "{g:?} vs {wall:?} at {pose:?}: {} {}",
                    line.distance(g.start()),
                    line.distance(g.end())
                );
                let dev = heading_deviation(wall, &g).min(heading_deviation(&wall.reversed(), &g));
                assert!(dev < 0.01);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn loop_corridor_closes() {
        let out = synthesize(&World::loop_corridor(), &SynthParams::default()).unwrap();
        let lc = out.loop_closure.unwrap();
        let start = out.exact.pose(0).unwrap().position();
        assert!(out.exact.pose(lc).unwrap().position().distance(start) < 0.5);
        assert!(lc > out.scans.len() / 3 && lc < out.scans.len() * 2 / 3);
        let drift = out.drifted.pose(lc).unwrap().position().distance(out.exact.pose(lc).unwrap().position());
        assert!(drift > 0.1, "drift {drift}");
        assert!(out.scans.len() >= 200);
    }
}
