use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;

/// Poses keyed by scan index, strictly increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    poses: Vec<(usize, Pose2D)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a trajectory, rejecting duplicate or decreasing indices.
    pub fn from_poses(poses: Vec<(usize, Pose2D)>) -> Result<Self> {
        let mut t = Self::new();
        for (i, (idx, pose)) in poses.into_iter().enumerate() {
            t.push(idx, pose).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(i + 1, message),
                other => other,
            })?;
        }
        Ok(t)
    }

    /// Appends a pose. The index must exceed every index already present.
    pub fn push(&mut self, scan_index: usize, pose: Pose2D) -> Result<()> {
        if let Some(&(last, _)) = self.poses.last() {
            if scan_index <= last {
                return Err(Error::parse(
                    self.poses.len() + 1,
                    format!("scan index {scan_index} does not increase (previous {last})"),
                ));
            }
        }
        self.poses
            .push((scan_index, Pose2D::new(pose.x, pose.y, pose.theta)));
        Ok(())
    }

    pub fn pose(&self, scan_index: usize) -> Option<&Pose2D> {
        self.poses
            .binary_search_by_key(&scan_index, |&(i, _)| i)
            .ok()
            .map(|k| &self.poses[k].1)
    }

    pub fn require(&self, scan_index: usize) -> Result<&Pose2D> {
        self.pose(scan_index).ok_or(Error::MissingPose(scan_index))
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Pose2D)> {
        self.poses.iter()
    }

    /// Applies `f` to every pose.
    pub fn map_poses(&self, mut f: impl FnMut(&Pose2D) -> Pose2D) -> Trajectory {
        Trajectory {
            poses: self
                .poses
                .iter()
                .map(|(i, p)| {
                    let q = f(p);
                    (*i, Pose2D::new(q.x, q.y, q.theta))
                })
                .collect(),
        }
    }
}

/// Parses `scanIndex x y theta` records; blank lines and `#` comments are
/// skipped.
pub fn parse_trajectory<R: BufRead>(reader: R) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields `scanIndex x y theta`, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad scan index {:?}", fields[0])))?;
        let mut vals = [0.0; 3];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("bad number {f:?}")))?;
        }
        traj.push(index, Pose2D::new(vals[0], vals[1], vals[2]))
            .map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(line_no, message),
                other => other,
            })?;
    }
    Ok(traj)
}

pub fn parse_trajectory_str(text: &str) -> Result<Trajectory> {
    parse_trajectory(text.as_bytes())
}

/// Writes one `scanIndex x y theta` record per line after optional comment
/// lines.
pub fn write_trajectory<W: Write>(traj: &Trajectory, comments: &[String], mut w: W) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for (i, p) in traj.iter() {
        writeln!(w, "{i} {:.9} {:.9} {:.9}", p.x, p.y, p.theta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let t = parse_trajectory_str("0 0 0 0\n1 0.2 0 0.1").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.pose(1), Some(&Pose2D::new(0.2, 0.0, 0.1)));
        assert_eq!(t.pose(2), None);
    }

    #[test]
    fn comments_only_is_empty() {
        assert!(parse_trajectory_str("# comment").unwrap().is_empty());
        assert!(parse_trajectory_str("").unwrap().is_empty());
    }

    #[test]
    fn theta_is_normalized() {
        let t = parse_trajectory_str("5 1 2 7.0").unwrap();
        let theta = t.pose(5).unwrap().theta;
        assert!((theta - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);
        assert!((theta - 0.717).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_increasing_indices() {
        let err = parse_trajectory_str("0 0 0 0\n0 1 0 0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_trajectory_str("3 0 0 0\n# x\n2 1 0 0").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_malformed_records() {
        assert!(parse_trajectory_str("0 0 0").is_err());
        assert!(parse_trajectory_str("0 a 0 0").is_err());
        assert!(parse_trajectory_str("-1 0 0 0").is_err());
    }

    #[test]
    fn write_then_parse() {
        let t = Trajectory::from_poses(vec![
            (0, Pose2D::new(0.0, 0.0, 0.0)),
            (4, Pose2D::new(1.25, -3.5, 2.0)),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory(&t, &["generated".into()], &mut buf).unwrap();
        let back = parse_trajectory(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        let p = back.pose(4).unwrap();
        assert!((p.x - 1.25).abs() < 1e-9 && (p.theta - 2.0).abs() < 1e-9);
    }
}
