use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::mapper::{CorrespondenceStore, GlobalMap};
use crate::scan_io::Trajectory;

/// Mean offset of original centers from their final lines.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// Pooled mean over all originals, in meters.
    pub e: f64,
    /// Number of final segments.
    pub segments: usize,
    /// Number of originals.
    pub originals: usize,
    /// `(map index, mean offset of its originals)`.
    pub per_segment: Vec<(usize, f64)>,
}

/// Per final segment: sum of `w_dist · offset + w_ang · |Δheading|` over its
/// originals, and their count.
fn deviations(
    map: &GlobalMap,
    store: &CorrespondenceStore,
    trajectory: &Trajectory,
    w_dist: f64,
    w_ang: f64,
) -> Result<Vec<(usize, f64, usize)>> {
    if map.is_empty() {
        return Err(Error::EmptyMap);
    }
    map.iter()
        .map(|(i, fin)| {
            let subset = store.get(i).ok_or(Error::MissingSubset(i))?;
            let line = fin.general_form();
            let mut sum = 0.0;
            for o in subset {
                let g = o.to_global(trajectory)?;
                let d = line.distance(g.center());
                let a = wrap_angle(g.heading() - fin.heading()).abs();
                sum += w_dist * d + w_ang * a;
            }
            Ok((i, sum, subset.len()))
        })
        .collect()
}

/// Offsets of every original's center from the infinite line of its final
/// segment, averaged over all originals at once.
pub fn error_metric(
    map: &GlobalMap,
    store: &CorrespondenceStore,
    trajectory: &Trajectory,
) -> Result<ErrorReport> {
    let dev = deviations(map, store, trajectory, 1.0, 0.0)?;
    let total: f64 = dev.iter().map(|d| d.1).sum();
    let originals: usize = dev.iter().map(|d| d.2).sum();
    Ok(ErrorReport {
        e: if originals == 0 { 0.0 } else { total / originals as f64 },
        segments: dev.len(),
        originals,
        per_segment: dev
            .iter()
            .map(|&(i, s, k)| (i, if k == 0 { 0.0 } else { s / k as f64 }))
            .collect(),
    })
}

/// Weighted sum of center offset and heading deviation, averaged over all
/// originals.
pub fn distance_metric(
    map: &GlobalMap,
    store: &CorrespondenceStore,
    trajectory: &Trajectory,
    w_dist: f64,
    w_ang: f64,
) -> Result<f64> {
    let dev = deviations(map, store, trajectory, w_dist, w_ang)?;
    let total: f64 = dev.iter().map(|d| d.1).sum();
    let originals: usize = dev.iter().map(|d| d.2).sum();
    Ok(if originals == 0 { 0.0 } else { total / originals as f64 })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::{LineSegment, Pose2D};
    use crate::mapper::OriginalSegment;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> LineSegment {
        LineSegment::from_coords(x1, y1, x2, y2).unwrap()
    }

    fn orig(s: LineSegment, id: u64) -> OriginalSegment {
        OriginalSegment {
            segment: s,
            pose_index: 0,
            ordinal: id as usize,
            id,
        }
    }

    fn identity() -> Trajectory {
        Trajectory::from_poses(vec![(0, Pose2D::identity())]).unwrap()
    }

    fn setup(finals: Vec<LineSegment>, subsets: Vec<Vec<LineSegment>>) -> (GlobalMap, CorrespondenceStore) {
        let map = GlobalMap::from_segments(finals.into_iter().enumerate(), None).unwrap();
        let mut id = 0;
        let store = CorrespondenceStore::from_subsets(
            subsets
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let v = v
                        .into_iter()
                        .map(|s| {
                            id += 1;
                            orig(s, id)
                        })
                        .collect();
                    (i, v)
                })
                .collect::<BTreeMap<_, _>>(),
        );
        (map, store)
    }

    #[test]
    fn originals_on_line_give_zero() {
        let (m, s) = setup(
            vec![seg(0.0, 0.0, 4.0, 0.0)],
            vec![vec![seg(0.0, 0.0, 1.0, 0.0), seg(7.0, 0.0, 9.0, 0.0)]],
        );
        assert_eq!(error_metric(&m, &s, &identity()).unwrap().e, 0.0);
        assert_eq!(distance_metric(&m, &s, &identity(), 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn offsets_average() {
        let (m, s) = setup(
            vec![seg(0.0, 0.0, 4.0, 0.0)],
            vec![vec![seg(0.0, 0.01, 1.0, 0.01), seg(0.0, -0.03, 2.0, -0.03)]],
        );
        let r = error_metric(&m, &s, &identity()).unwrap();
        assert!((r.e - 0.02).abs() < 1e-15);
        assert_eq!((r.segments, r.originals), (1, 2));
    }

    #[test]
    fn pooled_over_all_originals() {
        let (m, s) = setup(
            vec![seg(0.0, 0.0, 4.0, 0.0), seg(0.0, 5.0, 4.0, 5.0)],
            vec![
                vec![
                    seg(0.0, 0.01, 1.0, 0.01),
                    seg(0.0, 0.01, 1.0, 0.01),
                    seg(0.0, -0.01, 1.0, -0.01),
                ],
                vec![seg(0.0, 5.01, 1.0, 5.01)],
            ],
        );
        let r = error_metric(&m, &s, &identity()).unwrap();
        assert!((r.e - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rotated_original_adds_heading_term() {
        let rot = seg(-1.0, 0.0, 1.0, 0.0).transformed(&Pose2D::new(0.0, 0.0, 0.02));
        let (m, s) = setup(vec![seg(-2.0, 0.0, 2.0, 0.0)], vec![vec![rot]]);
        let d = distance_metric(&m, &s, &identity(), 1.0, 1.0).unwrap();
        assert!((d - 0.02).abs() < 1e-12);
        let e = error_metric(&m, &s, &identity()).unwrap().e;
        assert_eq!(distance_metric(&m, &s, &identity(), 1.0, 0.0).unwrap(), e);
    }

    #[test]
    fn missing_subset() {
        let (m, _) = setup(vec![seg(0.0, 0.0, 1.0, 0.0)], vec![]);
        let r = error_metric(&m, &CorrespondenceStore::new(), &identity());
        assert!(matches!(r, Err(Error::MissingSubset(0))));
    }
}
