//! One-to-one incremental merging, online and offline.
//!
//! Each new segment fuses with at most one map segment: among those passing
//! all three gates, the one with the smallest separation distance (smaller
//! index on ties). Bookkeeping is shared with [`LineMapper`], so the
//! resulting maps can be scored with the same metrics.

use crate::error::Result;
use crate::fusion::FusionThresholds;
use crate::geometry::LineSegment;
use crate::mapper::{LineMapper, MergePolicy, MergeSummary};
use crate::geometry::Pose2D;
use crate::scan_io::Trajectory;

/// Online one-to-one merge of one scan.
pub fn oto_incremental_merge(
    mapper: &mut LineMapper,
    scan_segments: &[LineSegment],
    pose_index: usize,
    pose: &Pose2D,
) -> Result<MergeSummary> {
    mapper.merge_scan(MergePolicy::OneToOne, scan_segments, pose_index, pose)
}

/// Offline one-to-one merge: scans are replayed in the given order with
/// their final poses and no adjustment pass.
pub fn o2to_offline_merge(
    scans: &[(usize, Vec<LineSegment>)],
    trajectory: &Trajectory,
    thresholds: FusionThresholds,
) -> Result<LineMapper> {
    let mut mapper = LineMapper::new(thresholds);
    for (idx, segs) in scans {
        let pose = trajectory.require(*idx)?;
        oto_incremental_merge(&mut mapper, segs, *idx, pose)?;
    }
    Ok(mapper)
}
