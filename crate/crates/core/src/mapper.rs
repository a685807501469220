//! The global segment map and the correspondence store that remembers which
//! original observations make up each map segment.
//!
//! Every map segment `i` owns a subset `c_i` of original segments, kept in
//! their sensor frame and tagged with the scan index of the pose they were
//! observed from. Subsets partition all originals ever inserted, and the
//! weight of map segment `i` always equals `|c_i|`. That bookkeeping lets
//! [`LineMapper::global_map_adjust`] rebuild every map segment from its
//! originals after the trajectory has been re-optimized, without replaying
//! the incremental merge.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::{
    check_fusion, merge_segments, separation_distance, FusionCounters, FusionThresholds,
};
use crate::geometry::{LineSegment, Pose2D};
use crate::scan_io::Trajectory;

/// An observation as extracted, in the sensor frame of scan `pose_index`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OriginalSegment {
    pub segment: LineSegment,
    pub pose_index: usize,
    /// Position within its scan's extraction output.
    pub ordinal: usize,
    /// Unique insertion id.
    pub id: u64,
}

impl OriginalSegment {
    pub fn to_global(&self, trajectory: &Trajectory) -> Result<LineSegment> {
        let pose = trajectory.require(self.pose_index)?;
        Ok(self.segment.transformed(pose).with_weight(1).with_index(None))
    }

    fn sort_key(&self) -> (usize, usize, u64) {
        (self.pose_index, self.ordinal, self.id)
    }
}

/// Map segments keyed by index, plus the next free index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalMap {
    segments: BTreeMap<usize, LineSegment>,
    last_index: usize,
}

impl GlobalMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a map from stored segments. `last_index` defaults to one
    /// past the largest key and must exceed every key.
    pub fn from_segments(
        segments: impl IntoIterator<Item = (usize, LineSegment)>,
        last_index: Option<usize>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, s) in segments {
            if map.insert(i, s.with_index(Some(i))).is_some() {
                return Err(Error::Invariant(format!("duplicate map index {i}")));
            }
        }
        let floor = map.keys().next_back().map_or(0, |k| k + 1);
        let last_index = last_index.unwrap_or(floor);
        if last_index < floor {
            return Err(Error::Invariant(format!(
                "last index {last_index} does not exceed map index {}",
                floor - 1
            )));
        }
        Ok(Self {
            segments: map,
            last_index,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.last_index
    }

    pub fn get(&self, index: usize) -> Option<&LineSegment> {
        self.segments.get(&index)
    }

    /// Segments in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &LineSegment)> + '_ {
        self.segments.iter().map(|(k, v)| (*k, v))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.keys().copied()
    }

    pub fn segments(&self) -> impl Iterator<Item = &LineSegment> + '_ {
        self.segments.values()
    }
}

/// Partition of all originals into per-map-segment subsets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrespondenceStore {
    subsets: BTreeMap<usize, Vec<OriginalSegment>>,
}

impl CorrespondenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_subsets(subsets: BTreeMap<usize, Vec<OriginalSegment>>) -> Self {
        Self { subsets }
    }

    pub fn get(&self, index: usize) -> Option<&[OriginalSegment]> {
        self.subsets.get(&index).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[OriginalSegment])> + '_ {
        self.subsets.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn total_originals(&self) -> usize {
        self.subsets.values().map(Vec::len).sum()
    }
}

/// How a new observation is associated with the map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergePolicy {
    /// Fuse with every map segment that passes the gates.
    OneToMany,
    /// Fuse with the single closest map segment that passes the gates.
    OneToOne,
}

/// Outcome of one incremental merge call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeSummary {
    /// Scan segments fused into existing map segments.
    pub fused: usize,
    /// Map segments removed because they were coalesced into a lower index.
    pub absorbed: usize,
    /// Scan segments appended as new map segments.
    pub appended: usize,
}

/// Owner of the map, the correspondence store, and the fusion thresholds.
///
/// Writes are single-threaded; only [`Self::global_map_adjust`] fans out.
#[derive(Clone, Debug)]
pub struct LineMapper {
    map: GlobalMap,
    store: CorrespondenceStore,
    thresholds: FusionThresholds,
    counters: FusionCounters,
    next_original_id: u64,
    verify: bool,
}

impl LineMapper {
    pub fn new(thresholds: FusionThresholds) -> Self {
        Self {
            map: GlobalMap::new(),
            store: CorrespondenceStore::new(),
            thresholds,
            counters: FusionCounters::default(),
            next_original_id: 0,
            verify: false,
        }
    }

    /// Re-checks every state invariant after each mutation. Slow; meant for
    /// tests and debugging.
    pub fn with_verification(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn map(&self) -> &GlobalMap {
        &self.map
    }

    pub fn store(&self) -> &CorrespondenceStore {
        &self.store
    }

    pub fn thresholds(&self) -> &FusionThresholds {
        &self.thresholds
    }

    pub fn counters(&self) -> &FusionCounters {
        &self.counters
    }

    /// Number of originals inserted so far.
    pub fn originals_inserted(&self) -> u64 {
        self.next_original_id
    }

    /// One-to-many incremental merge of one scan's segments (sensor frame)
    /// observed from `pose`.
    pub fn incremental_merge(
        &mut self,
        scan_segments: &[LineSegment],
        pose_index: usize,
        pose: &Pose2D,
    ) -> Result<MergeSummary> {
        self.merge_scan(MergePolicy::OneToMany, scan_segments, pose_index, pose)
    }

    /// Incremental merge under an explicit association policy.
    ///
    /// Scan segments are handled in order, and a fused segment is visible to
    /// the scan segments after it. Unassociated scan segments are appended
    /// once the whole scan has been matched, with consecutive fresh indices.
    pub fn merge_scan(
        &mut self,
        policy: MergePolicy,
        scan_segments: &[LineSegment],
        pose_index: usize,
        pose: &Pose2D,
    ) -> Result<MergeSummary> {
        let mut summary = MergeSummary::default();
        let mut unmatched = Vec::new();
        let mut matched: Vec<usize> = Vec::new();

        for (ordinal, local) in scan_segments.iter().enumerate() {
            let local = local.with_weight(1).with_index(None);
            let global = local.transformed(pose);
            let original = OriginalSegment {
                segment: local,
                pose_index,
                ordinal,
                id: self.next_original_id,
            };
            self.next_original_id += 1;

            matched.clear();
            match policy {
                MergePolicy::OneToMany => {
                    for (&idx, m) in &self.map.segments {
                        if check_fusion(m, &global, &self.thresholds, &mut self.counters).accepted()
                        {
                            matched.push(idx);
                        }
                    }
                }
                MergePolicy::OneToOne => {
                    let mut best: Option<(f64, usize)> = None;
                    for (&idx, m) in &self.map.segments {
                        if check_fusion(m, &global, &self.thresholds, &mut self.counters).accepted()
                        {
                            let d = separation_distance(m, &global);
                            // strict `<` keeps the smaller index on ties
                            if best.is_none_or(|(bd, _)| d < bd) {
                                best = Some((d, idx));
                            }
                        }
                    }
                    matched.extend(best.map(|(_, idx)| idx));
                }
            }

            let Some(&target) = matched.iter().min() else {
                unmatched.push((global, original));
                continue;
            };

            let mut inputs = Vec::with_capacity(matched.len() + 1);
            let mut subset = Vec::new();
            for &idx in &matched {
                inputs.push(self.map.segments.remove(&idx).ok_or_else(|| {
                    Error::Invariant(format!("matched index {idx} vanished"))
                })?);
                subset.extend(self.store.subsets.remove(&idx).ok_or_else(|| {
                    Error::Invariant(format!("map index {idx} has no subset"))
                })?);
            }
            inputs.push(global);
            subset.push(original);
            let fused = merge_segments(&inputs)?.with_index(Some(target));
            self.map.segments.insert(target, fused);
            self.store.subsets.insert(target, subset);
            summary.fused += 1;
            summary.absorbed += matched.len() - 1;
        }

        for (global, original) in unmatched {
            let idx = self.map.last_index;
            self.map.segments.insert(idx, global.with_index(Some(idx)));
            self.store.subsets.insert(idx, vec![original]);
            self.map.last_index += 1;
            summary.appended += 1;
        }

        if self.verify {
            self.check_invariants()?;
        }
        Ok(summary)
    }

    /// Rebuilds every map segment from its originals under `trajectory`.
    ///
    /// Subsets are independent, so with `workers > 0` they are processed on
    /// a pool of that many threads; `workers == 0` runs the serial reference
    /// path. Results are committed only if every subset succeeds, and the
    /// committed map does not depend on the worker count. Indices, subsets
    /// and weights are unchanged.
    pub fn global_map_adjust(&mut self, trajectory: &Trajectory, workers: usize) -> Result<()> {
        // fail before doing any work if a pose is missing
        let mut missing: Option<usize> = None;
        for orig in self.store.subsets.values().flatten() {
            if trajectory.pose(orig.pose_index).is_none() {
                missing = Some(missing.map_or(orig.pose_index, |m| m.min(orig.pose_index)));
            }
        }
        if let Some(idx) = missing {
            return Err(Error::MissingPose(idx));
        }

        let jobs: Vec<(usize, &Vec<OriginalSegment>)> =
            self.store.subsets.iter().map(|(k, v)| (*k, v)).collect();
        let run = |(idx, subset): &(usize, &Vec<OriginalSegment>)| -> Result<(usize, LineSegment)> {
            Ok((*idx, readjust_subset(subset, trajectory)?))
        };
        let updated: Vec<(usize, LineSegment)> = if workers == 0 {
            jobs.iter().map(run).collect::<Result<_>>()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::WorkerPool(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run).collect::<Result<_>>())?
        };

        for (idx, seg) in updated {
            self.map.segments.insert(idx, seg.with_index(Some(idx)));
        }
        if self.verify {
            self.check_invariants()?;
        }
        Ok(())
    }

    /// Map indices whose originals, placed with `trajectory`, no longer all
    /// pairwise pass the separation gate. The adjustment itself never
    /// re-checks associations; this is a diagnostic only.
    pub fn stale_correspondences(&self, trajectory: &Trajectory) -> Result<Vec<usize>> {
        let mut stale = Vec::new();
        for (&idx, subset) in &self.store.subsets {
            let globals = subset
                .iter()
                .map(|o| o.to_global(trajectory))
                .collect::<Result<Vec<_>>>()?;
            let ok = globals.iter().enumerate().all(|(i, a)| {
                globals[i + 1..].iter().all(|b| {
                    separation_distance(a, b) <= self.thresholds.d_max
                        && separation_distance(b, a) <= self.thresholds.d_max
                })
            });
            if !ok {
                stale.push(idx);
            }
        }
        Ok(stale)
    }

    /// Verifies the partition, weight, index and conservation invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        if !self.map.segments.keys().eq(self.store.subsets.keys()) {
            return fail("map and correspondence store have different index sets".into());
        }
        if let Some(&max) = self.map.segments.keys().next_back() {
            if self.map.last_index <= max {
                return fail(format!(
                    "last index {} not above map index {max}",
                    self.map.last_index
                ));
            }
        }
        let mut seen = HashSet::with_capacity(self.next_original_id as usize);
        for (&idx, seg) in &self.map.segments {
            let subset = &self.store.subsets[&idx];
            if subset.is_empty() {
                return fail(format!("subset {idx} is empty"));
            }
            if seg.weight() as usize != subset.len() {
                return fail(format!(
                    "segment {idx} has weight {} but {} originals",
                    seg.weight(),
                    subset.len()
                ));
            }
            if seg.index() != Some(idx) {
                return fail(format!("segment stored at {idx} carries index {:?}", seg.index()));
            }
            for o in subset {
                if !seen.insert(o.id) {
                    return fail(format!("original {} appears in more than one subset", o.id));
                }
            }
        }
        if seen.len() as u64 != self.next_original_id {
            return fail(format!(
                "{} originals stored but {} inserted",
                seen.len(),
                self.next_original_id
            ));
        }
        Ok(())
    }
}

/// Re-merges one subset under `trajectory`, in ascending
/// `(pose_index, ordinal)` order.
pub fn readjust_subset(subset: &[OriginalSegment], trajectory: &Trajectory) -> Result<LineSegment> {
    let mut ordered: Vec<&OriginalSegment> = subset.iter().collect();
    ordered.sort_by_key(|o| o.sort_key());
    let globals = ordered
        .iter()
        .map(|o| o.to_global(trajectory))
        .collect::<Result<Vec<_>>>()?;
    merge_segments(&globals)
}

/// Snapshot holding only segments updated more than `min_updates` times.
pub fn filter_by_weight(map: &GlobalMap, min_updates: u32) -> GlobalMap {
    GlobalMap {
        segments: map
            .segments
            .iter()
            .filter(|(_, s)| s.weight() > min_updates)
            .map(|(k, s)| (*k, *s))
            .collect(),
        last_index: map.last_index,
    }
}

/// Segment count and length statistics, in millimeters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapStatistics {
    pub count: usize,
    pub shortest_mm: Option<f64>,
    pub longest_mm: Option<f64>,
    pub mean_mm: Option<f64>,
}

pub fn map_statistics(map: &GlobalMap) -> MapStatistics {
    let lengths: Vec<f64> = map.segments().map(|s| s.length() * 1000.0).collect();
    if lengths.is_empty() {
        return MapStatistics {
            count: 0,
            shortest_mm: None,
            longest_mm: None,
            mean_mm: None,
        };
    }
    MapStatistics {
        count: lengths.len(),
        shortest_mm: lengths.iter().copied().reduce(f64::min),
        longest_mm: lengths.iter().copied().reduce(f64::max),
        mean_mm: Some(lengths.iter().sum::<f64>() / lengths.len() as f64),
    }
}

impl MapStatistics {
    pub const HEADER: &'static str = "segments\tshortest_mm\tlongest_mm\tmean_mm";
}

impl fmt::Display for MapStatistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.count,
            cell(self.shortest_mm),
            cell(self.longest_mm),
            cell(self.mean_mm)
        )
    }
}
