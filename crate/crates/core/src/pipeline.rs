//! Batch replay of a scan log through a merger.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::baselines::oto_incremental_merge;
use crate::error::{Error, Result};
use crate::extraction::{extract_segments, ExtractionParams};
use crate::fusion::FusionThresholds;
use crate::geometry::LineSegment;
use crate::mapper::LineMapper;
use crate::scan_io::{select_keyframes, KeyframeParams, LaserScan, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MergerKind {
    /// One-to-many incremental merging with map adjustment.
    Cae,
    /// Online one-to-one merging, no adjustment.
    Oto,
    /// One-to-one merging on final poses.
    O2to,
}

impl FromStr for MergerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cae" => Ok(MergerKind::Cae),
            "oto" => Ok(MergerKind::Oto),
            "o2to" => Ok(MergerKind::O2to),
            _ => Err(Error::param("merger", format!("expected cae, oto or o2to, got {s:?}"))),
        }
    }
}

impl fmt::Display for MergerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergerKind::Cae => "cae",
            MergerKind::Oto => "oto",
            MergerKind::O2to => "o2to",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub merger: MergerKind,
    pub extraction: ExtractionParams,
    pub thresholds: FusionThresholds,
    pub keyframe: KeyframeParams,
    pub adjust_workers: usize,
    /// Check mapper invariants after every step.
    pub verify: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            merger: MergerKind::Cae,
            extraction: ExtractionParams::default(),
            thresholds: FusionThresholds::dense(),
            keyframe: KeyframeParams::default(),
            adjust_workers: 0,
            verify: false,
        }
    }
}

/// Scans plus the poses to place them with.
///
/// `trajectory` holds the poses known while mapping. `optimized`, when
/// given, holds the corrected poses that become available at the
/// `adjust_at` scan indices (or at the end of the log without markers).
#[derive(Clone, Copy, Debug)]
pub struct PipelineInput<'a> {
    pub scans: &'a [LaserScan],
    pub trajectory: &'a Trajectory,
    pub optimized: Option<&'a Trajectory>,
    pub adjust_at: &'a [usize],
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub mapper: LineMapper,
    /// Scan indices that passed the keyframe gate.
    pub keyframes: Vec<usize>,
    /// Merge time of each keyframe.
    pub frame_times: Vec<Duration>,
    /// Time spent in map adjustment.
    pub adjust_time: Duration,
    /// Scan indices before which the map was adjusted; `None` marks the
    /// final adjustment after the last scan.
    pub adjustments: Vec<Option<usize>>,
    /// Poses the final map is consistent with.
    pub final_trajectory: Trajectory,
}

impl PipelineOutput {
    pub fn total_merge_time(&self) -> Duration {
        self.frame_times.iter().sum()
    }

    pub fn mean_frame_time(&self) -> Option<Duration> {
        let n = u32::try_from(self.frame_times.len()).ok().filter(|n| *n > 0)?;
        Some(self.total_merge_time() / n)
    }
}

/// Keyframe scans with their sensor-frame segments, in log order.
pub fn extract_keyframes(
    scans: &[LaserScan],
    trajectory: &Trajectory,
    keyframe: &KeyframeParams,
    extraction: &ExtractionParams,
) -> Result<Vec<(usize, Vec<LineSegment>)>> {
    extraction.validate()?;
    let poses = scans
        .iter()
        .map(|s| Ok((s.scan_index, trajectory.require(s.scan_index)?)))
        .collect::<Result<Vec<_>>>()?;
    let kept = select_keyframes(poses, keyframe);
    let by_index: std::collections::HashMap<usize, &LaserScan> =
        scans.iter().map(|s| (s.scan_index, s)).collect();
    Ok(kept
        .par_iter()
        .map(|i| (*i, extract_segments(by_index[i], extraction)))
        .collect())
}

pub fn run_pipeline(input: PipelineInput<'_>, options: &PipelineOptions) -> Result<PipelineOutput> {
    options.thresholds.validate()?;
    if !input.adjust_at.is_empty() && input.optimized.is_none() {
        return Err(Error::param("adjust-at", "markers need an optimized trajectory"));
    }
    let frames = extract_keyframes(input.scans, input.trajectory, &options.keyframe, &options.extraction)?;
    let optimized = input.optimized;
    let final_trajectory = optimized.unwrap_or(input.trajectory).clone();

    let mut markers: Vec<usize> = input.adjust_at.to_vec();
    markers.sort_unstable();
    markers.dedup();
    let mut markers = markers.into_iter().peekable();

    let mut mapper = LineMapper::new(options.thresholds).with_verification(options.verify);
    let mut frame_times = Vec::with_capacity(frames.len());
    let mut adjustments = Vec::new();
    let mut adjust_time = Duration::ZERO;
    let mut current = match options.merger {
        MergerKind::O2to => &final_trajectory,
        _ => input.trajectory,
    };

    for (idx, segs) in &frames {
        if options.merger != MergerKind::O2to {
            if let Some(opt) = optimized {
                if markers.next_if(|m| m <= idx).is_some() {
                    while markers.next_if(|m| m <= idx).is_some() {}
                    if options.merger == MergerKind::Cae {
                        let t0 = Instant::now();
                        mapper.global_map_adjust(opt, options.adjust_workers)?;
                        adjust_time += t0.elapsed();
                    }
                    adjustments.push(Some(*idx));
                    current = opt;
                }
            }
        }
        let pose = *current.require(*idx)?;
        let t0 = Instant::now();
        match options.merger {
            MergerKind::Cae => mapper.incremental_merge(segs, *idx, &pose)?,
            MergerKind::Oto | MergerKind::O2to => oto_incremental_merge(&mut mapper, segs, *idx, &pose)?,
        };
        frame_times.push(t0.elapsed());
    }

    if options.merger == MergerKind::Cae {
        if let Some(opt) = optimized {
            if adjustments.is_empty() || markers.peek().is_some() {
                let t0 = Instant::now();
                mapper.global_map_adjust(opt, options.adjust_workers)?;
                adjust_time += t0.elapsed();
                adjustments.push(None);
            }
        }
    }

    Ok(PipelineOutput {
        mapper,
        keyframes: frames.iter().map(|f| f.0).collect(),
        frame_times,
        adjust_time,
        adjustments,
        final_trajectory,
    })
}
