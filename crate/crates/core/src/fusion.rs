//! Association gates between a map segment and a newly observed segment, and
//! the weighted fusion of an associated set into one segment.
//!
//! The gates are evaluated in a fixed order: heading deviation first (cheap
//! coarse screen), then separation distance, then longitudinal overlap.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, LineSegment, Point};

/// Thresholds of the three association gates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionThresholds {
    /// Maximum heading deviation, radians.
    pub theta_max: f64,
    /// Maximum endpoint-to-line separation, meters.
    pub d_max: f64,
    /// Minimum overlap, meters. Negative values admit gaps up to `|p_min|`.
    pub p_min: f64,
}

impl FusionThresholds {
    pub fn new(theta_max: f64, d_max: f64, p_min: f64) -> Result<Self> {
        let t = Self {
            theta_max,
            d_max,
            p_min,
        };
        t.validate()?;
        Ok(t)
    }

    /// Builds thresholds from the units used in configuration files.
    pub fn from_deg_mm(theta_max_deg: f64, d_max_mm: f64, p_min_mm: f64) -> Result<Self> {
        Self::new(
            theta_max_deg.to_radians(),
            d_max_mm / 1000.0,
            p_min_mm / 1000.0,
        )
    }

    /// 4° / 100 mm / −100 mm: the setting used for dense indoor logs.
    pub fn dense() -> Self {
        Self {
            theta_max: 4f64.to_radians(),
            d_max: 0.1,
            p_min: -0.1,
        }
    }

    /// 2° / 50 mm / −50 mm: the setting used for sparse pre-registered logs.
    pub fn sparse() -> Self {
        Self {
            theta_max: 2f64.to_radians(),
            d_max: 0.05,
            p_min: -0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0 && self.theta_max < std::f64::consts::FRAC_PI_2) {
            return Err(Error::param("fusion.theta_max", "must lie in (0, 90°)"));
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(Error::param("fusion.d_max", "must be positive"));
        }
        if !self.p_min.is_finite() {
            return Err(Error::param("fusion.p_min", "must be finite"));
        }
        Ok(())
    }
}

impl Default for FusionThresholds {
    fn default() -> Self {
        Self::dense()
    }
}

/// Raw gate measurements for a `(map, scan)` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionMeasurements {
    pub heading_deviation: f64,
    pub separation_distance: f64,
    pub overlap: f64,
}

impl FusionMeasurements {
    pub fn measure(map_seg: &LineSegment, scan_seg: &LineSegment) -> Self {
        Self {
            heading_deviation: heading_deviation(map_seg, scan_seg),
            separation_distance: separation_distance(map_seg, scan_seg),
            overlap: overlap_length(map_seg, scan_seg).length,
        }
    }
}

/// `|normAngle(θ_map − θ_scan)|`, in `[0, π]`.
pub fn heading_deviation(map_seg: &LineSegment, scan_seg: &LineSegment) -> f64 {
    wrap_angle(map_seg.heading() - scan_seg.heading()).abs()
}

/// Larger of the two distances from the scan segment's endpoints to the
/// infinite line through the map segment.
pub fn separation_distance(map_seg: &LineSegment, scan_seg: &LineSegment) -> f64 {
    let line = map_seg.general_form();
    line.distance(scan_seg.start())
        .max(line.distance(scan_seg.end()))
}

/// Overlap between the map segment and the projection of the scan segment
/// onto it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    /// Overlap length; the gap length, negated, when the intervals are disjoint.
    pub length: f64,
    /// Endpoints of the overlap on the map segment, when it has positive length.
    pub endpoints: Option<(Point, Point)>,
}

pub fn overlap_length(map_seg: &LineSegment, scan_seg: &LineSegment) -> Overlap {
    let u = map_seg.direction();
    let origin = map_seg.start();
    let len = map_seg.length();
    let t1 = (scan_seg.start() - origin).dot(u);
    let t2 = (scan_seg.end() - origin).dot(u);
    let lo = t1.min(t2).max(0.0);
    let hi = t1.max(t2).min(len);
    let length = hi - lo;
    let endpoints = (length > 0.0).then(|| (origin + u * lo, origin + u * hi));
    Overlap { length, endpoints }
}

/// Which gate, if any, rejected a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionVerdict {
    Accepted,
    RejectedHeading,
    RejectedDistance,
    RejectedOverlap,
}

impl FusionVerdict {
    pub fn accepted(self) -> bool {
        self == FusionVerdict::Accepted
    }
}

/// Per-gate evaluation counts. A gate is only counted when it is reached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FusionCounters {
    pub heading_checks: u64,
    pub distance_checks: u64,
    pub overlap_checks: u64,
    pub accepted: u64,
}

impl FusionCounters {
    pub fn add(&mut self, other: &FusionCounters) {
        self.heading_checks += other.heading_checks;
        self.distance_checks += other.distance_checks;
        self.overlap_checks += other.overlap_checks;
        self.accepted += other.accepted;
    }
}

/// Evaluates the gates in order and stops at the first failure.
pub fn check_fusion(
    map_seg: &LineSegment,
    scan_seg: &LineSegment,
    t: &FusionThresholds,
    counters: &mut FusionCounters,
) -> FusionVerdict {
    counters.heading_checks += 1;
    if heading_deviation(map_seg, scan_seg) > t.theta_max {
        return FusionVerdict::RejectedHeading;
    }
    counters.distance_checks += 1;
    if separation_distance(map_seg, scan_seg) > t.d_max {
        return FusionVerdict::RejectedDistance;
    }
    counters.overlap_checks += 1;
    if overlap_length(map_seg, scan_seg).length < t.p_min {
        return FusionVerdict::RejectedOverlap;
    }
    counters.accepted += 1;
    FusionVerdict::Accepted
}

pub fn satisfies_fusion_conditions(
    map_seg: &LineSegment,
    scan_seg: &LineSegment,
    t: &FusionThresholds,
) -> bool {
    check_fusion(map_seg, scan_seg, t, &mut FusionCounters::default()).accepted()
}

/// Total order used to pick the reference input of a merge: heaviest first,
/// then by geometry so the choice does not depend on input order.
fn reference_order(a: &LineSegment, b: &LineSegment) -> Ordering {
    b.weight()
        .cmp(&a.weight())
        .then_with(|| a.heading().total_cmp(&b.heading()))
        .then_with(|| a.start().x.total_cmp(&b.start().x))
        .then_with(|| a.start().y.total_cmp(&b.start().y))
        .then_with(|| a.end().x.total_cmp(&b.end().x))
        .then_with(|| a.end().y.total_cmp(&b.end().y))
}

/// Fuses an associated set into one segment.
///
/// The center is the weight-weighted mean of the input centers and the
/// heading the weight-weighted mean of the input headings, both taken
/// relative to the heaviest input so the heading mean is well defined across
/// the ±π seam. The endpoints are the extreme projections of all input
/// endpoints onto the fused line, and the weight is the sum of the input
/// weights. The result carries no index.
pub fn merge_segments(segments: &[LineSegment]) -> Result<LineSegment> {
    let reference = match segments {
        [] => return Err(Error::EmptyMerge),
        [only] => return Ok(only.with_index(None)),
        _ => segments
            .iter()
            .min_by(|a, b| reference_order(a, b))
            .expect("non-empty"),
    };

    let ref_center = reference.center();
    let ref_heading = reference.heading();
    let mut total_weight = 0.0;
    let mut sum_offset = Point::default();
    let mut sum_turn = 0.0;
    let mut weight_sum: u32 = 0;
    for s in segments {
        let w = f64::from(s.weight());
        total_weight += w;
        weight_sum = weight_sum.saturating_add(s.weight());
        sum_offset = sum_offset + (s.center() - ref_center) * w;
        sum_turn += w * wrap_angle(s.heading() - ref_heading);
    }
    let center = ref_center + sum_offset * (1.0 / total_weight);
    let heading = wrap_angle(ref_heading + sum_turn / total_weight);
    let u = Point::unit(heading);

    debug_assert!(
        segments
            .iter()
            .all(|s| wrap_angle(s.heading() - heading).abs() < std::f64::consts::FRAC_PI_2),
        "merge inputs must be roughly aligned"
    );

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in segments {
        for p in [s.start(), s.end()] {
            let t = (p - center).dot(u);
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    Ok(LineSegment::new(center + u * lo, center + u * hi)?.with_weight(weight_sum))
}
