//! Map-quality metrics.
//!
//! Registered scan points are smeared into a [`LookupTable`]; final segments
//! are rasterized onto the same grid and scored by the cell values under
//! their pixels, with a penalty for redundant segments. The error and
//! distance metrics compare each final segment against the originals it was
//! built from.

mod lookup;
mod metrics;
mod quality;
mod raster;

pub use lookup::{GridGeometry, LookupTable};
pub use metrics::{distance_metric, error_metric, ErrorReport};
pub use quality::{detect_redundant_pairs, map_quality, QualityReport, RedundancyReport};
pub use raster::{angle_bin, rasterize_segment, strip_cells, Cell, DirectedPixel};

use crate::error::{Error, Result};

/// Metric parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalParams {
    /// Cell edge in meters.
    pub resolution: f64,
    /// Kernel standard deviation in meters.
    pub sigma: f64,
    pub angle_bin_deg: f64,
    /// Weight of the redundancy penalty.
    pub lambda: f64,
    /// Fraction of a segment's pixels that must fall in another segment's
    /// strip for the pair to count as redundant.
    pub superposition_fraction: f64,
    /// Distance-metric weight on perpendicular offset, per meter.
    pub w_dist: f64,
    /// Distance-metric weight on heading deviation, per radian.
    pub w_ang: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            sigma: 0.03,
            angle_bin_deg: 1.0,
            lambda: 1.0,
            superposition_fraction: 0.2,
            w_dist: 1.0,
            w_ang: 1.0,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eval.resolution_m", self.resolution),
            ("eval.sigma_m", self.sigma),
            ("eval.angle_bin_deg", self.angle_bin_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("eval.lambda", self.lambda),
            ("eval.w_dist", self.w_dist),
            ("eval.w_ang", self.w_ang),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        let f = self.superposition_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::param(
                "eval.superposition_fraction",
                format!("must lie in (0, 1], got {f}"),
            ));
        }
        if self.angle_bin_deg > 360.0 {
            return Err(Error::param("eval.angle_bin_deg", "must not exceed 360"));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridGeometry {
        GridGeometry::new(self.resolution)
    }
}
