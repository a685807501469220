use std::collections::BTreeSet;

use rayon::prelude::*;

use super::lookup::{GridGeometry, LookupTable};
use super::raster::{bin_count, bin_distance, rasterize_segment, strip_cells, DirectedPixel};
use super::EvalParams;
use crate::error::{Error, Result};
use crate::fusion::FusionThresholds;
use crate::mapper::GlobalMap;

/// Outcome of the discrete redundancy check.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RedundancyReport {
    /// `(accepted, redundant)` map indices, in detection order.
    pub pairs: Vec<(usize, usize)>,
    /// Indices flagged redundant against an earlier accepted segment.
    pub flagged: BTreeSet<usize>,
}

impl RedundancyReport {
    /// Every index appearing in some pair.
    pub fn penalized(&self) -> BTreeSet<usize> {
        self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect()
    }
}

/// Correlation score of a map against a lookup table.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub q: f64,
    /// `q` relative to the table's mean occupied cell value, in percent.
    pub percent: f64,
    /// Pixels of all segments.
    pub pixels: usize,
    /// Pixels of segments belonging to a redundant pair.
    pub redundant_pixels: usize,
    pub lambda: f64,
    pub redundant_pairs: Vec<(usize, usize)>,
}

struct Rasterized {
    index: usize,
    pixels: Vec<DirectedPixel>,
}

fn rasterize_map(map: &GlobalMap, grid: &GridGeometry, bin_deg: f64) -> Vec<Rasterized> {
    let entries: Vec<_> = map.iter().collect();
    entries
        .par_iter()
        .map(|(i, s)| Rasterized {
            index: *i,
            pixels: rasterize_segment(s, grid, bin_deg),
        })
        .collect()
}

/// Visits segments in ascending index. A segment is redundant against an
/// earlier non-redundant segment `l` when at least `superposition_fraction`
/// of its pixels fall in `l`'s strip of half-width `d_max` and its direction
/// bin is within `theta_max` of `l`'s. Otherwise it joins the accepted set.
pub fn detect_redundant_pairs(
    map: &GlobalMap,
    thresholds: &FusionThresholds,
    grid: &GridGeometry,
    params: &EvalParams,
) -> RedundancyReport {
    let raster = rasterize_map(map, grid, params.angle_bin_deg);
    detect_on_raster(map, &raster, thresholds, grid, params)
}

fn detect_on_raster(
    map: &GlobalMap,
    raster: &[Rasterized],
    thresholds: &FusionThresholds,
    grid: &GridGeometry,
    params: &EvalParams,
) -> RedundancyReport {
    let bins = bin_count(params.angle_bin_deg);
    let max_bins = thresholds.theta_max.to_degrees() / params.angle_bin_deg + 1e-9;
    let mut accepted: Vec<(usize, u32, std::collections::HashSet<_>)> = Vec::new();
    let mut report = RedundancyReport::default();
    for r in raster {
        let bin = r.pixels[0].angle_bin;
        let needed = params.superposition_fraction * r.pixels.len() as f64 - 1e-9;
        let hit = accepted.iter().find(|(_, abin, strip)| {
            if bin_distance(bin, *abin, bins) as f64 > max_bins {
                return false;
            }
            let inside = r.pixels.iter().filter(|p| strip.contains(&p.cell)).count();
            inside as f64 >= needed
        });
        match hit {
            Some((l, _, _)) => {
                report.pairs.push((*l, r.index));
                report.flagged.insert(r.index);
            }
            None => {
                let s = map.get(r.index).expect("rasterized index is in the map");
                accepted.push((r.index, bin, strip_cells(s, grid, thresholds.d_max)));
            }
        }
    }
    report
}

/// Mean lookup value over all segment pixels, with pixels of redundant
/// pairs counted negatively with weight `lambda`.
pub fn map_quality(
    map: &GlobalMap,
    table: &LookupTable,
    thresholds: &FusionThresholds,
    params: &EvalParams,
) -> Result<QualityReport> {
    if map.is_empty() {
        return Err(Error::EmptyMap);
    }
    params.validate()?;
    let grid = table.geometry();
    let raster = rasterize_map(map, &grid, params.angle_bin_deg);
    let redundancy = detect_on_raster(map, &raster, thresholds, &grid, params);
    let penalized = redundancy.penalized();

    let mut pixels = 0usize;
    let mut redundant_pixels = 0usize;
    let mut good = 0.0;
    let mut bad = 0.0;
    for r in &raster {
        let score: f64 = r.pixels.iter().map(|p| table.value(p.cell)).sum();
        pixels += r.pixels.len();
        if penalized.contains(&r.index) {
            redundant_pixels += r.pixels.len();
            bad += score;
        } else {
            good += score;
        }
    }
    let q = (good - params.lambda * bad) / pixels as f64;
    let percent = match table.mean_occupied_value() {
        Some(m) if m > 0.0 => q / m * 100.0,
        _ => 0.0,
    };
    Ok(QualityReport {
        q,
        percent,
        pixels,
        redundant_pixels,
        lambda: params.lambda,
        redundant_pairs: redundancy.pairs,
    })
}
