//! Flat `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Later assignments win, so
//! command-line overrides can simply be applied after the file.

use std::fmt;

use crate::error::{Error, Result};
use crate::evaluation::EvalParams;
use crate::extraction::ExtractionParams;
use crate::fusion::FusionThresholds;
use crate::scan_io::{CarmenOptions, KeyframeParams, SvgOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub extraction: ExtractionParams,
    pub fusion: FusionThresholds,
    /// Export keeps segments updated more than this many times.
    pub min_updates: u32,
    /// Worker threads for map adjustment; 0 runs serially.
    pub adjust_workers: usize,
    pub keyframe: KeyframeParams,
    pub scan: CarmenOptions,
    pub eval: EvalParams,
    pub svg: SvgOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            extraction: ExtractionParams::default(),
            fusion: FusionThresholds::dense(),
            min_updates: 5,
            adjust_workers: 0,
            keyframe: KeyframeParams::default(),
            scan: CarmenOptions::default(),
            eval: EvalParams::default(),
            svg: SvgOptions::default(),
        }
    }
}

fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::param(key, format!("expected a number, got {value:?}")))?;
    if !v.is_finite() {
        return Err(Error::param(key, "must be finite"));
    }
    Ok(v)
}

fn int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(key, format!("expected a non-negative integer, got {value:?}")))
}

impl Config {
    pub const KEYS: &'static [&'static str] = &[
        "extraction.min_length_m",
        "extraction.min_points",
        "extraction.split_threshold_m",
        "extraction.max_point_gap_m",
        "fusion.theta_max_deg",
        "fusion.d_max_mm",
        "fusion.p_min_mm",
        "mapper.min_updates",
        "mapper.adjust_workers",
        "keyframe.min_translation_m",
        "keyframe.min_rotation_deg",
        "scan.max_range_m",
        "scan.fov_deg",
        "eval.resolution_m",
        "eval.sigma_m",
        "eval.angle_bin_deg",
        "eval.lambda",
        "eval.superposition_fraction",
        "eval.w_dist",
        "eval.w_ang",
        "svg.pixels_per_meter",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::parse(n + 1, format!("expected key = value, got {body:?}")))?;
            self.set(k.trim(), v.trim()).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        }
        self.validate()
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::param(assignment, "expected key=value"))?;
        self.set(k.trim(), v.trim())?;
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "extraction.min_length_m" => self.extraction.min_length = float(key, value)?,
            "extraction.min_points" => self.extraction.min_points = int(key, value)?,
            "extraction.split_threshold_m" => self.extraction.split_threshold = float(key, value)?,
            "extraction.max_point_gap_m" => self.extraction.max_point_gap = float(key, value)?,
            "fusion.theta_max_deg" => self.fusion.theta_max = float(key, value)?.to_radians(),
            "fusion.d_max_mm" => self.fusion.d_max = float(key, value)? / 1000.0,
            "fusion.p_min_mm" => self.fusion.p_min = float(key, value)? / 1000.0,
            "mapper.min_updates" => self.min_updates = int(key, value)?,
            "mapper.adjust_workers" => self.adjust_workers = int(key, value)?,
            "keyframe.min_translation_m" => self.keyframe.min_translation = float(key, value)?,
            "keyframe.min_rotation_deg" => self.keyframe.min_rotation = float(key, value)?.to_radians(),
            "scan.max_range_m" => self.scan.max_range = float(key, value)?,
            "scan.fov_deg" => self.scan.fov = float(key, value)?.to_radians(),
            "eval.resolution_m" => self.eval.resolution = float(key, value)?,
            "eval.sigma_m" => self.eval.sigma = float(key, value)?,
            "eval.angle_bin_deg" => self.eval.angle_bin_deg = float(key, value)?,
            "eval.lambda" => self.eval.lambda = float(key, value)?,
            "eval.superposition_fraction" => self.eval.superposition_fraction = float(key, value)?,
            "eval.w_dist" => self.eval.w_dist = float(key, value)?,
            "eval.w_ang" => self.eval.w_ang = float(key, value)?,
            "svg.pixels_per_meter" => self.svg.pixels_per_meter = float(key, value)?,
            _ => return Err(Error::param(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.extraction.validate()?;
        self.fusion.validate()?;
        self.eval.validate()?;
        if !(self.scan.max_range > 0.0) {
            return Err(Error::param("scan.max_range_m", "must be positive"));
        }
        if !(self.scan.fov > 0.0) {
            return Err(Error::param("scan.fov_deg", "must be positive"));
        }
        if !(self.svg.pixels_per_meter > 0.0) {
            return Err(Error::param("svg.pixels_per_meter", "must be positive"));
        }
        Ok(())
    }

    /// Effective values, one per key, in [`Config::KEYS`] order.
    pub fn to_kv(&self) -> Vec<(&'static str, String)> {
        let g = |v: f64| format!("{v}");
        let values = [
            g(self.extraction.min_length),
            self.extraction.min_points.to_string(),
            g(self.extraction.split_threshold),
            g(self.extraction.max_point_gap),
            g(self.fusion.theta_max.to_degrees()),
            g(self.fusion.d_max * 1000.0),
            g(self.fusion.p_min * 1000.0),
            self.min_updates.to_string(),
            self.adjust_workers.to_string(),
            g(self.keyframe.min_translation),
            g(self.keyframe.min_rotation.to_degrees()),
            g(self.scan.max_range),
            g(self.scan.fov.to_degrees()),
            g(self.eval.resolution),
            g(self.eval.sigma),
            g(self.eval.angle_bin_deg),
            g(self.eval.lambda),
            g(self.eval.superposition_fraction),
            g(self.eval.w_dist),
            g(self.eval.w_ang),
            g(self.svg.pixels_per_meter),
        ];
        Self::KEYS.iter().copied().zip(values).collect()
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_kv() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
