//! Incremental 2D line-segment mapping from laser scans.
//!
//! Segments extracted from each scan are fused into a global map one scan at
//! a time ([`mapper::LineMapper`]). Every map segment remembers the original
//! observations it was built from, so the whole map can be rebuilt when a
//! corrected trajectory arrives. [`evaluation`] scores maps against the
//! registered scans; [`baselines`] holds one-to-one mergers for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod fusion;
pub mod geometry;
pub mod mapper;
pub mod pipeline;
pub mod scan_io;
pub mod synth;

pub use config::Config;
pub use error::{Error, Result};
pub use fusion::FusionThresholds;
pub use geometry::{LineSegment, Point, Pose2D};
pub use mapper::{CorrespondenceStore, GlobalMap, LineMapper};
pub use pipeline::{run_pipeline, MergerKind, PipelineInput, PipelineOptions, PipelineOutput};
