//! Log, trajectory and map file formats, plus SVG export.

pub(crate) mod carmen;
mod map_file;
mod svg;
mod trajectory;

pub use carmen::{
    parse_carmen_log, parse_carmen_str, select_keyframes, write_carmen_log, CarmenOptions,
    KeyframeParams, LaserScan,
};
pub use map_file::{
    read_correspondences, read_segment_map, write_correspondences, write_segment_map,
    SegmentMapFile,
};
pub use svg::{export_svg, SvgOptions};
pub use trajectory::{parse_trajectory, parse_trajectory_str, write_trajectory, Trajectory};
