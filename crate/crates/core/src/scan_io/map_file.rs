//! Plain-text map and correspondence files.
//!
//! Map file:
//! ```text
//! linemap v1
//! # key = value            (metadata, optional, repeated)
//! index x1 y1 x2 y2 weight (one per segment, 6 decimals)
//! ```
//! Correspondence file:
//! ```text
//! linemap-corr v1
//! # comment                (optional, repeated)
//! mapIndex poseIndex ordinal x1 y1 x2 y2   (sensor-frame originals, 9 decimals)
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::LineSegment;
use crate::mapper::{CorrespondenceStore, GlobalMap, OriginalSegment};

const MAP_HEADER: &str = "linemap v1";
const CORR_HEADER: &str = "linemap-corr v1";
const LAST_INDEX_KEY: &str = "last_index";

/// A map plus the free-form metadata stored in its header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentMapFile {
    pub metadata: Vec<(String, String)>,
    pub map: GlobalMap,
}

impl SegmentMapFile {
    pub fn new(map: GlobalMap) -> Self {
        Self {
            metadata: Vec::new(),
            map,
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn metadata(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn check_header(first: Option<(usize, String)>, expected: &str) -> Result<()> {
    let Some((line_no, line)) = first else {
        return Err(Error::parse(1, format!("missing `{expected}` header")));
    };
    let line = line.trim();
    if line == expected {
        return Ok(());
    }
    let magic = expected.split_whitespace().next().unwrap_or_default();
    match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        [m, v] if *m == magic => Err(Error::Version(v.to_string())),
        _ => Err(Error::parse(line_no, format!("expected `{expected}` header"))),
    }
}

fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(n, l)| l.map(|l| (n + 1, l)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {tok:?}")))
}

pub fn write_segment_map<W: Write>(file: &SegmentMapFile, mut w: W) -> Result<()> {
    writeln!(w, "{MAP_HEADER}")?;
    writeln!(w, "# {LAST_INDEX_KEY} = {}", file.map.last_index())?;
    for (k, v) in &file.metadata {
        if k != LAST_INDEX_KEY {
            writeln!(w, "# {k} = {v}")?;
        }
    }
    for (i, s) in file.map.iter() {
        let (a, b) = (s.start(), s.end());
        writeln!(
            w,
            "{i} {:.6} {:.6} {:.6} {:.6} {}",
            a.x,
            a.y,
            b.x,
            b.y,
            s.weight()
        )?;
    }
    Ok(())
}

pub fn read_segment_map<R: BufRead>(reader: R) -> Result<SegmentMapFile> {
    let mut lines = numbered_lines(reader);
    check_header(lines.next().transpose()?, MAP_HEADER)?;
    let mut metadata = Vec::new();
    let mut last_index = None;
    let mut segments = Vec::new();
    for item in lines {
        let (n, line) = item?;
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                if k == LAST_INDEX_KEY {
                    last_index = Some(field::<usize>(v, n, "last index")?);
                } else {
                    metadata.push((k.to_string(), v.to_string()));
                }
            }
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 6 {
            return Err(Error::parse(
                n,
                format!("expected `index x1 y1 x2 y2 weight`, found {} fields", tok.len()),
            ));
        }
        let index: usize = field(tok[0], n, "index")?;
        let c: Vec<f64> = tok[1..5]
            .iter()
            .map(|t| field(t, n, "coordinate"))
            .collect::<Result<_>>()?;
        let weight: u32 = field(tok[5], n, "weight")?;
        if weight == 0 {
            return Err(Error::parse(n, "weight must be at least 1"));
        }
        let seg = LineSegment::from_coords(c[0], c[1], c[2], c[3])
            .map_err(|e| Error::parse(n, e.to_string()))?
            .with_weight(weight);
        segments.push((index, seg));
    }
    Ok(SegmentMapFile {
        metadata,
        map: GlobalMap::from_segments(segments, last_index)?,
    })
}

pub fn write_correspondences<W: Write>(
    store: &CorrespondenceStore,
    header: &[String],
    mut w: W,
) -> Result<()> {
    writeln!(w, "{CORR_HEADER}")?;
    for h in header {
        writeln!(w, "# {h}")?;
    }
    for (idx, subset) in store.iter() {
        for o in subset {
            let (a, b) = (o.segment.start(), o.segment.end());
            writeln!(
                w,
                "{idx} {} {} {:.9} {:.9} {:.9} {:.9}",
                o.pose_index, o.ordinal, a.x, a.y, b.x, b.y
            )?;
        }
    }
    Ok(())
}

/// Reads a correspondence dump. Original ids are reassigned in file order.
pub fn read_correspondences<R: BufRead>(reader: R) -> Result<CorrespondenceStore> {
    let mut lines = numbered_lines(reader);
    check_header(lines.next().transpose()?, CORR_HEADER)?;
    let mut subsets: BTreeMap<usize, Vec<OriginalSegment>> = BTreeMap::new();
    let mut id = 0u64;
    for item in lines {
        let (n, line) = item?;
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 7 {
            return Err(Error::parse(
                n,
                format!(
                    "expected `mapIndex poseIndex ordinal x1 y1 x2 y2`, found {} fields",
                    tok.len()
                ),
            ));
        }
        let map_index: usize = field(tok[0], n, "map index")?;
        let pose_index: usize = field(tok[1], n, "pose index")?;
        let ordinal: usize = field(tok[2], n, "ordinal")?;
        let c: Vec<f64> = tok[3..7]
            .iter()
            .map(|t| field(t, n, "coordinate"))
            .collect::<Result<_>>()?;
        let segment = LineSegment::from_coords(c[0], c[1], c[2], c[3])
            .map_err(|e| Error::parse(n, e.to_string()))?;
        subsets.entry(map_index).or_default().push(OriginalSegment {
            segment,
            pose_index,
            ordinal,
            id,
        });
        id += 1;
    }
    Ok(CorrespondenceStore::from_subsets(subsets))
}
