use std::io::Write;

use crate::error::Result;
use crate::geometry::Point;
use crate::mapper::GlobalMap;

/// Rendering options. World +y points up on screen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgOptions {
    pub pixels_per_meter: f64,
    pub margin_px: f64,
    pub stroke_px: f64,
    pub endpoint_radius_px: f64,
    pub scan_point_radius_px: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            pixels_per_meter: 20.0,
            margin_px: 10.0,
            stroke_px: 1.0,
            endpoint_radius_px: 1.5,
            scan_point_radius_px: 0.5,
        }
    }
}

/// Writes the map as SVG: one `<line>` per segment with a red start dot and
/// a green end dot. Optional registered scan points are drawn first, beneath
/// the segments. `header` lines become XML comments.
pub fn export_svg<W: Write>(
    map: &GlobalMap,
    scan_points: Option<&[Point]>,
    opts: &SvgOptions,
    header: &[String],
    mut w: W,
) -> Result<()> {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: Point| {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    };
    for s in map.segments() {
        grow(s.start());
        grow(s.end());
    }
    for p in scan_points.unwrap_or_default() {
        grow(*p);
    }
    if !lo.x.is_finite() {
        lo = Point::default();
        hi = Point::default();
    }

    let k = opts.pixels_per_meter;
    let m = opts.margin_px;
    let width = (hi.x - lo.x) * k + 2.0 * m;
    let height = (hi.y - lo.y) * k + 2.0 * m;
    let sx = |p: Point| (p.x - lo.x) * k + m;
    let sy = |p: Point| (hi.y - p.y) * k + m;

    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    for h in header {
        writeln!(w, "<!-- {} -->", h.replace("--", "- -"))?;
    }
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    )?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    if let Some(points) = scan_points {
        writeln!(w, r#"<g id="scans" fill="green">"#)?;
        for p in points {
            writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{}"/>"#,
                sx(*p),
                sy(*p),
                opts.scan_point_radius_px
            )?;
        }
        writeln!(w, "</g>")?;
    }
    writeln!(w, r#"<g id="segments">"#)?;
    for (i, s) in map.iter() {
        let (a, b) = (s.start(), s.end());
        writeln!(
            w,
            r#"<line data-index="{i}" data-weight="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="blue" stroke-width="{}"/>"#,
            s.weight(),
            sx(a),
            sy(a),
            sx(b),
            sy(b),
            opts.stroke_px
        )?;
        writeln!(
            w,
            r#"<circle class="start" cx="{:.2}" cy="{:.2}" r="{}" fill="red"/>"#,
            sx(a),
            sy(a),
            opts.endpoint_radius_px
        )?;
        writeln!(
            w,
            r#"<circle class="end" cx="{:.2}" cy="{:.2}" r="{}" fill="green"/>"#,
            sx(b),
            sy(b),
            opts.endpoint_radius_px
        )?;
    }
    writeln!(w, "</g>")?;
    writeln!(w, "</svg>")?;
    Ok(())
}
