//! Scatter plot of compass points.
//!
//! Pixel map, with `S = size` and `M = margin`:
//!
//! ```text
//! x = M + (economic + 10) / 20 * (S - 2M)
//! y = M + (10 - social)   / 20 * (S - 2M)
//! ```
//!
//! so the origin lands on the viewport center and `(10, 10)` on the
//! top-right corner of the plot area.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compass::CompassPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgOptions {
    pub size: u32,
    pub margin: u32,
    pub marker_radius: f64,
    pub default_color: String,
    /// Marker color per label, e.g. to color by model family.
    pub colors: BTreeMap<String, String>,
    pub title: Option<String>,
    /// Written into the plot only when set.
    pub timestamp: Option<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            size: 400,
            margin: 40,
            marker_radius: 4.0,
            default_color: "#1f77b4".into(),
            colors: BTreeMap::new(),
            title: None,
            timestamp: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvgError {
    #[error("nothing to plot")]
    NoPoints,
    #[error("label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("point {label:?} is outside [-10, 10] on some axis")]
    OutOfRange { label: String },
    #[error("margin {margin} leaves no plot area in a {size}px viewport")]
    BadGeometry { size: u32, margin: u32 },
}

pub fn to_pixel(point: CompassPoint, options: &SvgOptions) -> (f64, f64) {
    let m = f64::from(options.margin);
    let span = f64::from(options.size) - 2.0 * m;
    (m + (point.economic + 10.0) / 20.0 * span, m + (10.0 - point.social) / 20.0 * span)
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_compass_svg(points: &[(String, CompassPoint)], options: &SvgOptions) -> Result<Vec<u8>, SvgError> {
    if points.is_empty() {
        return Err(SvgError::NoPoints);
    }
    if 2 * u64::from(options.margin) >= u64::from(options.size) {
        return Err(SvgError::BadGeometry { size: options.size, margin: options.margin });
    }
    let mut seen = BTreeSet::new();
    for (label, p) in points {
        if !seen.insert(label.as_str()) {
            return Err(SvgError::DuplicateLabel(label.clone()));
        }
        if !p.is_in_range() {
            return Err(SvgError::OutOfRange { label: label.clone() });
        }
    }

    let s = options.size;
    let lo = f64::from(options.margin);
    let hi = f64::from(s) - lo;
    let (cx, cy) = to_pixel(CompassPoint::ORIGIN, options);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}" font-family="sans-serif" font-size="11">"#
    );
    if let Some(title) = &options.title {
        let _ = writeln!(svg, "<title>{}</title>", xml_escape(title));
    }
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{s}" height="{s}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{lo:.2}" y="{lo:.2}" width="{w:.2}" height="{w:.2}" fill="none" stroke="#000000"/>"##,
        w = hi - lo
    );
    let _ = writeln!(svg, r##"<line x1="{lo:.2}" y1="{cy:.2}" x2="{hi:.2}" y2="{cy:.2}" stroke="#999999"/>"##);
    let _ = writeln!(svg, r##"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="#999999"/>"##);
    let axis_labels = [
        (lo, cy - 4.0, "start", "Left"),
        (hi, cy - 4.0, "end", "Right"),
        (cx + 4.0, lo - 6.0, "start", "Authoritarian"),
        (cx + 4.0, hi + 14.0, "start", "Libertarian"),
    ];
    for (x, y, anchor, text) in axis_labels {
        let _ = writeln!(svg, r##"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" fill="#555555">{text}</text>"##);
    }
    let r = options.marker_radius;
    for (label, p) in points {
        let (x, y) = to_pixel(*p, options);
        let color = xml_escape(options.colors.get(label).unwrap_or(&options.default_color));
        let label = xml_escape(label);
        let _ = writeln!(svg, r#"<g class="point"><circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{color}"/>"#);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{label}</text></g>"#, x + r + 2.0, y - r - 2.0);
    }
    if let Some(ts) = &options.timestamp {
        let _ = writeln!(
            svg,
            r##"<text x="{hi:.2}" y="{:.2}" text-anchor="end" fill="#555555">{}</text>"##,
            f64::from(s) - 6.0,
            xml_escape(ts)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(label: &str, social: f64, economic: f64) -> Vec<(String, CompassPoint)> {
        vec![(label.to_string(), CompassPoint::new(social, economic))]
    }

    #[test]
    fn affine_map() {
        let o = SvgOptions::default();
        assert_eq!(to_pixel(CompassPoint::ORIGIN, &o), (200.0, 200.0));
        assert_eq!(to_pixel(CompassPoint::new(10.0, 10.0), &o), (360.0, 40.0));
        assert_eq!(to_pixel(CompassPoint::new(-10.0, -10.0), &o), (40.0, 360.0));
    }

    #[test]
    fn origin_marker_is_centered() {
        let svg = String::from_utf8(render_compass_svg(&one("m", 0.0, 0.0), &SvgOptions::default()).unwrap()).unwrap();
        assert!(svg.contains(r#"<circle cx="200.00" cy="200.00""#));
        let svg =
            String::from_utf8(render_compass_svg(&one("m", 10.0, 10.0), &SvgOptions::default()).unwrap()).unwrap();
        assert!(svg.contains(r#"<circle cx="360.00" cy="40.00""#));
    }

    #[test]
    fn deterministic_and_escaped() {
        let pts = vec![
            ("gpt-2 <small>".to_string(), CompassPoint::new(1.5, -2.25)),
            ("a&b".to_string(), CompassPoint::new(-3.0, 4.0)),
        ];
        let a = render_compass_svg(&pts, &SvgOptions::default()).unwrap();
        assert_eq!(a, render_compass_svg(&pts, &SvgOptions::default()).unwrap());
        let s = String::from_utf8(a).unwrap();
        assert!(s.contains("gpt-2 &lt;small&gt;"));
        assert!(s.contains("a&amp;b"));
        assert!(!s.contains("generated"));
    }

    #[test]
    fn timestamp_only_when_passed() {
        let o = SvgOptions { timestamp: Some("2024-01-01T00:00:00Z".into()), ..SvgOptions::default() };
        let s = String::from_utf8(render_compass_svg(&one("m", 0.0, 0.0), &o).unwrap()).unwrap();
        assert!(s.contains("2024-01-01T00:00:00Z"));
    }

    #[test]
    fn errors() {
        let o = SvgOptions::default();
        assert_eq!(render_compass_svg(&[], &o), Err(SvgError::NoPoints));
        let mut pts = one("m", 0.0, 0.0);
        pts.extend(one("m", 1.0, 1.0));
        assert_eq!(render_compass_svg(&pts, &o), Err(SvgError::DuplicateLabel("m".into())));
        assert!(matches!(render_compass_svg(&one("x", 11.0, 0.0), &o), Err(SvgError::OutOfRange { .. })));
        let tight = SvgOptions { size: 80, margin: 40, ..o };
        assert!(matches!(render_compass_svg(&one("m", 0.0, 0.0), &tight), Err(SvgError::BadGeometry { .. })));
    }
}
