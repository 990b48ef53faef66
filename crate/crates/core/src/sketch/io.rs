//! Canonical JSON sketch files and the SVG importer.

use serde::{Deserialize, Serialize};
use svgtypes::{SimplePathSegment, SimplifyingPathParser};

use super::{Canvas, Point, Sketch};
use crate::error::{Error, Result};

/// Points sampled per curve segment when flattening SVG curves.
const CURVE_SAMPLES: usize = 16;
const DEFAULT_SVG_CANVAS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchFormat {
    Canonical,
    Svg,
}

impl SketchFormat {
    /// Guesses the format from a file extension (`.svg` vs anything else).
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("svg") => SketchFormat::Svg,
            _ => SketchFormat::Canonical,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalDoc {
    label: Option<String>,
    canvas: [u32; 2],
    strokes: Vec<Vec<[f64; 2]>>,
}

pub fn parse_sketch(bytes: &[u8], format: SketchFormat) -> Result<Sketch> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Parse { offset: e.valid_up_to(), message: "input is not valid UTF-8".into() })?;
    match format {
        SketchFormat::Canonical => parse_canonical(text),
        SketchFormat::Svg => parse_svg(text),
    }
}

fn parse_canonical(text: &str) -> Result<Sketch> {
    let doc: CanonicalDoc = serde_json::from_str(text)
        .map_err(|e| Error::Parse { offset: line_col_to_offset(text, e.line(), e.column()), message: e.to_string() })?;
    if doc.strokes.is_empty() {
        return Err(Error::EmptySketch);
    }
    let strokes = doc.strokes.into_iter().map(|s| s.into_iter().map(|[x, y]| Point::new(x, y)).collect()).collect();
    Sketch::new(strokes, doc.label, Canvas { width: doc.canvas[0], height: doc.canvas[1] })
}

/// Serializes to the canonical format; stroke array order is drawing order.
pub fn to_canonical(s: &Sketch) -> String {
    let doc = CanonicalDoc {
        label: s.label.clone(),
        canvas: [s.canvas.width, s.canvas.height],
        strokes: s.strokes.iter().map(|st| st.points.iter().map(|p| [p.x, p.y]).collect()).collect(),
    };
    serde_json::to_string(&doc).expect("canonical sketch serializes")
}

// serde_json and roxmltree report 1-based line/column positions.
fn line_col_to_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            let col_bytes: usize = l.chars().take(column.saturating_sub(1)).map(char::len_utf8).sum();
            return offset + col_bytes;
        }
        offset += l.len();
    }
    text.len()
}

fn parse_svg(text: &str) -> Result<Sketch> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Parse { offset: line_col_to_offset(text, pos.row as usize, pos.col as usize), message: e.to_string() }
    })?;
    let root = doc.root_element();
    let canvas = svg_canvas(&root);

    let mut strokes = Vec::new();
    for node in root.descendants().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "path" => {
                let Some(attr) = node.attributes().find(|a| a.name() == "d") else {
                    return Err(Error::Parse { offset: node.range().start, message: "path element without `d`".into() });
                };
                let base = attr.range_value().start;
                let points = flatten_path(attr.value()).map_err(|(pos, message)| Error::Parse { offset: base + pos, message })?;
                if !points.is_empty() {
                    strokes.push(points);
                }
            }
            "polyline" => {
                let Some(attr) = node.attributes().find(|a| a.name() == "points") else {
                    return Err(Error::Parse { offset: node.range().start, message: "polyline element without `points`".into() });
                };
                let points: Vec<Point> = svgtypes::PointsParser::from(attr.value()).map(|(x, y)| Point::new(x, y)).collect();
                if !points.is_empty() {
                    strokes.push(points);
                }
            }
            _ => {}
        }
    }
    if strokes.is_empty() {
        return Err(Error::EmptySketch);
    }
    Sketch::new(strokes, None, canvas)
}

fn svg_canvas(root: &roxmltree::Node) -> Canvas {
    fn length(v: Option<&str>) -> Option<u32> {
        let v = v?.trim().trim_end_matches("px");
        let f: f64 = v.parse().ok()?;
        (f.is_finite() && f >= 1.0).then(|| f.round() as u32)
    }
    let from_viewbox = root.attribute("viewBox").and_then(|vb| {
        let nums: Vec<f64> =
            vb.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).filter_map(|s| s.parse().ok()).collect();
        (nums.len() == 4 && nums[2] >= 1.0 && nums[3] >= 1.0).then(|| (nums[2].round() as u32, nums[3].round() as u32))
    });
    let width = length(root.attribute("width")).or(from_viewbox.map(|v| v.0)).unwrap_or(DEFAULT_SVG_CANVAS);
    let height = length(root.attribute("height")).or(from_viewbox.map(|v| v.1)).unwrap_or(DEFAULT_SVG_CANVAS);
    Canvas { width, height }
}

fn svg_error_pos(e: &svgtypes::Error) -> usize {
    use svgtypes::Error as E;
    match e {
        E::UnexpectedData(p) | E::InvalidChar(_, p) | E::InvalidString(_, p) | E::InvalidNumber(p) => *p,
        _ => 0,
    }
}

/// Flattens path data into a single polyline. Subpaths are concatenated;
/// curves are sampled uniformly in their parameter.
fn flatten_path(d: &str) -> std::result::Result<Vec<Point>, (usize, String)> {
    let mut pts: Vec<Point> = Vec::new();
    let mut current = Point::new(0.0, 0.0);
    let mut subpath_start = current;
    for seg in SimplifyingPathParser::from(d) {
        let seg = seg.map_err(|e| (svg_error_pos(&e), format!("bad path data: {e}")))?;
        match seg {
            SimplePathSegment::MoveTo { x, y } => {
                current = Point::new(x, y);
                subpath_start = current;
                pts.push(current);
            }
            SimplePathSegment::LineTo { x, y } => {
                current = Point::new(x, y);
                pts.push(current);
            }
            SimplePathSegment::CurveTo { x1, y1, x2, y2, x, y } => {
                let (p0, c1, c2, p3) = (current, Point::new(x1, y1), Point::new(x2, y2), Point::new(x, y));
                for i in 1..=CURVE_SAMPLES {
                    let t = i as f64 / CURVE_SAMPLES as f64;
                    let u = 1.0 - t;
                    let (a, b, c, dd) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
                    pts.push(Point::new(a * p0.x + b * c1.x + c * c2.x + dd * p3.x, a * p0.y + b * c1.y + c * c2.y + dd * p3.y));
                }
                current = p3;
            }
            SimplePathSegment::Quadratic { x1, y1, x, y } => {
                let (p0, c1, p2) = (current, Point::new(x1, y1), Point::new(x, y));
                for i in 1..=CURVE_SAMPLES {
                    let t = i as f64 / CURVE_SAMPLES as f64;
                    let u = 1.0 - t;
                    pts.push(Point::new(
                        u * u * p0.x + 2.0 * u * t * c1.x + t * t * p2.x,
                        u * u * p0.y + 2.0 * u * t * c1.y + t * t * p2.y,
                    ));
                }
                current = p2;
            }
            SimplePathSegment::ClosePath => {
                current = subpath_start;
                pts.push(current);
            }
        }
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_single_stroke() {
        let src = br#"{"label": "cat", "canvas": [256, 256], "strokes": [[[1.5, 2.25], [3.0, 4.0]]]}"#;
        let s = parse_sketch(src, SketchFormat::Canonical).unwrap();
        assert_eq!(s.stroke_count(), 1);
        assert_eq!(s.strokes[0].points, vec![Point::new(1.5, 2.25), Point::new(3.0, 4.0)]);
        assert_eq!(s.label.as_deref(), Some("cat"));
    }

    #[test]
    fn canonical_roundtrip_preserves_coordinates_exactly() {
        let s = Sketch::new(
            vec![vec![Point::new(0.1, 1.0 / 3.0), Point::new(std::f64::consts::PI, -7.0e-12)], vec![Point::new(255.999999999, 0.0)]],
            None,
            Canvas { width: 300, height: 200 },
        )
        .unwrap();
        let back = parse_sketch(to_canonical(&s).as_bytes(), SketchFormat::Canonical).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn canonical_empty_strokes() {
        let src = br#"{"label": null, "canvas": [256, 256], "strokes": []}"#;
        assert!(matches!(parse_sketch(src, SketchFormat::Canonical), Err(Error::EmptySketch)));
    }

    #[test]
    fn canonical_malformed_reports_offset() {
        let src = b"{\"label\": null,\n \"canvas\": [256, 256], \"strokes\": [[[1, 2]]] oops}";
        match parse_sketch(src, SketchFormat::Canonical) {
            Err(Error::Parse { offset, .. }) => {
                let at = std::str::from_utf8(&src[offset..]).unwrap();
                assert!(at.starts_with("oops") || at.starts_with(" oops"), "offset points at {at:?}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn svg_three_paths() {
        let src = r#"<svg xmlns="http://www.w3.org/2000/svg" width="256" height="256">
            <path d="M 10 10 L 20 20"/>
            <g><path d="M0,0 h 5 v 5 z"/></g>
            <polyline points="1,1 2,2 3,3"/>
            <path d="M 50 50 L 60 60"/>
        </svg>"#;
        let s = parse_sketch(src.as_bytes(), SketchFormat::Svg).unwrap();
        // independent count of stroke-bearing elements
        let expected = src.matches("<path").count() + src.matches("<polyline").count();
        assert_eq!(s.stroke_count(), expected);
        assert_eq!(s.strokes[1].points.len(), 4);
        assert_eq!(s.strokes[1].points[3], Point::new(0.0, 0.0));
    }

    #[test]
    fn svg_curves_are_flattened() {
        let src = r#"<svg viewBox="0 0 100 80"><path d="M0 0 C 10 0 20 10 30 30 Q 40 40 50 30"/></svg>"#;
        let s = parse_sketch(src.as_bytes(), SketchFormat::Svg).unwrap();
        assert_eq!(s.canvas, Canvas { width: 100, height: 80 });
        assert_eq!(s.strokes[0].points.len(), 1 + 2 * CURVE_SAMPLES);
        assert_eq!(*s.strokes[0].points.last().unwrap(), Point::new(50.0, 30.0));
    }

    #[test]
    fn svg_errors() {
        assert!(matches!(parse_sketch(b"<svg><path d=\"M 1 1\"></svg>", SketchFormat::Svg), Err(Error::Parse { .. })));
        assert!(matches!(parse_sketch(b"<svg><rect/></svg>", SketchFormat::Svg), Err(Error::EmptySketch)));
        let src = b"<svg><path d=\"M 1 1 L 2 x\"/></svg>";
        match parse_sketch(src, SketchFormat::Svg) {
            Err(Error::Parse { offset, .. }) => assert!(offset >= 14 && offset < src.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
