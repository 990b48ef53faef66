//! Stroke-ordered sketches: the types, normalization, and the cumulative
//! stroke-group split that turns one drawing into a temporal sequence.

mod augment;
mod io;
mod raster;

pub use augment::{augment, augment_with, reflect_horizontal, rotate, translate, AugmentConfig};
pub use io::{parse_sketch, to_canonical, SketchFormat};
pub use raster::{rasterize, ten_crop_sequence, Bitmap, CropPosition, CROP_ORDER};

use crate::error::{Error, Result};

/// Number of cumulative stroke groups a sketch is split into.
pub const STROKE_GROUPS: usize = 5;

/// Fraction of the canvas the normalized bounding box may occupy.
pub const NORMALIZED_FILL: f64 = 0.94;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
    /// Position in the drawing sequence, 0-based.
    pub order_index: usize,
}

impl Stroke {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Canvas size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub const fn square(size: u32) -> Self {
        Canvas { width: size, height: size }
    }

    pub fn center(self) -> Point {
        Point::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub strokes: Vec<Stroke>,
    pub label: Option<String>,
    pub canvas: Canvas,
}

impl Sketch {
    /// Builds a validated sketch; strokes are numbered in the given order.
    pub fn new(strokes: Vec<Vec<Point>>, label: Option<String>, canvas: Canvas) -> Result<Self> {
        if strokes.is_empty() {
            return Err(Error::EmptySketch);
        }
        let strokes = strokes.into_iter().enumerate().map(|(i, points)| Stroke { points, order_index: i }).collect();
        let sketch = Sketch { strokes, label, canvas };
        sketch.validate()?;
        Ok(sketch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strokes.is_empty() {
            return Err(Error::EmptySketch);
        }
        if self.canvas.width == 0 || self.canvas.height == 0 {
            return Err(Error::InvalidSketch("canvas has zero area".into()));
        }
        for (i, s) in self.strokes.iter().enumerate() {
            if s.points.is_empty() {
                return Err(Error::InvalidSketch(format!("stroke {i} has no points")));
            }
            if let Some(p) = s.points.iter().find(|p| !p.is_finite()) {
                return Err(Error::InvalidSketch(format!("stroke {i} has non-finite point {p:?}")));
            }
            if i > 0 && s.order_index <= self.strokes[i - 1].order_index {
                return Err(Error::InvalidSketch(format!("stroke order indices not strictly increasing at stroke {i}")));
            }
        }
        Ok(())
    }

    pub fn stroke_count(&self) -> usize {
        self.strokes.len()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.strokes.iter().flat_map(|s| s.points.iter().copied())
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.points() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Applies `f` to every point, keeping strokes, order and label.
    pub fn map_points(&self, mut f: impl FnMut(Point) -> Point) -> Sketch {
        Sketch {
            strokes: self
                .strokes
                .iter()
                .map(|s| Stroke { points: s.points.iter().map(|&p| f(p)).collect(), order_index: s.order_index })
                .collect(),
            label: self.label.clone(),
            canvas: self.canvas,
        }
    }

    /// The first `count` strokes as a sketch of their own.
    pub fn prefix(&self, count: usize) -> Sketch {
        Sketch { strokes: self.strokes[..count.min(self.strokes.len())].to_vec(), label: self.label.clone(), canvas: self.canvas }
    }
}

/// Scales (aspect preserved) and centers the sketch so its bounding box fills
/// at most 94% of `canvas`. A single-point sketch lands on the canvas center.
pub fn normalize_sketch(s: &Sketch, canvas: Canvas) -> Sketch {
    let (lo, hi) = s.bounding_box();
    let (bw, bh) = (hi.x - lo.x, hi.y - lo.y);
    let box_w = NORMALIZED_FILL * canvas.width as f64;
    let box_h = NORMALIZED_FILL * canvas.height as f64;
    let scale = match (bw > 0.0, bh > 0.0) {
        (true, true) => (box_w / bw).min(box_h / bh),
        (true, false) => box_w / bw,
        (false, true) => box_h / bh,
        (false, false) => 1.0,
    };
    let mid = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    let c = canvas.center();
    let mut out = s.map_points(|p| Point::new(c.x + (p.x - mid.x) * scale, c.y + (p.y - mid.y) * scale));
    out.canvas = canvas;
    out
}

/// Number of strokes in group `j` (1-based) of a sketch with `n` strokes:
/// `ceil(j * n / 5)`.
pub fn group_stroke_count(j: usize, n: usize) -> usize {
    (j * n).div_ceil(STROKE_GROUPS)
}

/// Splits a sketch into five cumulative prefixes by drawing order; the last
/// group is the full sketch.
pub fn split_stroke_groups(s: &Sketch) -> Result<Vec<Sketch>> {
    let n = s.stroke_count();
    if n == 0 {
        return Err(Error::EmptySketch);
    }
    Ok((1..=STROKE_GROUPS).map(|j| s.prefix(group_stroke_count(j, n))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_sketch(points: &[(f64, f64)]) -> Sketch {
        Sketch::new(vec![points.iter().map(|&(x, y)| Point::new(x, y)).collect()], None, Canvas::square(256)).unwrap()
    }

    fn n_stroke_sketch(n: usize) -> Sketch {
        let strokes = (0..n).map(|i| vec![Point::new(i as f64, 0.0), Point::new(i as f64, 5.0)]).collect();
        Sketch::new(strokes, Some("x".into()), Canvas::square(256)).unwrap()
    }

    #[test]
    fn empty_sketch_rejected() {
        assert!(matches!(Sketch::new(vec![], None, Canvas::square(8)), Err(Error::EmptySketch)));
        assert!(matches!(Sketch::new(vec![vec![]], None, Canvas::square(8)), Err(Error::InvalidSketch(_))));
    }

    #[test]
    fn group_sizes_for_divisible_and_ragged_counts() {
        let sizes = |n| (1..=5).map(|j| group_stroke_count(j, n)).collect::<Vec<_>>();
        assert_eq!(sizes(10), vec![2, 4, 6, 8, 10]);
        assert_eq!(sizes(5), vec![1, 2, 3, 4, 5]);
        // ceil(3/5)=1, ceil(6/5)=2, ceil(9/5)=2, ceil(12/5)=3, ceil(15/5)=3
        assert_eq!(sizes(3), vec![1, 2, 2, 3, 3]);
    }

    #[test]
    fn groups_are_cumulative_prefixes() {
        let s = n_stroke_sketch(7);
        let groups = split_stroke_groups(&s).unwrap();
        assert_eq!(groups.len(), 5);
        assert_eq!(groups[4], s);
        for g in &groups {
            assert_eq!(g.strokes[..], s.strokes[..g.stroke_count()]);
        }
    }

    #[test]
    fn normalize_single_point_goes_to_center() {
        let s = line_sketch(&[(3.0, 7.0)]);
        let n = normalize_sketch(&s, Canvas::square(100));
        assert_eq!(n.strokes[0].points[0], Point::new(50.0, 50.0));
    }

    #[test]
    fn normalize_box_100_by_50() {
        let s = line_sketch(&[(10.0, 20.0), (110.0, 70.0)]);
        let n = normalize_sketch(&s, Canvas::square(256));
        // recompute the box from the transformed points
        let pts: Vec<_> = n.points().collect();
        let w = pts.iter().map(|p| p.x).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.x).fold(f64::MAX, f64::min);
        let h = pts.iter().map(|p| p.y).fold(f64::MIN, f64::max) - pts.iter().map(|p| p.y).fold(f64::MAX, f64::min);
        assert!((w - 240.64).abs() < 1e-9);
        assert!((h - 50.0 * 240.64 / 100.0).abs() < 1e-9);
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / 2.0;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / 2.0;
        assert!((cx - 128.0).abs() < 1e-9 && (cy - 128.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_fixed_point() {
        let lo = 128.0 - 120.32;
        let hi = 128.0 + 120.32;
        let s = line_sketch(&[(lo, lo), (hi, hi), (lo, hi)]);
        let n = normalize_sketch(&s, Canvas::square(256));
        for (a, b) in s.points().zip(n.points()) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 1..20)) {
            let s = line_sketch(&pts);
            let once = normalize_sketch(&s, Canvas::square(256));
            let twice = normalize_sketch(&once, Canvas::square(256));
            for (a, b) in once.points().zip(twice.points()) {
                prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
            }
        }

        #[test]
        fn prefix_property_holds(n in 1usize..80) {
            let s = n_stroke_sketch(n);
            let groups = split_stroke_groups(&s).unwrap();
            prop_assert_eq!(groups[4].stroke_count(), n);
            for (j, g) in groups.iter().enumerate() {
                prop_assert_eq!(g.stroke_count(), ((j + 1) * n).div_ceil(5));
                prop_assert_eq!(&g.strokes[..], &groups[4].strokes[..g.stroke_count()]);
            }
        }
    }
}
