//! Parametric stroke-based sketch generators used as a small stand-in
//! dataset. Every family jitters its vertices and shuffles its stroke order.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sketch::{normalize_sketch, Canvas, Point, Sketch};

/// Canvas side of generated sketches.
pub const SYNTH_CANVAS: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Closed polygon, one stroke per side.
    Polygon,
    /// The same polygon with every side drawn as two consecutive half strokes.
    /// Its stroke groups rasterize to exactly the polygon's pixels.
    SegmentedPolygon,
    /// Star outline, one V-shaped stroke per spike.
    Star,
    /// Archimedean spiral cut into pieces.
    Spiral,
    /// Horizontal and vertical lines.
    Grid,
    /// Chain of alternating semicircles.
    ArcChain,
    /// Concentric circles.
    Rings,
    /// Zigzag made of short segments.
    Zigzag,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Polygon,
        Family::Star,
        Family::Spiral,
        Family::Grid,
        Family::ArcChain,
        Family::SegmentedPolygon,
        Family::Rings,
        Family::Zigzag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Polygon => "polygon",
            Family::SegmentedPolygon => "segmented-polygon",
            Family::Star => "star",
            Family::Spiral => "spiral",
            Family::Grid => "grid",
            Family::ArcChain => "arc-chain",
            Family::Rings => "rings",
            Family::Zigzag => "zigzag",
        }
    }

    pub fn from_name(name: &str) -> Result<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name).ok_or_else(|| Error::Config(format!("unknown sketch family {name:?}")))
    }
}

/// One generator class: a family plus a variant that grows its element count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthClass {
    pub family: Family,
    pub variant: usize,
}

impl SynthClass {
    pub fn name(&self) -> String {
        match self.variant {
            0 => self.family.name().to_string(),
            v => format!("{}-v{v}", self.family.name()),
        }
    }
}

/// Classes `0..count`, cycling through the families.
pub fn default_classes(count: usize) -> Vec<SynthClass> {
    (0..count).map(|i| SynthClass { family: Family::ALL[i % Family::ALL.len()], variant: i / Family::ALL.len() }).collect()
}

/// `per_class` sketches for each of `classes` default classes, class-major.
pub fn synth_generate(classes: usize, per_class: usize, seed: u64) -> Result<Vec<Sketch>> {
    if classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
    }
    synth_generate_classes(&default_classes(classes), per_class, seed)
}

pub fn synth_generate_classes(classes: &[SynthClass], per_class: usize, seed: u64) -> Result<Vec<Sketch>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes.len() * per_class);
    for class in classes {
        for _ in 0..per_class {
            out.push(generate_one(*class, &mut rng)?);
        }
    }
    Ok(out)
}

struct Frame {
    center: Point,
    radius: f64,
    angle: f64,
}

impl Frame {
    fn random(rng: &mut impl Rng) -> Self {
        let c = SYNTH_CANVAS as f64 / 2.0;
        Frame {
            center: Point::new(c + rng.gen_range(-10.0..10.0), c + rng.gen_range(-10.0..10.0)),
            radius: rng.gen_range(80.0..110.0),
            angle: rng.gen_range(0.0..TAU),
        }
    }

    /// Polar point in the frame: unit radius, angle relative to the frame rotation.
    fn polar(&self, r: f64, theta: f64) -> Point {
        let a = theta + self.angle;
        Point::new(self.center.x + self.radius * r * a.cos(), self.center.y + self.radius * r * a.sin())
    }

    /// Local `(u, v)` in `[-1, 1]^2`, rotated by the frame angle.
    fn local(&self, u: f64, v: f64) -> Point {
        let (s, c) = self.angle.sin_cos();
        Point::new(self.center.x + self.radius * (u * c - v * s), self.center.y + self.radius * (u * s + v * c))
    }
}

fn jitter(p: Point, amount: f64, rng: &mut impl Rng) -> Point {
    Point::new(p.x + rng.gen_range(-amount..amount), p.y + rng.gen_range(-amount..amount))
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

fn maybe_reverse(mut s: Vec<Point>, rng: &mut impl Rng) -> Vec<Point> {
    if rng.gen_bool(0.5) {
        s.reverse();
    }
    s
}

fn polygon_vertices(sides: usize, f: &Frame, rng: &mut impl Rng) -> Vec<Point> {
    (0..sides)
        .map(|i| {
            let theta = TAU * i as f64 / sides as f64 + rng.gen_range(-0.15..0.15);
            jitter(f.polar(rng.gen_range(0.85..1.0), theta), 3.0, rng)
        })
        .collect()
}

fn generate_one(class: SynthClass, rng: &mut impl Rng) -> Result<Sketch> {
    let f = Frame::random(rng);
    let v = class.variant;
    let strokes: Vec<Vec<Point>> = match class.family {
        Family::Polygon | Family::SegmentedPolygon => {
            let sides = 5 + v;
            let verts = polygon_vertices(sides, &f, rng);
            let mut order: Vec<usize> = (0..sides).collect();
            order.shuffle(rng);
            let mut strokes = Vec::new();
            for i in order {
                let (a, b) = (verts[i], verts[(i + 1) % sides]);
                let (a, b) = if rng.gen_bool(0.5) { (b, a) } else { (a, b) };
                if class.family == Family::Polygon {
                    strokes.push(vec![a, b]);
                } else {
                    let m = lerp(a, b, 0.5);
                    strokes.push(vec![a, m]);
                    strokes.push(vec![m, b]);
                }
            }
            strokes
        }
        Family::Star => {
            let spikes = 5 + v;
            let inner = rng.gen_range(0.35..0.5);
            let step = TAU / spikes as f64;
            let mut strokes: Vec<Vec<Point>> = (0..spikes)
                .map(|i| {
                    let t = step * i as f64;
                    let pts = vec![
                        jitter(f.polar(inner, t - step / 2.0), 2.0, rng),
                        jitter(f.polar(rng.gen_range(0.9..1.0), t), 3.0, rng),
                        jitter(f.polar(inner, t + step / 2.0), 2.0, rng),
                    ];
                    maybe_reverse(pts, rng)
                })
                .collect();
            strokes.shuffle(rng);
            strokes
        }
        Family::Spiral => {
            let pieces = 5 + v;
            let turns = rng.gen_range(2.0..2.8);
            let total = 24 * pieces;
            let pts: Vec<Point> = (0..=total)
                .map(|i| {
                    let t = i as f64 / total as f64;
                    f.polar(0.1 + 0.9 * t, turns * TAU * t)
                })
                .collect();
            let mut strokes: Vec<Vec<Point>> = (0..pieces).map(|k| pts[k * 24..=(k + 1) * 24].to_vec()).collect();
            strokes.shuffle(rng);
            strokes
        }
        Family::Grid => {
            let lines = 3 + v;
            let mut strokes = Vec::new();
            for i in 0..lines {
                let c = -0.8 + 1.6 * i as f64 / (lines - 1) as f64 + rng.gen_range(-0.05..0.05);
                let h = vec![jitter(f.local(-0.9, c), 2.0, rng), jitter(f.local(0.9, c), 2.0, rng)];
                let w = vec![jitter(f.local(c, -0.9), 2.0, rng), jitter(f.local(c, 0.9), 2.0, rng)];
                strokes.push(maybe_reverse(h, rng));
                strokes.push(maybe_reverse(w, rng));
            }
            strokes.shuffle(rng);
            strokes
        }
        Family::ArcChain => {
            let arcs = 4 + v;
            let width = 1.8 / arcs as f64;
            let mut strokes: Vec<Vec<Point>> = (0..arcs)
                .map(|k| {
                    let cx = -0.9 + width * (k as f64 + 0.5);
                    let up = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let amp = rng.gen_range(0.8..1.2);
                    let pts = (0..=12)
                        .map(|i| {
                            let a = PI * i as f64 / 12.0;
                            f.local(cx - width / 2.0 * a.cos(), -up * amp * width / 2.0 * a.sin())
                        })
                        .collect();
                    maybe_reverse(pts, rng)
                })
                .collect();
            strokes.shuffle(rng);
            strokes
        }
        Family::Rings => {
            let rings = 3 + v;
            let mut strokes: Vec<Vec<Point>> = (0..rings)
                .map(|k| {
                    let r = (k as f64 + 1.0) / rings as f64 * rng.gen_range(0.9..1.0);
                    let start = rng.gen_range(0.0..TAU);
                    (0..=24).map(|i| f.polar(r, start + TAU * i as f64 / 24.0)).collect()
                })
                .collect();
            strokes.shuffle(rng);
            strokes
        }
        Family::Zigzag => {
            let segments = 6 + v;
            let pts: Vec<Point> = (0..=segments)
                .map(|i| {
                    let u = -0.9 + 1.8 * i as f64 / segments as f64;
                    let v = if i % 2 == 0 { -0.5 } else { 0.5 };
                    jitter(f.local(u, v), 3.0, rng)
                })
                .collect();
            let mut strokes: Vec<Vec<Point>> = pts.windows(2).map(|w| maybe_reverse(w.to_vec(), rng)).collect();
            strokes.shuffle(rng);
            strokes
        }
    };
    let canvas = Canvas::square(SYNTH_CANVAS);
    let raw = Sketch::new(strokes, Some(class.name()), canvas)?;
    Ok(normalize_sketch(&raw, canvas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{rasterize, split_stroke_groups};

    #[test]
    fn counts_and_labels() {
        let s = synth_generate(5, 7, 1).unwrap();
        assert_eq!(s.len(), 35);
        for (i, sk) in s.iter().enumerate() {
            assert_eq!(sk.label.as_deref(), Some(default_classes(5)[i / 7].name().as_str()));
        }
        assert!(synth_generate(1, 3, 0).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(synth_generate(3, 4, 9).unwrap(), synth_generate(3, 4, 9).unwrap());
    }

    #[test]
    fn polygon_has_at_least_three_strokes() {
        let class = SynthClass { family: Family::Polygon, variant: 0 };
        for s in synth_generate_classes(&[class], 1000, 2).unwrap() {
            assert!(s.stroke_count() >= 3);
        }
    }

    #[test]
    fn stroke_order_is_shuffled() {
        let s = synth_generate(2, 2, 3).unwrap();
        let first_dir = |sk: &Sketch| {
            let c = sk.canvas.center();
            let p = sk.strokes[0].points[0];
            (p.y - c.y).atan2(p.x - c.x)
        };
        assert_ne!(first_dir(&s[0]), first_dir(&s[1]));
    }

    #[test]
    fn segmented_polygon_groups_rasterize_like_polygons() {
        // Same random stream for both families gives the same vertices.
        let poly = synth_generate_classes(&[SynthClass { family: Family::Polygon, variant: 0 }], 3, 5).unwrap();
        let seg = synth_generate_classes(&[SynthClass { family: Family::SegmentedPolygon, variant: 0 }], 3, 5).unwrap();
        for (p, s) in poly.iter().zip(&seg) {
            assert_eq!(s.stroke_count(), 2 * p.stroke_count());
            for (gp, gs) in split_stroke_groups(p).unwrap().iter().zip(split_stroke_groups(s).unwrap().iter()) {
                assert_eq!(rasterize(gp, 72, 2.25), rasterize(gs, 72, 2.25));
            }
        }
    }
}
