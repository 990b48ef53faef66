use crate::error::{Error, Result};
use crate::sketch::{Point, Sketch, Stroke};

pub const RADIAL_BINS: usize = 5;
pub const ANGULAR_BINS: usize = 12;
pub const HISTOGRAM_BINS: usize = RADIAL_BINS * ANGULAR_BINS;
/// Radial range of the log-polar grid, in units of the distance scale.
pub const RADIUS_INNER: f64 = 0.125;
pub const RADIUS_OUTER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeContextConfig {
    pub samples_per_stroke: usize,
}

impl Default for ShapeContextConfig {
    fn default() -> Self {
        ShapeContextConfig { samples_per_stroke: 5 }
    }
}

impl ShapeContextConfig {
    pub fn descriptor_len(&self) -> usize {
        self.samples_per_stroke * HISTOGRAM_BINS
    }
}

/// Concatenated shape-context histograms of one stroke's sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeDescriptor(pub Vec<f64>);

impl StrokeDescriptor {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `n` points at equal arc-length spacing from the first vertex to the last.
/// Degenerate strokes (one point, or zero length) repeat their first point.
pub fn sample_stroke_points(stroke: &Stroke, n: usize) -> Vec<Point> {
    let pts = &stroke.points;
    let total = stroke.length();
    if n == 0 {
        return Vec::new();
    }
    if pts.len() < 2 || total == 0.0 || n == 1 {
        return vec![pts[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut walked = 0.0;
    for k in 0..n {
        if k == n - 1 {
            out.push(*pts.last().unwrap());
            break;
        }
        let target = total * k as f64 / (n - 1) as f64;
        loop {
            let len = pts[seg].distance(pts[seg + 1]);
            if walked + len >= target || seg + 2 == pts.len() {
                let t = if len > 0.0 { ((target - walked) / len).clamp(0.0, 1.0) } else { 0.0 };
                let (a, b) = (pts[seg], pts[seg + 1]);
                out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
                break;
            }
            walked += len;
            seg += 1;
        }
    }
    out
}

fn radial_edges() -> [f64; RADIAL_BINS - 1] {
    let ratio = RADIUS_OUTER / RADIUS_INNER;
    std::array::from_fn(|i| RADIUS_INNER * ratio.powf((i + 1) as f64 / RADIAL_BINS as f64))
}

/// Log-polar histogram of `refs` around `p`: 5 radial bins with log-uniform
/// edges over `[1/8, 2] * scale` (out-of-range distances go to the end bins)
/// times 12 angular bins counterclockwise from east. Layout is
/// `radial * 12 + angular`.
pub fn shape_context(p: Point, refs: &[Point], scale: f64) -> Result<Vec<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidScale(scale));
    }
    let edges = radial_edges();
    let sector = std::f64::consts::TAU / ANGULAR_BINS as f64;
    let mut hist = vec![0.0; HISTOGRAM_BINS];
    for q in refs {
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let r = dx.hypot(dy) / scale;
        let radial = edges.iter().filter(|&&e| r >= e).count();
        let mut theta = dy.atan2(dx);
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        let angular = ((theta / sector) as usize).min(ANGULAR_BINS - 1);
        hist[radial * ANGULAR_BINS + angular] += 1.0;
    }
    Ok(hist)
}

pub fn mean_pairwise_distance(points: &[Point]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += points[i].distance(points[j]);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Descriptors for every stroke of `sketch`. The reference set is the sampled
/// points of all strokes (each point excluding itself) and distances are
/// measured in units of their mean pairwise distance.
pub fn sketch_descriptors(sketch: &Sketch, cfg: &ShapeContextConfig) -> Result<Vec<StrokeDescriptor>> {
    let n = cfg.samples_per_stroke;
    let samples: Vec<Point> = sketch.strokes.iter().flat_map(|s| sample_stroke_points(s, n)).collect();
    if samples.len() < 2 {
        return Err(Error::Insufficient { what: "sampled points", needed: 2, got: samples.len() });
    }
    let scale = mean_pairwise_distance(&samples);
    if scale == 0.0 {
        return Err(Error::ZeroScale);
    }
    let mut refs = Vec::with_capacity(samples.len() - 1);
    (0..sketch.stroke_count())
        .map(|s| {
            let mut values = Vec::with_capacity(cfg.descriptor_len());
            for i in s * n..(s + 1) * n {
                refs.clear();
                refs.extend(samples[..i].iter().chain(&samples[i + 1..]).copied());
                values.extend(shape_context(samples[i], &refs, scale)?);
            }
            Ok(StrokeDescriptor(values))
        })
        .collect()
}

/// Descriptor of the stroke at `index` within `sketch`.
pub fn stroke_descriptor(sketch: &Sketch, index: usize, cfg: &ShapeContextConfig) -> Result<StrokeDescriptor> {
    if index >= sketch.stroke_count() {
        return Err(Error::shape(format!("stroke {index} out of range for a sketch of {}", sketch.stroke_count())));
    }
    Ok(sketch_descriptors(sketch, cfg)?.swap_remove(index))
}
