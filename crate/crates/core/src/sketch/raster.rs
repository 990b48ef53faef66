use super::{Point, Sketch};
use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Bitmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Bitmap { width, height, data: vec![0.0; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!("bitmap {width}x{height} needs {} values, got {}", width * height, data.len())));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::shape("bitmap intensities must lie in [0, 1]"));
        }
        Ok(Bitmap { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn flip_horizontal(&self) -> Bitmap {
        let mut out = Bitmap::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Window of `w`x`h` pixels with top-left corner at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Bitmap> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::shape(format!("crop {w}x{h}+{x0}+{y0} exceeds {}x{}", self.width, self.height)));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Ok(Bitmap { width: w, height: h, data })
    }
}

/// Crop anchors, in the order each group's ten-element sequence visits them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropPosition {
    TopLeft,
    BottomLeft,
    TopRight,
    BottomRight,
    Center,
}

pub const CROP_ORDER: [CropPosition; 5] =
    [CropPosition::TopLeft, CropPosition::BottomLeft, CropPosition::TopRight, CropPosition::BottomRight, CropPosition::Center];

impl CropPosition {
    /// Top-left corner `(x, y)` of a `crop`-sized window in a `width`x`height` image.
    pub fn offset(self, width: usize, height: usize, crop: usize) -> (usize, usize) {
        let (dx, dy) = (width - crop, height - crop);
        match self {
            CropPosition::TopLeft => (0, 0),
            CropPosition::BottomLeft => (0, dy),
            CropPosition::TopRight => (dx, 0),
            CropPosition::BottomRight => (dx, dy),
            CropPosition::Center => (dx / 2, dy / 2),
        }
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * vx, a.y + t * vy))
}

/// Draws every stroke as a round-capped polyline of width `line_width` on a
/// `size`x`size` grid. Pixel `(col, row)` has its center at canvas coordinate
/// `(col, row)` after scaling the sketch canvas to `size`; it is foreground
/// when that center lies within `line_width / 2` of a segment. No anti-aliasing.
pub fn rasterize(s: &Sketch, size: usize, line_width: f64) -> Bitmap {
    let mut bmp = Bitmap::zeros(size, size);
    if size == 0 {
        return bmp;
    }
    let sx = size as f64 / s.canvas.width as f64;
    let sy = size as f64 / s.canvas.height as f64;
    let radius = line_width / 2.0;
    let max = (size - 1) as f64;
    for stroke in &s.strokes {
        let pts: Vec<Point> = stroke.points.iter().map(|p| Point::new(p.x * sx, p.y * sy)).collect();
        let segments: Box<dyn Iterator<Item = (Point, Point)>> =
            if pts.len() == 1 { Box::new(std::iter::once((pts[0], pts[0]))) } else { Box::new(pts.windows(2).map(|w| (w[0], w[1]))) };
        for (a, b) in segments {
            let x_lo = (a.x.min(b.x) - radius).ceil().clamp(0.0, max);
            let x_hi = (a.x.max(b.x) + radius).floor();
            let y_lo = (a.y.min(b.y) - radius).ceil().clamp(0.0, max);
            let y_hi = (a.y.max(b.y) + radius).floor();
            if x_hi < 0.0 || y_hi < 0.0 {
                continue;
            }
            let (x_hi, y_hi) = (x_hi.min(max) as usize, y_hi.min(max) as usize);
            for row in y_lo as usize..=y_hi {
                for col in x_lo as usize..=x_hi {
                    if segment_distance(Point::new(col as f64, row as f64), a, b) <= radius {
                        bmp.set(col, row, 1.0);
                    }
                }
            }
        }
    }
    bmp
}

/// The ten-element crop sequence of one stroke group: odd positions (1-based)
/// are crops of the original at TL, BL, TR, BR, center; each even position is
/// the same window taken from the horizontal reflection.
pub fn ten_crop_sequence(b: &Bitmap, crop: usize) -> Result<Vec<Bitmap>> {
    if crop == 0 || crop > b.width || crop > b.height {
        return Err(Error::CropTooLarge { crop, width: b.width, height: b.height });
    }
    let mirrored = b.flip_horizontal();
    let mut out = Vec::with_capacity(10);
    for pos in CROP_ORDER {
        let (x, y) = pos.offset(b.width, b.height, crop);
        out.push(b.crop(x, y, crop, crop)?);
        out.push(mirrored.crop(x, y, crop, crop)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::Canvas;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sketch(strokes: Vec<Vec<(f64, f64)>>, size: u32) -> Sketch {
        Sketch::new(
            strokes.into_iter().map(|s| s.into_iter().map(|(x, y)| Point::new(x, y)).collect()).collect(),
            None,
            Canvas::square(size),
        )
        .unwrap()
    }

    #[test]
    fn horizontal_segment_is_one_row() {
        let s = sketch(vec![vec![(5.0, 10.0), (20.0, 10.0)]], 32);
        let b = rasterize(&s, 32, 1.0);
        for y in 0..32 {
            for x in 0..32 {
                let on = y == 10 && (5..=20).contains(&x);
                assert_eq!(b.get(x, y) > 0.0, on, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn zero_length_strokes_make_dots() {
        let s = sketch(vec![vec![(3.0, 4.0)], vec![(10.0, 10.0), (10.0, 10.0)]], 16);
        let b = rasterize(&s, 16, 1.0);
        assert_eq!(b.foreground_count(), 2);
        assert_eq!(b.get(3, 4), 1.0);
        assert_eq!(b.get(10, 10), 1.0);
    }

    #[test]
    fn rasterize_matches_brute_force_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let strokes: Vec<Vec<(f64, f64)>> = (0..3)
                .map(|_| (0..rng.gen_range(1..6)).map(|_| (rng.gen_range(-5.0..45.0), rng.gen_range(-5.0..45.0))).collect())
                .collect();
            let width = rng.gen_range(0.5..4.0);
            let s = sketch(strokes.clone(), 40);
            let b = rasterize(&s, 40, width);
            // oracle: test every pixel center against every segment of every stroke
            for y in 0..40 {
                for x in 0..40 {
                    let (px, py) = (x as f64, y as f64);
                    let mut hit = false;
                    for st in &strokes {
                        let segs: Vec<_> = if st.len() == 1 { vec![(st[0], st[0])] } else { st.windows(2).map(|w| (w[0], w[1])).collect() };
                        for ((ax, ay), (bx, by)) in segs {
                            let (dx, dy) = (bx - ax, by - ay);
                            let l2 = dx * dx + dy * dy;
                            let t = if l2 > 0.0 { (((px - ax) * dx + (py - ay) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
                            let (cx, cy) = (ax + t * dx, ay + t * dy);
                            if ((px - cx).powi(2) + (py - cy).powi(2)).sqrt() <= width / 2.0 {
                                hit = true;
                            }
                        }
                    }
                    assert_eq!(b.get(x, y) > 0.0, hit, "pixel {x},{y}");
                }
            }
        }
    }

    #[test]
    fn rasterize_is_deterministic() {
        let s = sketch(vec![vec![(1.0, 1.0), (30.5, 17.25), (2.0, 29.0)]], 32);
        assert_eq!(rasterize(&s, 32, 2.0), rasterize(&s, 32, 2.0));
    }

    #[test]
    fn rasterize_scales_canvas_to_grid() {
        let s = sketch(vec![vec![(0.0, 128.0), (255.0, 128.0)]], 256);
        let b = rasterize(&s, 64, 1.0);
        assert_eq!(b.get(32, 32), 1.0);
        assert_eq!(b.get(0, 32), 1.0);
    }

    fn pattern(w: usize, h: usize) -> Bitmap {
        let data = (0..w * h).map(|i| ((i * 7919) % 13) as f64 / 12.0).collect();
        Bitmap::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn crop_offsets_for_256_and_225() {
        let b = pattern(256, 256);
        let crops = ten_crop_sequence(&b, 225).unwrap();
        assert_eq!(crops.len(), 10);
        assert_eq!(crops[0], b.crop(0, 0, 225, 225).unwrap());
        // center window spans [15, 240) on both axes
        for y in 0..225 {
            for x in 0..225 {
                assert_eq!(crops[8].get(x, y), b.get(x + 15, y + 15));
            }
        }
        assert_eq!(crops[2].get(0, 0), b.get(0, 31));
        assert_eq!(crops[4].get(0, 0), b.get(31, 0));
        assert_eq!(crops[6].get(224, 224), b.get(255, 255));
    }

    #[test]
    fn even_positions_come_from_the_reflection() {
        let b = pattern(20, 17);
        let mirrored = b.flip_horizontal();
        let crops = ten_crop_sequence(&b, 12).unwrap();
        for (i, pos) in CROP_ORDER.iter().enumerate() {
            let (x, y) = pos.offset(20, 17, 12);
            assert_eq!(crops[2 * i + 1], mirrored.crop(x, y, 12, 12).unwrap());
        }
    }

    #[test]
    fn symmetric_bitmap_gives_equal_pairs() {
        let mut b = pattern(16, 16);
        for y in 0..16 {
            for x in 8..16 {
                let v = b.get(15 - x, y);
                b.set(x, y, v);
            }
        }
        let crops = ten_crop_sequence(&b, 11).unwrap();
        for pair in crops.chunks(2) {
            assert_eq!(pair[0], pair[1]);
        }
    }

    #[test]
    fn full_size_crop_is_original_or_reflection() {
        let b = pattern(9, 9);
        let crops = ten_crop_sequence(&b, 9).unwrap();
        let mirrored = b.flip_horizontal();
        for (t, c) in crops.iter().enumerate() {
            assert_eq!(c, if t % 2 == 0 { &b } else { &mirrored });
        }
    }

    #[test]
    fn oversized_crop_fails() {
        assert!(matches!(ten_crop_sequence(&pattern(8, 10), 9), Err(Error::CropTooLarge { .. })));
    }
}
