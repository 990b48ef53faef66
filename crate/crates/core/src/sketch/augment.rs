use super::{Point, Sketch};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Rotation angles in degrees, applied about the canvas center.
    pub rotations: Vec<f64>,
    /// Shift magnitude in canvas pixels.
    pub shift: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { rotations: vec![-5.0, -3.0, 0.0, 3.0, 5.0], shift: 15.0 }
    }
}

impl AugmentConfig {
    /// Default angles with the 15 px shift rescaled from a 256 px canvas.
    pub fn for_canvas(size: u32) -> Self {
        AugmentConfig { shift: 15.0 * size as f64 / 256.0, ..Default::default() }
    }

    pub fn variant_count(&self) -> usize {
        2 * self.rotations.len() + 8
    }
}

/// Mirror about the vertical center line of the canvas.
pub fn reflect_horizontal(s: &Sketch) -> Sketch {
    let w = s.canvas.width as f64;
    s.map_points(|p| Point::new(w - p.x, p.y))
}

pub fn rotate(s: &Sketch, degrees: f64) -> Sketch {
    if degrees == 0.0 {
        return s.clone();
    }
    let c = s.canvas.center();
    let (sin, cos) = degrees.to_radians().sin_cos();
    s.map_points(|p| {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        Point::new(c.x + cos * dx - sin * dy, c.y + sin * dx + cos * dy)
    })
}

pub fn translate(s: &Sketch, dx: f64, dy: f64) -> Sketch {
    s.map_points(|p| Point::new(p.x + dx, p.y + dy))
}

/// The 18 training variants of a normalized sketch with default settings.
pub fn augment(s: &Sketch) -> Vec<Sketch> {
    augment_with(s, &AugmentConfig::default())
}

/// `{identity, reflection} x rotations`, followed by the eight nonzero shifts
/// from `{-shift, 0, +shift}^2` applied to the original. Points pushed off the
/// canvas are kept; rasterization clips them.
pub fn augment_with(s: &Sketch, cfg: &AugmentConfig) -> Vec<Sketch> {
    let mut out = Vec::with_capacity(cfg.variant_count());
    let reflected = reflect_horizontal(s);
    for base in [s, &reflected] {
        for &deg in &cfg.rotations {
            out.push(rotate(base, deg));
        }
    }
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            if sx != 0.0 || sy != 0.0 {
                out.push(translate(s, sx * cfg.shift, sy * cfg.shift));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::Canvas;
    use super::*;

    fn sample() -> Sketch {
        Sketch::new(
            vec![
                vec![Point::new(40.0, 50.0), Point::new(200.0, 60.0)],
                vec![Point::new(128.0, 128.0), Point::new(90.0, 210.0), Point::new(30.0, 20.0)],
            ],
            Some("thing".into()),
            Canvas::square(256),
        )
        .unwrap()
    }

    #[test]
    fn eighteen_variants_including_identity() {
        let s = sample();
        let out = augment(&s);
        assert_eq!(out.len(), 18);
        assert_eq!(out.len() * 80, 1440);
        assert!(out.iter().any(|v| v == &s));
        assert!(out.iter().all(|v| v.label == s.label && v.stroke_count() == 2));
    }

    #[test]
    fn shift_plus_15_minus_15_is_pointwise() {
        let s = sample();
        let out = augment(&s);
        // shifts are enumerated with x outer, y inner, skipping (0, 0)
        let shifted = &out[10 + 5];
        for (a, b) in s.points().zip(shifted.points()) {
            assert_eq!(b, Point::new(a.x + 15.0, a.y - 15.0));
        }
        let found = out.iter().filter(|v| v.points().zip(s.points()).all(|(b, a)| b == Point::new(a.x + 15.0, a.y - 15.0)));
        assert_eq!(found.count(), 1);
    }

    #[test]
    fn rotation_preserves_distance_to_center() {
        let s = sample();
        let c = s.canvas.center();
        let r = rotate(&s, 5.0);
        for (a, b) in s.points().zip(r.points()) {
            assert!((a.distance(c) - b.distance(c)).abs() < 1e-9);
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let s = sample();
        assert_eq!(reflect_horizontal(&reflect_horizontal(&s)), s);
    }
}
