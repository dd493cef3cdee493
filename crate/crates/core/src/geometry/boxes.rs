use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use super::{GeometryError, Point};

/// Axis-aligned box with inclusive pixel bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, GeometryError> {
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// The box covering the whole `width` x `height` raster.
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x_min: 0,
            y_min: 0,
            x_max: width.saturating_sub(1),
            y_max: height.saturating_sub(1),
        }
    }

    /// The smallest box holding every point. Panics on an empty slice.
    pub fn enclosing(points: &[Point]) -> Self {
        assert!(!points.is_empty(), "enclosing box of no points");
        let mut b = Self {
            x_min: u32::MAX,
            y_min: u32::MAX,
            x_max: 0,
            y_max: 0,
        };
        for p in points {
            b.x_min = b.x_min.min(p.x);
            b.y_min = b.y_min.min(p.y);
            b.x_max = b.x_max.max(p.x);
            b.y_max = b.y_max.max(p.y);
        }
        b
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        BoundingBox::new(x_min, y_min, x_max, y_max).ok()
    }

    /// Grows the box by `margin` on every side, clipped to a `width` x `height` raster.
    pub fn dilate(&self, margin: u32, width: u32, height: u32) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.saturating_sub(margin),
            y_min: self.y_min.saturating_sub(margin),
            x_max: self.x_max.saturating_add(margin).min(width.saturating_sub(1)),
            y_max: self.y_max.saturating_add(margin).min(height.saturating_sub(1)),
        }
    }

    /// True when the box lies inside a `width` x `height` raster.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x_max < width && self.y_max < height
    }

    /// Row-major iterator over every pixel of the box.
    pub fn pixels(&self) -> impl Iterator<Item = Point> + '_ {
        (self.y_min..=self.y_max).flat_map(move |y| (self.x_min..=self.x_max).map(move |x| Point { x, y }))
    }

    /// The box as `[x_min, y_min, x_max, y_max]`.
    pub fn to_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x_min: u32,
            y_min: u32,
            x_max: u32,
            y_max: u32,
        }
        let r = Raw::deserialize(deserializer)?;
        BoundingBox::new(r.x_min, r.y_min, r.x_max, r.y_max).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for BoundingBox {
    type Err = String;

    /// Parses `"x_min,y_min,x_max,y_max"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [a, b, c, d] => BoundingBox::new(a, b, c, d).map_err(|e| e.to_string()),
            _ => Err(format!("expected 4 comma-separated integers, got {}", parts.len())),
        }
    }
}

/// Intersection over union with inclusive pixel areas.
pub fn iou_boxes(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Shifts each coordinate by `+delta` or `-delta`, chosen independently and
/// uniformly under `seed`.
///
/// The result is re-ordered if a shift inverted the box and clipped to
/// `bounds` (`width`, `height`) when given; coordinates never go below 0.
pub fn perturb_box(b: &BoundingBox, delta: u32, seed: u64, bounds: Option<(u32, u32)>) -> BoundingBox {
    if delta == 0 {
        return *b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = delta as i64;
    let mut shift = |v: u32| -> i64 {
        let s = if rng.random::<bool>() { d } else { -d };
        v as i64 + s
    };
    let (x0, y0, x1, y1) = (shift(b.x_min), shift(b.y_min), shift(b.x_max), shift(b.y_max));
    let (x_lo, x_hi) = (x0.min(x1), x0.max(x1));
    let (y_lo, y_hi) = (y0.min(y1), y0.max(y1));
    let (max_x, max_y) = match bounds {
        Some((w, h)) => (w.saturating_sub(1) as i64, h.saturating_sub(1) as i64),
        None => (u32::MAX as i64, u32::MAX as i64),
    };
    let clip = |v: i64, hi: i64| v.clamp(0, hi) as u32;
    BoundingBox {
        x_min: clip(x_lo, max_x),
        y_min: clip(y_lo, max_y),
        x_max: clip(x_hi, max_x),
        y_max: clip(y_hi, max_y),
    }
}
