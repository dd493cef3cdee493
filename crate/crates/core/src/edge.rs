//! Per-pixel boundary probabilities.
//!
//! Boundary paths and pairwise potentials both read an [`EdgeMap`]. The
//! built-in [`ScharrEdges`] provider uses gradient magnitude; any detector
//! can be plugged in by saving its output as a 16-bit PNG and loading it
//! with [`PrecomputedEdges`] or [`load_edge_map`].

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, RgbImage};
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("image has zero size")]
    EmptyImage,
    #[error("edge map is {got_w}x{got_h}, image is {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("edge response {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// Boundary probability `e_p` in `[0,1]` for each pixel, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    response: Vec<f64>,
}

impl EdgeMap {
    pub fn new(width: u32, height: u32, response: Vec<f64>) -> Result<Self, EdgeError> {
        assert_eq!(response.len(), width as usize * height as usize, "edge buffer size");
        if let Some(&bad) = response.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EdgeError::OutOfRange(bad));
        }
        Ok(Self { width, height, response })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize]).expect("constant in range")
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f64) -> Result<Self, EdgeError> {
        let mut v = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                v.push(f(x, y));
            }
        }
        Self::new(width, height, v)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.response[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn at(&self, p: Point) -> f64 {
        self.get(p.x, p.y)
    }

    pub fn values(&self) -> &[f64] {
        &self.response
    }

    pub fn max(&self) -> f64 {
        self.response.iter().copied().fold(0.0, f64::max)
    }

    pub fn check_dims(&self, width: u32, height: u32) -> Result<(), EdgeError> {
        if self.dims() != (width, height) {
            return Err(EdgeError::DimensionMismatch {
                got_w: self.width,
                got_h: self.height,
                want_w: width,
                want_h: height,
            });
        }
        Ok(())
    }
}

/// Source of edge maps for an image.
pub trait EdgeProvider {
    fn edges(&self, image: &RgbImage) -> Result<EdgeMap, EdgeError>;
}

/// Scharr gradient magnitude, see [`gradient_edges`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ScharrEdges;

impl EdgeProvider for ScharrEdges {
    fn edges(&self, image: &RgbImage) -> Result<EdgeMap, EdgeError> {
        gradient_edges(image)
    }
}

/// An edge map read from disk and checked against the image size.
#[derive(Clone, Debug)]
pub struct PrecomputedEdges(pub PathBuf);

impl EdgeProvider for PrecomputedEdges {
    fn edges(&self, image: &RgbImage) -> Result<EdgeMap, EdgeError> {
        load_edge_map(&self.0, Some(image.dimensions()))
    }
}

/// Scharr gradient magnitude, maximum over RGB channels, scaled so the
/// strongest response in the image is 1. Borders replicate the edge pixel.
/// A constant image yields an all-zero map.
pub fn gradient_edges(image: &RgbImage) -> Result<EdgeMap, EdgeError> {
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(EdgeError::EmptyImage);
    }
    let px = |x: i64, y: i64, c: usize| -> f64 {
        let xc = x.clamp(0, w as i64 - 1) as u32;
        let yc = y.clamp(0, h as i64 - 1) as u32;
        image.get_pixel(xc, yc).0[c] as f64
    };
    let mut mag = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut best: f64 = 0.0;
            for c in 0..3 {
                let gx = 3.0 * (px(x + 1, y - 1, c) - px(x - 1, y - 1, c))
                    + 10.0 * (px(x + 1, y, c) - px(x - 1, y, c))
                    + 3.0 * (px(x + 1, y + 1, c) - px(x - 1, y + 1, c));
                let gy = 3.0 * (px(x - 1, y + 1, c) - px(x - 1, y - 1, c))
                    + 10.0 * (px(x, y + 1, c) - px(x, y - 1, c))
                    + 3.0 * (px(x + 1, y + 1, c) - px(x + 1, y - 1, c));
                best = best.max(gx.hypot(gy));
            }
            mag.push(best);
        }
    }
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for m in &mut mag {
            *m /= peak;
        }
    }
    Ok(EdgeMap {
        width: w,
        height: h,
        response: mag,
    })
}

/// Writes a 16-bit grayscale PNG where value `v` encodes `v / 65535`.
pub fn save_edge_map(map: &EdgeMap, path: impl AsRef<Path>) -> Result<(), EdgeError> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(map.width, map.height, |x, y| {
        Luma([(map.get(x, y) * 65535.0).round() as u16])
    });
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| EdgeError::Io {
        path: path.to_owned(),
        msg: e.to_string(),
    })
}

/// Reads an edge map PNG. 16-bit files map `v -> v/65535`; 8-bit files map
/// `v -> v/255`. `expected` checks the size against a declared image.
pub fn load_edge_map(path: impl AsRef<Path>, expected: Option<(u32, u32)>) -> Result<EdgeMap, EdgeError> {
    let path = path.as_ref();
    let io = |msg: String| EdgeError::Io {
        path: path.to_owned(),
        msg,
    };
    let img = image::open(path).map_err(|e| io(e.to_string()))?;
    let gray = img.to_luma16();
    let (w, h) = gray.dimensions();
    let response = gray.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
    let map = EdgeMap {
        width: w,
        height: h,
        response,
    };
    if let Some((ew, eh)) = expected {
        map.check_dims(ew, eh)?;
    }
    Ok(map)
}
