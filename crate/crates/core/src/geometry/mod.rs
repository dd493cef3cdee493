//! Pixel geometry shared by every other module.
//!
//! Coordinates are raster coordinates: `x` is the column (0 at the left),
//! `y` is the row (0 at the top). "Top" therefore means the smallest `y`.
//! Boxes use inclusive integer bounds, so a box always contains the pixels
//! its corners name.

mod boxes;
mod clicks;
mod mask;

pub use boxes::{iou_boxes, perturb_box, BoundingBox};
pub use clicks::{box_from_clicks, infer_roles, simulate_extreme_clicks, ExtremeClicks, Role};
pub use mask::{iou_masks, tight_box_from_mask, BinaryMask, Label};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A pixel position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(&self, other: &Point) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl From<(u32, u32)> for Point {
    fn from((x, y): (u32, u32)) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("expected exactly 4 extreme clicks, got {0}")]
    Arity(usize),
    #[error("mask has no object pixels")]
    EmptyMask,
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid box: ({x_min},{y_min})-({x_max},{y_max})")]
    InvalidBox {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
    },
    #[error("label buffer has {got} entries, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("unexpected mask value {value} at ({x},{y}); masks use 0, 128 and 255")]
    MaskValue { value: u8, x: u32, y: u32 },
    #[error("image error: {0}")]
    Image(String),
}
