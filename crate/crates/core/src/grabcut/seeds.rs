//! Clamp and appearance-initialisation regions for the two GrabCut modes.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::GrabCutError;
use crate::contour::SurfaceEstimate;
use crate::geometry::{BinaryMask, BoundingBox, Label, Point};

/// Something about the input forced a fallback while building seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedWarning {
    /// The box covers the whole image, so there is no ring and nothing to
    /// clamp as background; the background model starts from the box frame.
    EmptyRing,
    /// The skeleton had no pixel inside the box; the clicks are clamped
    /// instead.
    SkeletonOutsideBox,
}

impl fmt::Display for SeedWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedWarning::EmptyRing => f.write_str("box covers the image; background model initialised from the box frame"),
            SeedWarning::SkeletonOutsideBox => f.write_str("skeleton misses the box; clamping the click pixels instead"),
        }
    }
}

/// Which pixels are clamped and which initialise each appearance model.
///
/// The background initialisation region (a ring around the box) lies inside
/// the clamped background (everything outside the box), so only the object
/// side satisfies `clamp ⊆ init`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedConfig {
    pub clamp_object: BinaryMask,
    pub clamp_background: BinaryMask,
    pub object_init: BinaryMask,
    pub background_init: BinaryMask,
    pub warnings: Vec<SeedWarning>,
}

impl SeedConfig {
    pub fn validate(&self) -> Result<(), GrabCutError> {
        let dims = self.clamp_object.dims();
        if [&self.clamp_background, &self.object_init, &self.background_init]
            .iter()
            .any(|m| m.dims() != dims)
        {
            return Err(GrabCutError::Dimensions);
        }
        if let Some(p) = self.clamp_object.intersect(&self.clamp_background).object_pixels().next() {
            return Err(GrabCutError::ClampConflict { x: p.x, y: p.y });
        }
        if !self.clamp_object.is_subset_of(&self.object_init) {
            return Err(GrabCutError::Config("object clamp must lie inside the object initialisation".into()));
        }
        if self.object_init.is_empty() || self.background_init.is_empty() {
            return Err(GrabCutError::NoPixels);
        }
        Ok(())
    }
}

/// Width of the background ring around a `w x h` box whose area is about
/// twice the box area: the positive root of `4m² + 2(w+h)m − 2wh = 0`,
/// rounded, and at least 1.
pub fn ring_margin(w: u32, h: u32) -> u32 {
    let (w, h) = (w as f64, h as f64);
    let s = w + h;
    let m = ((-s + (s * s + 8.0 * w * h).sqrt()) / 4.0).round();
    (m as u32).max(1)
}

/// Centred rectangle with each side half the box side (rounded, at least 1).
pub fn core_box(b: &BoundingBox) -> BoundingBox {
    let half = |len: u32| ((len as f64 / 2.0).round() as u32).max(1);
    let (cw, ch) = (half(b.width()), half(b.height()));
    let x0 = b.x_min + (b.width() - cw) / 2;
    let y0 = b.y_min + (b.height() - ch) / 2;
    BoundingBox::new(x0, y0, x0 + cw - 1, y0 + ch - 1).expect("core fits inside box")
}

/// Seeds for box-only GrabCut: the box initialises the object model and its
/// central quarter is clamped object; everything outside is clamped
/// background and a ring of about twice the box area initialises the
/// background model.
pub fn build_box_seeds(b: &BoundingBox, width: u32, height: u32) -> Result<SeedConfig, GrabCutError> {
    let (object_init, clamp_background, background_init, warnings) = outer_seeds(b, width, height)?;
    let clamp_object = BinaryMask::from_box(width, height, &core_box(b));
    Ok(SeedConfig {
        clamp_object,
        clamp_background,
        object_init,
        background_init,
        warnings,
    })
}

/// Seeds for extreme-click GrabCut: the surface estimate initialises the
/// object model and its skeleton is clamped object. Both are cut to the box
/// so they never meet the clamped outside. Background handling matches
/// [`build_box_seeds`].
pub fn build_click_seeds(
    surface: &SurfaceEstimate,
    b: &BoundingBox,
    width: u32,
    height: u32,
) -> Result<SeedConfig, GrabCutError> {
    if surface.surface.dims() != (width, height) {
        return Err(GrabCutError::Dimensions);
    }
    let (inside, clamp_background, background_init, mut warnings) = outer_seeds(b, width, height)?;
    let clicks: Vec<Point> = surface.contour.iter().filter_map(|p| p.pixels.first().copied()).collect();

    let mut object_init = surface.surface.intersect(&inside);
    let mut clamp_object = surface.skeleton.intersect(&inside);
    if clamp_object.is_empty() {
        warnings.push(SeedWarning::SkeletonOutsideBox);
        log::warn!("{}", SeedWarning::SkeletonOutsideBox);
        for p in &clicks {
            if b.contains(*p) {
                clamp_object.set(p.x, p.y, Label::Object);
            }
        }
    }
    object_init = object_init.union(&clamp_object);
    Ok(SeedConfig {
        clamp_object,
        clamp_background,
        object_init,
        background_init,
        warnings,
    })
}

type Outer = (BinaryMask, BinaryMask, BinaryMask, Vec<SeedWarning>);

/// Box interior, outside clamp, background ring and warnings.
fn outer_seeds(b: &BoundingBox, width: u32, height: u32) -> Result<Outer, GrabCutError> {
    if !b.fits(width, height) {
        return Err(GrabCutError::BoxOutsideImage);
    }
    let inside = BinaryMask::from_box(width, height, b);
    let clamp_background = inside.complement();
    let m = ring_margin(b.width(), b.height());
    let ring = BinaryMask::from_box(width, height, &b.dilate(m, width, height)).intersect(&clamp_background);
    let mut warnings = Vec::new();
    let background_init = if ring.is_empty() {
        warnings.push(SeedWarning::EmptyRing);
        log::warn!("{}", SeedWarning::EmptyRing);
        BinaryMask::from_fn(width, height, |x, y| {
            let on_frame = x == b.x_min || x == b.x_max || y == b.y_min || y == b.y_max;
            if on_frame {
                Label::Object
            } else {
                Label::Background
            }
        })
    } else {
        ring
    };
    Ok((inside, clamp_background, background_init, warnings))
}
