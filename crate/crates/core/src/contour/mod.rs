//! Object outline and surface estimates from four extreme clicks.
//!
//! Consecutive clicks (left, top, right, bottom, back to left) are joined by
//! boundary paths over an [`EdgeMap`]. The closed contour is filled to give
//! an object surface, and the surface is thinned to a skeleton that is safe
//! to clamp as object.

mod path;
mod skeleton;

pub use path::{maximin_path, min_cost_path, PathObjective, PixelPath};
pub use skeleton::{components_8, skeletonize};

use std::collections::VecDeque;

use thiserror::Error;

use crate::edge::EdgeMap;
use crate::geometry::{box_from_clicks, BinaryMask, BoundingBox, ExtremeClicks, Label, Point, Role};

#[derive(Debug, Error, PartialEq)]
pub enum ContourError {
    #[error("point ({}, {}) is outside the search region", .0.x, .0.y)]
    PointOutsideRegion(Point),
    #[error("search region extends past the edge map")]
    RegionOutsideMap,
    #[error("no path between endpoints")]
    NoPath,
}

/// Default dilation of the click box when searching for boundary paths.
pub const DEFAULT_SEARCH_MARGIN: u32 = 5;

/// Contour, filled surface and skeleton derived from extreme clicks.
#[derive(Clone, Debug)]
pub struct SurfaceEstimate {
    /// Paths left→top, top→right, right→bottom, bottom→left.
    pub contour: [PixelPath; 4],
    pub surface: BinaryMask,
    pub skeleton: BinaryMask,
    /// Region the paths were confined to.
    pub region: BoundingBox,
}

impl SurfaceEstimate {
    /// Every contour pixel once, in traversal order.
    pub fn contour_pixels(&self) -> Vec<Point> {
        let mut seen = std::collections::HashSet::new();
        self.contour
            .iter()
            .flat_map(|p| p.pixels.iter().copied())
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

/// Joins the four clicks with boundary paths, fills the enclosed surface and
/// skeletonises it.
///
/// Paths are confined to the click box dilated by `margin` (clipped to the
/// map). The surface is the contour plus every region pixel that a
/// 4-connected flood from the region border cannot reach without crossing
/// the contour.
pub fn estimate_surface(clicks: &ExtremeClicks, edges: &EdgeMap, margin: u32) -> Result<SurfaceEstimate, ContourError> {
    estimate_surface_with(clicks, edges, margin, PathObjective::Maximin)
}

pub fn estimate_surface_with(
    clicks: &ExtremeClicks,
    edges: &EdgeMap,
    margin: u32,
    objective: PathObjective,
) -> Result<SurfaceEstimate, ContourError> {
    let (w, h) = edges.dims();
    let click_box = box_from_clicks(clicks);
    if !click_box.fits(w, h) {
        return Err(ContourError::RegionOutsideMap);
    }
    let region = click_box.dilate(margin, w, h);

    let order = [Role::Left, Role::Top, Role::Right, Role::Bottom, Role::Left];
    let mut paths = Vec::with_capacity(4);
    for pair in order.windows(2) {
        paths.push(path::find_path(objective, edges, clicks.get(pair[0]), clicks.get(pair[1]), region)?);
    }
    let contour: [PixelPath; 4] = paths.try_into().expect("four paths");

    let mut wall = BinaryMask::new(w, h);
    for p in contour.iter().flat_map(|c| &c.pixels) {
        wall.set(p.x, p.y, Label::Object);
    }
    let surface = fill_enclosed(&wall, &region);
    let skeleton = skeletonize(&surface);
    Ok(SurfaceEstimate {
        contour,
        surface,
        skeleton,
        region,
    })
}

/// Contour plus the pixels of `region` that a 4-connected flood from the
/// region border cannot reach without stepping on the contour.
fn fill_enclosed(contour: &BinaryMask, region: &BoundingBox) -> BinaryMask {
    let (w, h) = contour.dims();
    let mut outside = vec![false; w as usize * h as usize];
    let mut queue = VecDeque::new();
    for p in region.pixels() {
        let on_border = p.x == region.x_min || p.x == region.x_max || p.y == region.y_min || p.y == region.y_max;
        if on_border && !contour.is_object(p.x, p.y) {
            outside[contour.index(p.x, p.y)] = true;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        for (dx, dy) in [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)] {
            let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
            let q = Point::new(x as u32, y as u32);
            if x < 0 || y < 0 || !region.contains(q) {
                continue;
            }
            let i = contour.index(q.x, q.y);
            if !outside[i] && !contour.is_object(q.x, q.y) {
                outside[i] = true;
                queue.push_back(q);
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| {
        if region.contains(Point::new(x, y)) && !outside[contour.index(x, y)] {
            Label::Object
        } else {
            Label::Background
        }
    })
}
