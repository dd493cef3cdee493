use serde::{Deserialize, Serialize};

use super::{ErrorCode, ProtocolError};
use crate::geometry::{BinaryMask, Label, Point, Role};

/// How "within `tolerance` pixels" is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Chebyshev,
}

impl DistanceMetric {
    fn within(self, dx: i64, dy: i64, tolerance: u32) -> bool {
        let t = tolerance as i64;
        match self {
            DistanceMetric::Euclidean => dx * dx + dy * dy <= t * t,
            DistanceMetric::Chebyshev => dx.abs().max(dy.abs()) <= t,
        }
    }
}

/// Pixels where a click for `role` counts as correct.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptedArea {
    pub role: Role,
    pub tolerance: u32,
    pub metric: DistanceMetric,
    pub mask: BinaryMask,
}

/// Result of checking one click against its area.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickCheck {
    Accepted,
    Rejected,
    OutOfBounds,
}

impl ClickCheck {
    pub fn accepted(self) -> bool {
        self == ClickCheck::Accepted
    }
}

impl AcceptedArea {
    pub fn contains(&self, p: Point) -> bool {
        validate_click(p, self).accepted()
    }

    /// The area as a PNG, accepted pixels white.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        self.mask.to_png_bytes()
    }
}

/// Area for `role` with Euclidean distance.
pub fn accepted_area(gt: &BinaryMask, role: Role, tolerance: u32) -> Result<AcceptedArea, ProtocolError> {
    accepted_area_with(gt, role, tolerance, DistanceMetric::Euclidean)
}

/// Builds the accepted area in three steps (described for `top`):
///
/// 1. the object pixels on the topmost object row;
/// 2. every object pixel whose row is within `tolerance` of that row;
/// 3. every image pixel within `tolerance` of a pixel from step 2.
///
/// The other roles are the same up to symmetry.
pub fn accepted_area_with(
    gt: &BinaryMask,
    role: Role,
    tolerance: u32,
    metric: DistanceMetric,
) -> Result<AcceptedArea, ProtocolError> {
    let tight = crate::geometry::tight_box_from_mask(gt)
        .map_err(|_| ProtocolError::new(ErrorCode::EmptyMask, "ground-truth mask has no object pixels"))?;
    let t = tolerance as i64;
    let near_extreme = |p: &Point| -> bool {
        let (x, y) = (p.x as i64, p.y as i64);
        match role {
            Role::Left => x - tight.x_min as i64 <= t,
            Role::Top => y - tight.y_min as i64 <= t,
            Role::Right => tight.x_max as i64 - x <= t,
            Role::Bottom => tight.y_max as i64 - y <= t,
        }
    };
    let offsets: Vec<(i64, i64)> = (-t..=t)
        .flat_map(|dy| (-t..=t).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| metric.within(dx, dy, tolerance))
        .collect();
    let (w, h) = gt.dims();
    let mut mask = BinaryMask::new(w, h);
    for s in gt.object_pixels().filter(near_extreme) {
        for &(dx, dy) in &offsets {
            let (x, y) = (s.x as i64 + dx, s.y as i64 + dy);
            if gt.in_bounds(x, y) {
                mask.set(x as u32, y as u32, Label::Object);
            }
        }
    }
    Ok(AcceptedArea {
        role,
        tolerance,
        metric,
        mask,
    })
}

/// Membership test; points off the image are flagged separately.
pub fn validate_click(p: Point, area: &AcceptedArea) -> ClickCheck {
    let (w, h) = area.mask.dims();
    if p.x >= w || p.y >= h {
        ClickCheck::OutOfBounds
    } else if area.mask.is_object(p.x, p.y) {
        ClickCheck::Accepted
    } else {
        ClickCheck::Rejected
    }
}

/// The four areas of a mask, indexed by role.
pub fn accepted_areas(gt: &BinaryMask, tolerance: u32, metric: DistanceMetric) -> Result<[AcceptedArea; 4], ProtocolError> {
    let v = Role::ALL
        .iter()
        .map(|&r| accepted_area_with(gt, r, tolerance, metric))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(v.try_into().expect("four roles"))
}
