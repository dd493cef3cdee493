use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BinaryMask, BoundingBox, GeometryError, Point};

/// Which extreme of the object a click marks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Left,
    Top,
    Right,
    Bottom,
}

impl Role {
    /// Assignment priority, also the contour traversal order.
    pub const ALL: [Role; 4] = [Role::Left, Role::Top, Role::Right, Role::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Left => "left",
            Role::Top => "top",
            Role::Right => "right",
            Role::Bottom => "bottom",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Whether `p` is at least as extreme as `q` for this role.
    fn at_least_as_extreme(self, p: Point, q: Point) -> bool {
        match self {
            Role::Left => p.x <= q.x,
            Role::Top => p.y <= q.y,
            Role::Right => p.x >= q.x,
            Role::Bottom => p.y >= q.y,
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Role::Left),
            "top" => Ok(Role::Top),
            "right" => Ok(Role::Right),
            "bottom" => Ok(Role::Bottom),
            _ => Err(format!("unknown role {s:?}")),
        }
    }
}

/// Four clicks in click order, with the role each one plays.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtremeClicks {
    points: [Point; 4],
    /// `roles[r]` is the click index holding role `r` (in [`Role::ALL`] order).
    roles: [usize; 4],
    timestamps: Option<[u64; 4]>,
}

impl ExtremeClicks {
    pub fn points(&self) -> &[Point; 4] {
        &self.points
    }

    pub fn timestamps(&self) -> Option<&[u64; 4]> {
        self.timestamps.as_ref()
    }

    pub fn with_timestamps(mut self, t: [u64; 4]) -> Self {
        self.timestamps = Some(t);
        self
    }

    /// Index into [`points`](Self::points) of the click holding `role`.
    pub fn index_of(&self, role: Role) -> usize {
        self.roles[role.index()]
    }

    pub fn get(&self, role: Role) -> Point {
        self.points[self.index_of(role)]
    }

    pub fn left(&self) -> Point {
        self.get(Role::Left)
    }

    pub fn top(&self) -> Point {
        self.get(Role::Top)
    }

    pub fn right(&self) -> Point {
        self.get(Role::Right)
    }

    pub fn bottom(&self) -> Point {
        self.get(Role::Bottom)
    }

    /// The role held by click `i`.
    pub fn role_of(&self, i: usize) -> Role {
        Role::ALL[self.roles.iter().position(|&j| j == i).expect("roles are a bijection")]
    }
}

/// Assigns left/top/right/bottom to four clicks given in any order.
///
/// Roles are filled in priority order left, top, right, bottom; each takes
/// the first unassigned click (in click order) that is extreme for it. If a
/// greedy pick would leave a later role without an extreme click, the search
/// backtracks. When no assignment makes every role extreme (one click is
/// the unique extreme for two roles), each role takes the most extreme of
/// the clicks still unassigned.
pub fn infer_roles(points: &[Point]) -> Result<ExtremeClicks, GeometryError> {
    let points: [Point; 4] = points.try_into().map_err(|_| GeometryError::Arity(points.len()))?;
    let is_extreme = |role: Role, i: usize| points.iter().all(|&q| role.at_least_as_extreme(points[i], q));

    fn search(
        depth: usize,
        used: &mut [bool; 4],
        roles: &mut [usize; 4],
        ok: &dyn Fn(Role, usize) -> bool,
    ) -> bool {
        if depth == 4 {
            return true;
        }
        let role = Role::ALL[depth];
        for i in 0..4 {
            if !used[i] && ok(role, i) {
                used[i] = true;
                roles[depth] = i;
                if search(depth + 1, used, roles, ok) {
                    return true;
                }
                used[i] = false;
            }
        }
        false
    }

    let mut roles = [0usize; 4];
    let mut used = [false; 4];
    if !search(0, &mut used, &mut roles, &is_extreme) {
        let mut used = [false; 4];
        for role in Role::ALL {
            let mut best: Option<usize> = None;
            for i in (0..4).filter(|&i| !used[i]) {
                match best {
                    Some(b) if role.at_least_as_extreme(points[b], points[i]) => {}
                    _ => best = Some(i),
                }
            }
            let b = best.expect("four clicks for four roles");
            used[b] = true;
            roles[role.index()] = b;
        }
    }
    Ok(ExtremeClicks {
        points,
        roles,
        timestamps: None,
    })
}

/// The box spanned by the clicks: each click contributes one coordinate.
///
/// Computed as the enclosing box of all four clicks, which equals the role
/// read-off (`left.x`, `top.y`, `right.x`, `bottom.y`) whenever every role
/// holds a true extreme, and still contains every click when it cannot.
pub fn box_from_clicks(clicks: &ExtremeClicks) -> BoundingBox {
    BoundingBox::enclosing(&clicks.points)
}

/// Extreme clicks a perfect annotator would place on `mask`.
///
/// For each role, the object pixels achieving the extreme coordinate are
/// taken in scan order (row-major) and the middle one, index `(n-1)/2`, is
/// returned. Clicks come out in left, top, right, bottom order.
pub fn simulate_extreme_clicks(mask: &BinaryMask) -> Result<ExtremeClicks, GeometryError> {
    let tight = super::tight_box_from_mask(mask)?;
    let mut ties: [Vec<Point>; 4] = Default::default();
    for p in mask.object_pixels() {
        if p.x == tight.x_min {
            ties[0].push(p);
        }
        if p.y == tight.y_min {
            ties[1].push(p);
        }
        if p.x == tight.x_max {
            ties[2].push(p);
        }
        if p.y == tight.y_max {
            ties[3].push(p);
        }
    }
    let points = ties.map(|t| t[(t.len() - 1) / 2]);
    Ok(ExtremeClicks {
        points,
        roles: [0, 1, 2, 3],
        timestamps: None,
    })
}

#[derive(Serialize, Deserialize)]
struct WirePoint {
    x: u32,
    y: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_ms: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct WireClicks {
    points: Vec<WirePoint>,
}

impl Serialize for ExtremeClicks {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let points = (0..4)
            .map(|i| WirePoint {
                x: self.points[i].x,
                y: self.points[i].y,
                t_ms: self.timestamps.map(|t| t[i]),
            })
            .collect();
        WireClicks { points }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExtremeClicks {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WireClicks::deserialize(deserializer)?;
        let pts: Vec<Point> = wire.points.iter().map(|p| Point::new(p.x, p.y)).collect();
        let mut clicks = infer_roles(&pts).map_err(serde::de::Error::custom)?;
        let times: Option<Vec<u64>> = wire.points.iter().map(|p| p.t_ms).collect();
        if let Some(t) = times {
            clicks.timestamps = Some([t[0], t[1], t[2], t[3]]);
        }
        Ok(clicks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tight_box_from_mask, Label};

    fn pts(v: &[(u32, u32)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn unique_extrema() {
        let c = infer_roles(&pts(&[(2, 5), (4, 1), (9, 6), (5, 8)])).unwrap();
        assert_eq!(c.left(), Point::new(2, 5));
        assert_eq!(c.top(), Point::new(4, 1));
        assert_eq!(c.right(), Point::new(9, 6));
        assert_eq!(c.bottom(), Point::new(5, 8));
        assert_eq!(box_from_clicks(&c), BoundingBox::new(2, 1, 9, 8).unwrap());

        let r = infer_roles(&pts(&[(5, 8), (9, 6), (4, 1), (2, 5)])).unwrap();
        for role in Role::ALL {
            assert_eq!(r.get(role), c.get(role));
        }
    }

    #[test]
    fn full_tie_uses_priority_order() {
        let c = infer_roles(&pts(&[(0, 0); 4])).unwrap();
        let idx: Vec<usize> = Role::ALL.iter().map(|&r| c.index_of(r)).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert_eq!(box_from_clicks(&c), BoundingBox::new(0, 0, 0, 0).unwrap());
    }

    #[test]
    fn backtracks_to_keep_roles_extreme() {
        // (0,0) and (0,5) tie for left; only (0,0) is topmost.
        let c = infer_roles(&pts(&[(0, 0), (0, 5), (5, 3), (3, 9)])).unwrap();
        assert_eq!(c.left(), Point::new(0, 5));
        assert_eq!(c.top(), Point::new(0, 0));
    }

    #[test]
    fn infeasible_falls_back_and_box_still_contains_clicks() {
        // (0,0) is the unique leftmost and unique topmost click.
        let p = pts(&[(0, 0), (5, 5), (10, 5), (5, 10)]);
        let c = infer_roles(&p).unwrap();
        let b = box_from_clicks(&c);
        assert!(p.iter().all(|&q| b.contains(q)));
        let mut idx: Vec<usize> = Role::ALL.iter().map(|&r| c.index_of(r)).collect();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn arity() {
        assert_eq!(infer_roles(&pts(&[(0, 0); 3])), Err(GeometryError::Arity(3)));
        assert_eq!(infer_roles(&pts(&[(0, 0); 5])), Err(GeometryError::Arity(5)));
    }

    #[test]
    fn simulated_top_click_is_middle_of_tie_run() {
        let m = BinaryMask::from_fn(10, 10, |x, y| {
            if (2..=5).contains(&x) && (1..=4).contains(&y) {
                Label::Object
            } else {
                Label::Background
            }
        });
        let c = simulate_extreme_clicks(&m).unwrap();
        assert_eq!(c.top(), Point::new(3, 1));
        assert_eq!(c.left(), Point::new(2, 2));
        assert_eq!(box_from_clicks(&c), tight_box_from_mask(&m).unwrap());
    }

    #[test]
    fn simulated_single_pixel() {
        let mut m = BinaryMask::new(8, 8);
        m.set(5, 5, Label::Object);
        let c = simulate_extreme_clicks(&m).unwrap();
        assert!(c.points().iter().all(|&p| p == Point::new(5, 5)));
        assert!(simulate_extreme_clicks(&BinaryMask::new(4, 4)).is_err());
    }

    #[test]
    fn json_wire_format() {
        let c = infer_roles(&pts(&[(2, 5), (4, 1), (9, 6), (5, 8)]))
            .unwrap()
            .with_timestamps([10, 20, 30, 40]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"{"points":[{"x":2,"y":5,"t_ms":10},{"x":4,"y":1,"t_ms":20},{"x":9,"y":6,"t_ms":30},{"x":5,"y":8,"t_ms":40}]}"#
        );
        let back: ExtremeClicks = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let no_t: ExtremeClicks = serde_json::from_str(r#"{"points":[{"x":1,"y":1},{"x":1,"y":1},{"x":1,"y":1},{"x":1,"y":1}]}"#).unwrap();
        assert!(no_t.timestamps().is_none());
        assert!(serde_json::from_str::<ExtremeClicks>(r#"{"points":[{"x":1,"y":1}]}"#).is_err());
    }
}
