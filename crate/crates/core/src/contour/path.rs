use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::ContourError;
use crate::edge::EdgeMap;
use crate::geometry::{BoundingBox, Point};

/// Fixed neighbour order: E, SE, S, SW, W, NW, N, NE.
pub(crate) const NEIGHBORS_8: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// An 8-connected pixel path and its weakest edge response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelPath {
    pub pixels: Vec<Point>,
    pub bottleneck: f64,
}

impl PixelPath {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Consecutive pixels are distinct king-move neighbours.
    pub fn is_connected(&self) -> bool {
        self.pixels.windows(2).all(|w| w[0].chebyshev(&w[1]) == 1)
    }
}

/// How a boundary path between two clicks is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathObjective {
    /// Maximise the weakest edge response, then minimise pixel count.
    #[default]
    Maximin,
    /// Minimise the summed `1 - e_p` over path pixels.
    SumCost,
}

struct Grid<'a> {
    edges: &'a EdgeMap,
    region: BoundingBox,
    w: usize,
}

impl<'a> Grid<'a> {
    fn new(edges: &'a EdgeMap, region: BoundingBox) -> Self {
        Self {
            edges,
            region,
            w: region.width() as usize,
        }
    }

    fn id(&self, p: Point) -> usize {
        (p.y - self.region.y_min) as usize * self.w + (p.x - self.region.x_min) as usize
    }

    fn point(&self, id: usize) -> Point {
        Point::new(self.region.x_min + (id % self.w) as u32, self.region.y_min + (id / self.w) as u32)
    }

    fn len(&self) -> usize {
        self.region.area() as usize
    }

    fn neighbors(&self, p: Point) -> impl Iterator<Item = Point> + '_ {
        NEIGHBORS_8.iter().filter_map(move |&(dx, dy)| {
            let x = p.x as i64 + dx;
            let y = p.y as i64 + dy;
            let r = &self.region;
            (x >= r.x_min as i64 && x <= r.x_max as i64 && y >= r.y_min as i64 && y <= r.y_max as i64)
                .then(|| Point::new(x as u32, y as u32))
        })
    }

    fn check(&self, p: Point, q: Point) -> Result<(), ContourError> {
        let (w, h) = self.edges.dims();
        if !self.region.fits(w, h) {
            return Err(ContourError::RegionOutsideMap);
        }
        for pt in [p, q] {
            if !self.region.contains(pt) {
                return Err(ContourError::PointOutsideRegion(pt));
            }
        }
        Ok(())
    }

    fn trace(&self, parent: &[usize], from: usize, to: usize) -> Vec<Point> {
        let mut out = vec![self.point(to)];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            out.push(self.point(cur));
        }
        out.reverse();
        out
    }
}

#[derive(PartialEq)]
struct Widest(f64, usize);

impl Eq for Widest {}

impl PartialOrd for Widest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Widest {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Among all 8-connected paths from `p` to `q` inside `region`, one whose
/// weakest pixel is as strong as possible, and among those one with the
/// fewest pixels.
///
/// The bottleneck value is found with a best-first widest-path search; the
/// path itself is a breadth-first shortest path over pixels at or above it.
pub fn maximin_path(edges: &EdgeMap, p: Point, q: Point, region: BoundingBox) -> Result<PixelPath, ContourError> {
    let g = Grid::new(edges, region);
    g.check(p, q)?;
    let bottleneck = widest_bottleneck(&g, p, q)?;
    let (s, t) = (g.id(p), g.id(q));
    let mut parent = vec![usize::MAX; g.len()];
    parent[s] = s;
    let mut queue = VecDeque::from([p]);
    while let Some(cur) = queue.pop_front() {
        if cur == q {
            break;
        }
        for n in g.neighbors(cur) {
            let ni = g.id(n);
            if parent[ni] == usize::MAX && edges.at(n) >= bottleneck {
                parent[ni] = g.id(cur);
                queue.push_back(n);
            }
        }
    }
    if parent[t] == usize::MAX {
        return Err(ContourError::NoPath);
    }
    Ok(PixelPath {
        pixels: g.trace(&parent, s, t),
        bottleneck,
    })
}

fn widest_bottleneck(g: &Grid<'_>, p: Point, q: Point) -> Result<f64, ContourError> {
    let mut best = vec![f64::NEG_INFINITY; g.len()];
    let mut done = vec![false; g.len()];
    let s = g.id(p);
    best[s] = g.edges.at(p);
    let mut heap = BinaryHeap::from([Widest(best[s], s)]);
    while let Some(Widest(width, id)) = heap.pop() {
        if done[id] {
            continue;
        }
        done[id] = true;
        let cur = g.point(id);
        if cur == q {
            return Ok(width);
        }
        for n in g.neighbors(cur) {
            let ni = g.id(n);
            let cand = width.min(g.edges.at(n));
            if !done[ni] && cand > best[ni] {
                best[ni] = cand;
                heap.push(Widest(cand, ni));
            }
        }
    }
    Err(ContourError::NoPath)
}

/// Minimum summed `1 - e_p` path (Dijkstra), for comparison with
/// [`maximin_path`]. The reported bottleneck is the path's weakest pixel.
pub fn min_cost_path(edges: &EdgeMap, p: Point, q: Point, region: BoundingBox) -> Result<PixelPath, ContourError> {
    let g = Grid::new(edges, region);
    g.check(p, q)?;
    let cost = |pt: Point| 1.0 - edges.at(pt);
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut parent = vec![usize::MAX; g.len()];
    let s = g.id(p);
    dist[s] = cost(p);
    parent[s] = s;
    // Widest with negated distance doubles as a min-heap.
    let mut heap = BinaryHeap::from([Widest(-dist[s], s)]);
    while let Some(Widest(neg, id)) = heap.pop() {
        let d = -neg;
        if d > dist[id] {
            continue;
        }
        let cur = g.point(id);
        if cur == q {
            break;
        }
        for n in g.neighbors(cur) {
            let ni = g.id(n);
            let nd = d + cost(n);
            if nd < dist[ni] {
                dist[ni] = nd;
                parent[ni] = id;
                heap.push(Widest(-nd, ni));
            }
        }
    }
    let t = g.id(q);
    if parent[t] == usize::MAX {
        return Err(ContourError::NoPath);
    }
    let pixels = g.trace(&parent, s, t);
    let bottleneck = pixels.iter().map(|&pt| edges.at(pt)).fold(f64::INFINITY, f64::min);
    Ok(PixelPath { pixels, bottleneck })
}

pub(crate) fn find_path(
    objective: PathObjective,
    edges: &EdgeMap,
    p: Point,
    q: Point,
    region: BoundingBox,
) -> Result<PixelPath, ContourError> {
    match objective {
        PathObjective::Maximin => maximin_path(edges, p, q, region),
        PathObjective::SumCost => min_cost_path(edges, p, q, region),
    }
}
