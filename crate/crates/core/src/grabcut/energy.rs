//! Pixel-grid labeling energy and its exact minimisation by min-cut.

use std::f64::consts::FRAC_1_SQRT_2;

use super::maxflow::FlowGraph;
use super::GrabCutError;
use crate::edge::EdgeMap;
use crate::geometry::{BinaryMask, Label};

/// Forward half of the 8-neighbourhood: E, SE, S, SW. Every unordered
/// neighbour pair appears exactly once.
pub const FORWARD_NEIGHBORS: [(i64, i64); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];

/// Per-pixel object/background assignment, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    width: u32,
    height: u32,
    object: Vec<bool>,
}

impl Labeling {
    pub fn new(width: u32, height: u32, object: Vec<bool>) -> Result<Self, GrabCutError> {
        if object.len() != width as usize * height as usize {
            return Err(GrabCutError::Dimensions);
        }
        Ok(Self { width, height, object })
    }

    pub fn all(width: u32, height: u32, object: bool) -> Self {
        Self {
            width,
            height,
            object: vec![object; width as usize * height as usize],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn is_object(&self, x: u32, y: u32) -> bool {
        self.object[y as usize * self.width as usize + x as usize]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.object
    }

    pub fn object_count(&self) -> usize {
        self.object.iter().filter(|&&o| o).count()
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            if self.is_object(x, y) {
                Label::Object
            } else {
                Label::Background
            }
        })
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        let (width, height) = mask.dims();
        Self {
            width,
            height,
            object: mask.labels().iter().map(|&l| l == Label::Object).collect(),
        }
    }
}

/// `E(L) = sum_p U_p(l_p) + sum_{p~q} w_pq [l_p != l_q]` over the 8-connected
/// grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridEnergy {
    width: u32,
    height: u32,
    /// `[cost of background, cost of object]` per pixel.
    unary: Vec<[f64; 2]>,
    /// Weights towards the [`FORWARD_NEIGHBORS`]; zero where the neighbour
    /// falls outside the grid.
    pairwise: Vec<[f64; 4]>,
}

impl GridEnergy {
    pub fn new(width: u32, height: u32, unary: Vec<[f64; 2]>, mut pairwise: Vec<[f64; 4]>) -> Result<Self, GrabCutError> {
        let n = width as usize * height as usize;
        if unary.len() != n || pairwise.len() != n {
            return Err(GrabCutError::Dimensions);
        }
        if unary.iter().flatten().any(|u| !u.is_finite()) {
            return Err(GrabCutError::Config("unaries must be finite".into()));
        }
        for (i, ws) in pairwise.iter_mut().enumerate() {
            let (x, y) = ((i % width as usize) as i64, (i / width as usize) as i64);
            for (k, &(dx, dy)) in FORWARD_NEIGHBORS.iter().enumerate() {
                if !(ws[k] >= 0.0 && ws[k].is_finite()) {
                    return Err(GrabCutError::NotSubmodular(ws[k]));
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                    ws[k] = 0.0;
                }
            }
        }
        Ok(Self {
            width,
            height,
            unary,
            pairwise,
        })
    }

    /// Pairwise weights from an edge map via [`pairwise_weight`].
    pub fn from_edges(unary: Vec<[f64; 2]>, edges: &EdgeMap, lambda: f64, beta: f64) -> Result<Self, GrabCutError> {
        let (w, h) = edges.dims();
        let mut pairwise = vec![[0.0; 4]; w as usize * h as usize];
        for y in 0..h {
            for x in 0..w {
                let ep = edges.get(x, y);
                for (k, &(dx, dy)) in FORWARD_NEIGHBORS.iter().enumerate() {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let wt = pairwise_weight(ep, edges.get(nx as u32, ny as u32), lambda, beta);
                    pairwise[(y * w + x) as usize][k] = if dx != 0 && dy != 0 { wt * FRAC_1_SQRT_2 } else { wt };
                }
            }
        }
        Self::new(w, h, unary, pairwise)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn pairwise(&self) -> &[[f64; 4]] {
        &self.pairwise
    }

    fn neighbor(&self, i: usize, k: usize) -> Option<usize> {
        let w = self.width as i64;
        let (x, y) = (i as i64 % w, i as i64 / w);
        let (dx, dy) = FORWARD_NEIGHBORS[k];
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && nx < w && ny < self.height as i64).then(|| (ny * w + nx) as usize)
    }

    pub fn energy(&self, labeling: &Labeling) -> f64 {
        let l = labeling.as_slice();
        let mut e = 0.0;
        for i in 0..l.len() {
            e += self.unary[i][l[i] as usize];
            for k in 0..4 {
                if let Some(j) = self.neighbor(i, k) {
                    if l[i] != l[j] {
                        e += self.pairwise[i][k];
                    }
                }
            }
        }
        e
    }
}

/// `lambda * exp(-beta * (e_p + e_q))`: cutting is cheap along strong edges.
/// Diagonal neighbours are additionally scaled by `1/sqrt(2)` when the grid
/// energy is assembled.
pub fn pairwise_weight(e_p: f64, e_q: f64, lambda: f64, beta: f64) -> f64 {
    lambda * (-beta * (e_p + e_q)).exp()
}

/// A global minimiser of `energy` among labelings that keep every pixel of
/// `clamp_object` as object and every pixel of `clamp_background` as
/// background.
///
/// Clamps become infinite terminal capacities. Among several minimisers the
/// one with the smallest object set is returned.
pub fn min_cut_segment(
    energy: &GridEnergy,
    clamp_object: &BinaryMask,
    clamp_background: &BinaryMask,
) -> Result<Labeling, GrabCutError> {
    let (w, h) = energy.dims();
    if clamp_object.dims() != (w, h) || clamp_background.dims() != (w, h) {
        return Err(GrabCutError::Dimensions);
    }
    let n = w as usize * h as usize;
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::with_capacity(n + 2, n * 5);
    for i in 0..n {
        let (x, y) = ((i % w as usize) as u32, (i / w as usize) as u32);
        let fg = clamp_object.is_object(x, y);
        let bg = clamp_background.is_object(x, y);
        if fg && bg {
            return Err(GrabCutError::ClampConflict { x, y });
        }
        // Source side is object: cutting s->p labels p background and pays
        // U_p(0); cutting p->t labels it object and pays U_p(1).
        let [u0, u1] = energy.unary[i];
        let m = u0.min(u1);
        let to_source = if fg { f64::INFINITY } else { u0 - m };
        let to_sink = if bg { f64::INFINITY } else { u1 - m };
        if to_source > 0.0 {
            g.add_edge(s, i, to_source, 0.0);
        }
        if to_sink > 0.0 {
            g.add_edge(i, t, to_sink, 0.0);
        }
        for k in 0..4 {
            let wt = energy.pairwise[i][k];
            if wt > 0.0 {
                if let Some(j) = energy.neighbor(i, k) {
                    g.add_edge(i, j, wt, wt);
                }
            }
        }
    }
    g.max_flow(s, t);
    let side = g.source_side(s);
    Labeling::new(w, h, side[..n].to_vec())
}
