//! Brute-force references for the min-cut, maximin path and random masks.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xclick_core::edge::EdgeMap;
use xclick_core::geometry::{BinaryMask, Label, Point};
use xclick_core::grabcut::{GridEnergy, FORWARD_NEIGHBORS};

pub const W: u32 = 4;
pub const H: u32 = 3;

pub struct Instance {
    pub unary: Vec<[f64; 2]>,
    /// Weight per unordered neighbour pair `(i, j)` with `i < j`.
    pub pairs: HashMap<(usize, usize), f64>,
    pub clamp_fg: Vec<bool>,
    pub clamp_bg: Vec<bool>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = (W * H) as usize;
    let unary = (0..n).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
    let mut pairs = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let (xi, yi) = ((i % W as usize) as i64, (i / W as usize) as i64);
            let (xj, yj) = ((j % W as usize) as i64, (j / W as usize) as i64);
            if (xi - xj).abs().max((yi - yj).abs()) == 1 {
                pairs.insert((i, j), rng.random_range(0.0..5.0));
            }
        }
    }
    let mut clamp_fg = vec![false; n];
    let mut clamp_bg = vec![false; n];
    for i in 0..n {
        match rng.random_range(0..10) {
            0 => clamp_fg[i] = true,
            1 => clamp_bg[i] = true,
            _ => {}
        }
    }
    Instance {
        unary,
        pairs,
        clamp_fg,
        clamp_bg,
    }
}

pub fn to_energy(inst: &Instance) -> GridEnergy {
    let n = (W * H) as usize;
    let mut pairwise = vec![[0.0; 4]; n];
    for (i, ws) in pairwise.iter_mut().enumerate() {
        let (x, y) = ((i % W as usize) as i64, (i / W as usize) as i64);
        for (k, (dx, dy)) in FORWARD_NEIGHBORS.iter().enumerate() {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && nx < W as i64 && ny < H as i64 {
                let j = (ny * W as i64 + nx) as usize;
                ws[k] = inst.pairs[&(i.min(j), i.max(j))];
            }
        }
    }
    GridEnergy::new(W, H, inst.unary.clone(), pairwise).unwrap()
}

pub fn mask(bits: &[bool]) -> BinaryMask {
    BinaryMask::from_fn(W, H, |x, y| if bits[(y * W + x) as usize] { Label::Object } else { Label::Background })
}

pub fn oracle_energy(inst: &Instance, labels: &[bool]) -> f64 {
    let u: f64 = labels.iter().zip(&inst.unary).map(|(&l, u)| if l { u[1] } else { u[0] }).sum();
    let p: f64 = inst.pairs.iter().filter(|((i, j), _)| labels[*i] != labels[*j]).map(|(_, w)| w).sum();
    u + p
}

pub fn oracle_minimum(inst: &Instance) -> f64 {
    let n = (W * H) as usize;
    let mut best = f64::INFINITY;
    for bits in 0u32..1 << n {
        let labels: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
        let ok = (0..n).all(|i| (!inst.clamp_fg[i] || labels[i]) && (!inst.clamp_bg[i] || !labels[i]));
        if ok {
            best = best.min(oracle_energy(inst, &labels));
        }
    }
    best
}

pub const N: i64 = 6;

/// Threshold sweep: the bottleneck is the largest level whose
/// super-level set links `p` and `q`; the pixel count is one more than the
/// hop distance inside that set, from Floyd-Warshall.
pub fn maximin_oracle(e: &EdgeMap, p: Point, q: Point) -> (f64, usize) {
    let n = (N * N) as usize;
    let val = |i: usize| e.get((i as i64 % N) as u32, (i as i64 / N) as u32);
    let adjacent = |i: usize, j: usize| {
        let (xi, yi, xj, yj) = (i as i64 % N, i as i64 / N, j as i64 % N, j as i64 / N);
        i != j && (xi - xj).abs() <= 1 && (yi - yj).abs() <= 1
    };
    let (s, t) = ((p.y as i64 * N + p.x as i64) as usize, (q.y as i64 * N + q.x as i64) as usize);
    let mut levels: Vec<f64> = (0..n).map(val).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    for level in levels {
        let keep: Vec<bool> = (0..n).map(|i| val(i) >= level).collect();
        if !keep[s] || !keep[t] {
            continue;
        }
        let mut d = vec![vec![usize::MAX / 4; n]; n];
        for i in 0..n {
            d[i][i] = 0;
            for j in 0..n {
                if keep[i] && keep[j] && adjacent(i, j) {
                    d[i][j] = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        if d[s][t] < usize::MAX / 4 {
            return (level, d[s][t] + 1);
        }
    }
    unreachable!("the full grid is connected")
}

/// A random blob: a union of ellipses, sometimes with stray pixels, on a
/// canvas of random size. Never empty.
pub fn random_blob(rng: &mut ChaCha8Rng) -> BinaryMask {
    let (w, h) = (rng.random_range(4..64u32), rng.random_range(4..64u32));
    let shapes: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.5..w as f64 / 2.0 + 1.0),
                rng.random_range(0.5..h as f64 / 2.0 + 1.0),
            )
        })
        .collect();
    let mut m = BinaryMask::from_fn(w, h, |x, y| {
        let inside = shapes.iter().any(|&(cx, cy, rx, ry)| {
            let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
            dx * dx + dy * dy <= 1.0
        });
        if inside { Label::Object } else { Label::Background }
    });
    for _ in 0..rng.random_range(0..3) {
        m.set(rng.random_range(0..w), rng.random_range(0..h), Label::Object);
    }
    if m.object_count() == 0 {
        m.set(w / 2, h / 2, Label::Object);
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point_in(rng: &mut ChaCha8Rng, n: u32) -> Point {
    Point::new(rng.random_range(0..n), rng.random_range(0..n))
}
