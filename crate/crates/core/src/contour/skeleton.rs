use crate::geometry::{BinaryMask, Label, Point};

/// Zhang–Suen thinning.
///
/// Pixels outside the raster count as background. Zhang–Suen erases some
/// shapes entirely (a 2x2 block, two-pixel-thick diagonals); when an input
/// component loses every pixel, its pixel nearest the component centroid is
/// put back so the component count is preserved and the output is never
/// empty for a non-empty input.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut on: Vec<bool> = mask.labels().iter().map(|&l| l == Label::Object).collect();
    let at = |on: &[bool], x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && on[y as usize * w as usize + x as usize]
    };
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            marked.clear();
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    if !at(&on, x, y) {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let n = [
                        at(&on, x, y - 1),
                        at(&on, x + 1, y - 1),
                        at(&on, x + 1, y),
                        at(&on, x + 1, y + 1),
                        at(&on, x, y + 1),
                        at(&on, x - 1, y + 1),
                        at(&on, x - 1, y),
                        at(&on, x - 1, y - 1),
                    ];
                    let b = n.iter().filter(|&&v| v).count();
                    let a = (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count();
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let erase = (2..=6).contains(&b)
                        && a == 1
                        && if step == 0 {
                            !(p2 && p4 && p6) && !(p4 && p6 && p8)
                        } else {
                            !(p2 && p4 && p8) && !(p2 && p6 && p8)
                        };
                    if erase {
                        marked.push(y as usize * w as usize + x as usize);
                    }
                }
            }
            changed |= !marked.is_empty();
            for &i in &marked {
                on[i] = false;
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = BinaryMask::from_fn(w, h, |x, y| {
        if on[y as usize * w as usize + x as usize] {
            Label::Object
        } else {
            Label::Background
        }
    });
    for comp in components_8(mask) {
        if comp.iter().any(|p| out.is_object(p.x, p.y)) {
            continue;
        }
        let n = comp.len() as f64;
        let cx = comp.iter().map(|p| p.x as f64).sum::<f64>() / n;
        let cy = comp.iter().map(|p| p.y as f64).sum::<f64>() / n;
        let keep = comp
            .iter()
            .min_by(|a, b| {
                let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                da.total_cmp(&db)
            })
            .expect("components are non-empty");
        out.set(keep.x, keep.y, Label::Object);
    }
    out
}

/// 8-connected components of the object pixels, each in discovery order.
pub fn components_8(mask: &BinaryMask) -> Vec<Vec<Point>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w as usize * h as usize];
    let mut comps = Vec::new();
    for start in mask.object_pixels() {
        let si = mask.index(start.x, start.y);
        if seen[si] {
            continue;
        }
        seen[si] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(p) = stack.pop() {
            comp.push(p);
            for (dx, dy) in super::path::NEIGHBORS_8 {
                let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                if !mask.in_bounds(x, y) {
                    continue;
                }
                let (x, y) = (x as u32, y as u32);
                let i = mask.index(x, y);
                if !seen[i] && mask.is_object(x, y) {
                    seen[i] = true;
                    stack.push(Point::new(x, y));
                }
            }
        }
        comps.push(comp);
    }
    comps
}
