//! Small generated scenes with known object masks, for tests and demos.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edge::{gradient_edges, save_edge_map};
use crate::evaluation::{write_manifest, EvalError, ManifestEntry};
use crate::geometry::{tight_box_from_mask, BinaryMask, BoundingBox, Label};

pub const RED: [u8; 3] = [200, 30, 30];
pub const BLUE: [u8; 3] = [30, 40, 190];

/// An image, its ground-truth mask and the tight box around the mask.
#[derive(Clone, Debug)]
pub struct Scene {
    pub image: RgbImage,
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
}

impl Scene {
    /// Paints `object` pixels of `mask` in `fg`, others in `bg`, adding
    /// uniform per-channel noise of amplitude `noise` (0 for flat colours).
    pub fn paint(mask: BinaryMask, fg: [u8; 3], bg: [u8; 3], noise: u8, seed: u64) -> Self {
        let (w, h) = mask.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = RgbImage::from_fn(w, h, |x, y| {
            let base = if mask.is_object(x, y) { fg } else { bg };
            Rgb(base.map(|c| {
                if noise == 0 {
                    c
                } else {
                    let d = rng.random_range(-(noise as i32)..=noise as i32);
                    (c as i32 + d).clamp(0, 255) as u8
                }
            }))
        });
        let bbox = tight_box_from_mask(&mask).expect("scene masks are non-empty");
        Self { image, mask, bbox }
    }
}

/// `size x size` image with a red square `[lo, hi]²` on blue.
pub fn square_scene(size: u32, lo: u32, hi: u32) -> Scene {
    let mask = BinaryMask::from_fn(size, size, |x, y| {
        if (lo..=hi).contains(&x) && (lo..=hi).contains(&y) {
            Label::Object
        } else {
            Label::Background
        }
    });
    Scene::paint(mask, RED, BLUE, 0, 0)
}

/// `size x size` image with a red L on blue, inside the box `[lo, hi]²`.
///
/// The L is a vertical bar on the left of the box and a horizontal bar along
/// its bottom, each `thickness` wide, so the box centre and most of its
/// central quarter are background.
pub fn l_scene(size: u32, lo: u32, hi: u32, thickness: u32) -> Scene {
    let mask = BinaryMask::from_fn(size, size, |x, y| {
        let inside = (lo..=hi).contains(&x) && (lo..=hi).contains(&y);
        let bar = x < lo + thickness || y > hi - thickness;
        if inside && bar {
            Label::Object
        } else {
            Label::Background
        }
    });
    Scene::paint(mask, RED, BLUE, 0, 0)
}

/// Writes `<name>.png`, `<name>_mask.png` and `<name>_edges.png` (16-bit
/// gradient edges) into `dir` and returns a manifest entry with paths
/// relative to `dir`.
pub fn write_scene(dir: &Path, name: &str, class: &str, scene: &Scene) -> Result<ManifestEntry, EvalError> {
    let err = |path: PathBuf, e: String| EvalError::Image { path, message: e };
    let image = PathBuf::from(format!("{name}.png"));
    let mask = PathBuf::from(format!("{name}_mask.png"));
    let edges = PathBuf::from(format!("{name}_edges.png"));
    scene.image.save(dir.join(&image)).map_err(|e| err(dir.join(&image), e.to_string()))?;
    scene.mask.save_png(dir.join(&mask)).map_err(|e| err(dir.join(&mask), e.to_string()))?;
    let e = gradient_edges(&scene.image).map_err(|e| err(dir.join(&image), e.to_string()))?;
    save_edge_map(&e, dir.join(&edges)).map_err(|e| err(dir.join(&edges), e.to_string()))?;
    let mut entry = ManifestEntry::new(image, class);
    entry.id = Some(name.to_string());
    entry.mask = Some(mask);
    entry.edges = Some(edges);
    Ok(entry)
}

/// Three squares (class `square`) and three L shapes (class `ell`) of
/// varying size, written with [`write_scene`] plus `manifest.jsonl`.
/// Returns the manifest path.
pub fn write_demo_dataset(dir: &Path) -> Result<PathBuf, EvalError> {
    let mut entries = Vec::new();
    for (i, (lo, hi)) in [(16, 47), (10, 40), (20, 50)].into_iter().enumerate() {
        entries.push(write_scene(dir, &format!("square{i}"), "square", &square_scene(64, lo, hi))?);
    }
    for (i, (lo, hi, t)) in [(12, 51, 12), (8, 47, 10), (14, 55, 14)].into_iter().enumerate() {
        entries.push(write_scene(dir, &format!("ell{i}"), "ell", &l_scene(64, lo, hi, t))?);
    }
    let path = dir.join("manifest.jsonl");
    let file = std::fs::File::create(&path).map_err(|source| EvalError::Io {
        path: path.clone(),
        source,
    })?;
    write_manifest(&entries, std::io::BufWriter::new(file))?;
    Ok(path)
}
