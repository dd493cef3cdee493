//! PASCAL VOC annotation directory to manifest conversion.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::ManifestEntry;
use super::EvalError;
use crate::geometry::{BinaryMask, BoundingBox, Label};

#[derive(Clone, Debug, PartialEq)]
pub struct VocObject {
    pub name: String,
    /// Zero-based inclusive pixel box.
    pub bbox: BoundingBox,
    pub difficult: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VocAnnotation {
    pub filename: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<VocObject>,
}

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, name: &str) -> Option<&'a str> {
    node.children().find(|c| c.has_tag_name(name)).and_then(|c| c.text()).map(str::trim)
}

fn number(node: roxmltree::Node<'_, '_>, name: &str) -> Result<f64, String> {
    let t = child_text(node, name).ok_or_else(|| format!("missing <{name}>"))?;
    t.parse::<f64>().map_err(|e| format!("<{name}> {t:?}: {e}"))
}

/// Parses one annotation file. VOC boxes are one-based; they are shifted to
/// zero-based and clipped to the image.
pub fn parse_voc_annotation(xml: &str) -> Result<VocAnnotation, String> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    let filename = child_text(root, "filename").ok_or("missing <filename>")?.to_string();
    let size = root.children().find(|c| c.has_tag_name("size")).ok_or("missing <size>")?;
    let width = number(size, "width")? as u32;
    let height = number(size, "height")? as u32;
    if width == 0 || height == 0 {
        return Err("zero image size".into());
    }
    let mut objects = Vec::new();
    for obj in root.children().filter(|c| c.has_tag_name("object")) {
        let name = child_text(obj, "name").ok_or("object without <name>")?.to_string();
        let difficult = child_text(obj, "difficult").is_some_and(|d| d == "1");
        let bb = obj.children().find(|c| c.has_tag_name("bndbox")).ok_or("object without <bndbox>")?;
        let coord = |tag: &str, limit: u32| -> Result<u32, String> {
            let v = number(bb, tag)?.round() - 1.0;
            Ok(v.clamp(0.0, (limit - 1) as f64) as u32)
        };
        let bbox = BoundingBox::new(coord("xmin", width)?, coord("ymin", height)?, coord("xmax", width)?, coord("ymax", height)?)
            .map_err(|e| e.to_string())?;
        objects.push(VocObject { name, bbox, difficult });
    }
    Ok(VocAnnotation {
        filename,
        width,
        height,
        objects,
    })
}

/// Colour of palette index `i` in VOC label images.
pub fn voc_color(i: u8) -> [u8; 3] {
    let mut rgb = [0u8; 3];
    let mut c = i;
    for j in 0..8 {
        for (k, ch) in rgb.iter_mut().enumerate() {
            *ch |= ((c >> k) & 1) << (7 - j);
        }
        c >>= 3;
    }
    rgb
}

#[derive(Clone, Debug, Default)]
pub struct VocOptions {
    /// Restrict to ids listed in `ImageSets/Segmentation/<name>.txt`.
    pub image_set: Option<String>,
    /// Write per-instance masks from `SegmentationObject` here.
    pub masks_out: Option<PathBuf>,
    pub include_difficult: bool,
}

/// One manifest entry per object, files in name order, objects in
/// annotation order. Entry ids are `<stem>_<k>` with `k` counting objects
/// from 1, which is also the instance index in the object label image.
pub fn voc_to_manifest(root: &Path, opts: &VocOptions) -> Result<Vec<ManifestEntry>, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    let ann_dir = root.join("Annotations");
    let keep: Option<Vec<String>> = match &opts.image_set {
        Some(set) => {
            let p = root.join("ImageSets/Segmentation").join(format!("{set}.txt"));
            let text = fs::read_to_string(&p).map_err(io(&p))?;
            Some(text.split_whitespace().map(str::to_string).collect())
        }
        None => None,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(&ann_dir)
        .map_err(io(&ann_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();
    if let Some(dir) = &opts.masks_out {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let palette: HashMap<[u8; 3], u8> = (0..=255u8).map(|i| (voc_color(i), i)).collect();

    let mut entries = Vec::new();
    for file in files {
        let stem = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if keep.as_ref().is_some_and(|k| !k.contains(&stem)) {
            continue;
        }
        let xml = fs::read_to_string(&file).map_err(io(&file))?;
        let ann = parse_voc_annotation(&xml).map_err(|message| EvalError::Input(format!("{}: {message}", file.display())))?;
        let seg = root.join("SegmentationObject").join(format!("{stem}.png"));
        let instances = match &opts.masks_out {
            Some(_) if seg.is_file() => Some(read_instances(&seg, &palette)?),
            _ => None,
        };
        for (k, obj) in ann.objects.iter().enumerate() {
            let k = k + 1;
            if obj.difficult && !opts.include_difficult {
                continue;
            }
            let mut e = ManifestEntry::new(root.join("JPEGImages").join(&ann.filename), obj.name.clone());
            e.id = Some(format!("{stem}_{k}"));
            e.bbox = Some(obj.bbox);
            if let (Some(dir), Some((w, h, idx))) = (&opts.masks_out, &instances) {
                let mask = BinaryMask::from_fn(*w, *h, |x, y| match idx[(y * w + x) as usize] {
                    255 => Label::Ignore,
                    v if v as usize == k => Label::Object,
                    _ => Label::Background,
                });
                if !mask.is_empty() {
                    let out = dir.join(format!("{stem}_{k}.png"));
                    mask.save_png(&out).map_err(|e| EvalError::Image {
                        path: out.clone(),
                        message: e.to_string(),
                    })?;
                    e.mask = Some(out);
                }
            }
            entries.push(e);
        }
    }
    Ok(entries)
}

fn read_instances(path: &Path, palette: &HashMap<[u8; 3], u8>) -> Result<(u32, u32, Vec<u8>), EvalError> {
    let img = image::open(path)
        .map_err(|e| EvalError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .to_rgb8();
    let idx = img.pixels().map(|p| palette.get(&p.0).copied().unwrap_or(0)).collect();
    Ok((img.width(), img.height(), idx))
}
