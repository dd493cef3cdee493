use std::path::Path;

use image::{GrayImage, Luma};

use super::{BoundingBox, GeometryError, Point};

/// Per-pixel label of a [`BinaryMask`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Label {
    #[default]
    Background,
    Object,
    /// Excluded from every metric.
    Ignore,
}

impl Label {
    /// The 8-bit PNG encoding: 0, 255 and 128.
    pub fn to_gray(self) -> u8 {
        match self {
            Label::Background => 0,
            Label::Object => 255,
            Label::Ignore => 128,
        }
    }

    pub fn from_gray(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Background),
            255 => Some(Label::Object),
            128 => Some(Label::Ignore),
            _ => None,
        }
    }
}

/// Row-major raster of [`Label`]s.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    labels: Vec<Label>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        for y in 0..self.height {
            for x in 0..self.width {
                let c = match self.get(x, y) {
                    Label::Background => '.',
                    Label::Object => '#',
                    Label::Ignore => '?',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl BinaryMask {
    /// An all-background mask.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![Label::Background; width as usize * height as usize],
        }
    }

    pub fn from_labels(width: u32, height: u32, labels: Vec<Label>) -> Result<Self, GeometryError> {
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(GeometryError::BufferSize {
                got: labels.len(),
                expected,
            });
        }
        Ok(Self { width, height, labels })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Label) -> Self {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self { width, height, labels }
    }

    /// Object inside `b`, background elsewhere.
    pub fn from_box(width: u32, height: u32, b: &BoundingBox) -> Self {
        Self::from_fn(width, height, |x, y| {
            if b.contains(Point { x, y }) {
                Label::Object
            } else {
                Label::Background
            }
        })
    }

    /// Parses an ASCII sketch: `#` object, `?` ignore, anything else background.
    /// Rows are separated by newlines and must share one width.
    pub fn from_ascii(art: &str) -> Self {
        let rows: Vec<&str> = art.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as u32;
        let mut labels = Vec::new();
        for r in &rows {
            assert_eq!(r.chars().count() as u32, width, "ragged ascii mask");
            labels.extend(r.chars().map(|c| match c {
                '#' => Label::Object,
                '?' => Label::Ignore,
                _ => Label::Background,
            }));
        }
        Self { width, height, labels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Label {
        self.labels[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, label: Label) {
        let i = self.index(x, y);
        self.labels[i] = label;
    }

    #[inline]
    pub fn is_object(&self, x: u32, y: u32) -> bool {
        self.get(x, y) == Label::Object
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn object_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Object).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.labels.contains(&Label::Object)
    }

    /// Object pixels in row-major scan order.
    pub fn object_pixels(&self) -> impl Iterator<Item = Point> + '_ {
        let w = self.width;
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == Label::Object)
            .map(move |(i, _)| Point {
                x: (i % w as usize) as u32,
                y: (i / w as usize) as u32,
            })
    }

    /// True when every object pixel of `self` is an object pixel of `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self
                .labels
                .iter()
                .zip(&other.labels)
                .all(|(&a, &b)| a != Label::Object || b == Label::Object)
    }

    /// Object where both masks are object.
    pub fn intersect(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        let labels = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(&a, &b)| {
                if a == Label::Object && b == Label::Object {
                    Label::Object
                } else {
                    Label::Background
                }
            })
            .collect();
        BinaryMask { labels, ..*self }
    }

    /// Object where either mask is object.
    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        let labels = self
            .labels
            .iter()
            .zip(&other.labels)
            .map(|(&a, &b)| {
                if a == Label::Object || b == Label::Object {
                    Label::Object
                } else {
                    Label::Background
                }
            })
            .collect();
        BinaryMask { labels, ..*self }
    }

    /// Swaps object and background; ignore stays ignore.
    pub fn complement(&self) -> BinaryMask {
        let labels = self
            .labels
            .iter()
            .map(|l| match l {
                Label::Object => Label::Background,
                Label::Background => Label::Object,
                Label::Ignore => Label::Ignore,
            })
            .collect();
        BinaryMask { labels, ..*self }
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([self.get(x, y).to_gray()]))
    }

    pub fn from_gray_image(img: &GrayImage) -> Result<Self, GeometryError> {
        let (w, h) = img.dimensions();
        let mut labels = Vec::with_capacity(w as usize * h as usize);
        for (x, y, px) in img.enumerate_pixels() {
            let v = px.0[0];
            labels.push(Label::from_gray(v).ok_or(GeometryError::MaskValue { value: v, x, y })?);
        }
        Ok(Self {
            width: w,
            height: h,
            labels,
        })
    }

    /// Writes an 8-bit grayscale PNG (0 background, 255 object, 128 ignore).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        self.to_gray_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| GeometryError::Image(e.to_string()))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| GeometryError::Image(format!("{}: {e}", path.display())))?;
        Self::from_gray_image(&img.to_luma8())
    }

    /// PNG bytes, used for content addressing.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_gray_image()
            .write_to(&mut buf, image::ImageFormat::Png)
            .expect("in-memory PNG encode");
        buf.into_inner()
    }
}

/// Minimal box covering every object pixel.
pub fn tight_box_from_mask(mask: &BinaryMask) -> Result<BoundingBox, GeometryError> {
    let pts: Vec<Point> = mask.object_pixels().collect();
    if pts.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    Ok(BoundingBox::enclosing(&pts))
}

/// Object-pixel IoU, skipping pixels marked ignore in either mask.
///
/// Two masks with no object pixels at all compare as equal (1.0).
pub fn iou_masks(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    if a.dims() != b.dims() {
        return Err(GeometryError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        if la == Label::Ignore || lb == Label::Ignore {
            continue;
        }
        let (oa, ob) = (la == Label::Object, lb == Label::Object);
        inter += (oa && ob) as u64;
        union += (oa || ob) as u64;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
