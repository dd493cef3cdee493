use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou_boxes, BinaryMask, BoundingBox, GeometryError, Label};

/// IoU thresholds reported per class. Comparisons are strict.
pub const THRESHOLDS: [f64; 3] = [0.5, 0.7, 0.9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub count: usize,
    pub mean_iou: f64,
    /// Fraction with IoU strictly above each of [`THRESHOLDS`].
    pub above: [f64; 3],
}

/// Per-class statistics and their unweighted means over classes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub classes: Vec<ClassStats>,
    pub macro_mean_iou: f64,
    pub macro_above: [f64; 3],
}

impl QualityReport {
    pub fn class(&self, name: &str) -> Option<&ClassStats> {
        self.classes.iter().find(|c| c.class == name)
    }
}

/// Aggregates `(class, IoU)` pairs: statistics within each class first, then
/// the plain mean over classes, so a class with many instances weighs the
/// same as one with few. Classes are listed in name order.
pub fn quality_from_ious<S: AsRef<str>>(items: &[(S, f64)]) -> QualityReport {
    let mut by_class: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (c, iou) in items {
        by_class.entry(c.as_ref()).or_default().push(*iou);
    }
    let classes: Vec<ClassStats> = by_class
        .into_iter()
        .map(|(class, ious)| {
            let n = ious.len() as f64;
            let frac = |t: f64| ious.iter().filter(|&&v| v > t).count() as f64 / n;
            ClassStats {
                class: class.to_string(),
                count: ious.len(),
                mean_iou: ious.iter().sum::<f64>() / n,
                above: THRESHOLDS.map(frac),
            }
        })
        .collect();
    if classes.is_empty() {
        return QualityReport::default();
    }
    let k = classes.len() as f64;
    let macro_mean_iou = classes.iter().map(|c| c.mean_iou).sum::<f64>() / k;
    let macro_above = [0, 1, 2].map(|i| classes.iter().map(|c| c.above[i]).sum::<f64>() / k);
    QualityReport {
        classes,
        macro_mean_iou,
        macro_above,
    }
}

/// Box quality for `(predicted, ground truth, class)` triples.
pub fn class_metrics<S: AsRef<str>>(pairs: &[(BoundingBox, BoundingBox, S)]) -> QualityReport {
    let ious: Vec<(&str, f64)> = pairs.iter().map(|(p, g, c)| (c.as_ref(), iou_boxes(p, g))).collect();
    quality_from_ious(&ious)
}

/// Fraction of pixels whose object/background label differs. Pixels marked
/// ignore in either mask are left out; with nothing left the rate is 0.
pub fn error_rate(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, GeometryError> {
    if pred.dims() != gt.dims() {
        let ((a, b), (c, d)) = (pred.dims(), gt.dims());
        return Err(GeometryError::DimensionMismatch(a, b, c, d));
    }
    let (mut wrong, mut total) = (0usize, 0usize);
    for (&a, &b) in pred.labels().iter().zip(gt.labels()) {
        if a == Label::Ignore || b == Label::Ignore {
            continue;
        }
        total += 1;
        wrong += (a != b) as usize;
    }
    Ok(if total == 0 { 0.0 } else { wrong as f64 / total as f64 })
}

/// Ids split by IoU into `< 0.3`, `[0.3, 0.7]` and `> 0.7`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementBuckets {
    pub low: Vec<String>,
    pub middle: Vec<String>,
    pub high: Vec<String>,
}

impl DisagreementBuckets {
    pub fn counts(&self) -> [usize; 3] {
        [self.low.len(), self.middle.len(), self.high.len()]
    }
}

pub fn bucket_disagreements<S: AsRef<str>>(items: &[(S, f64)]) -> DisagreementBuckets {
    let mut b = DisagreementBuckets::default();
    for (id, iou) in items {
        let id = id.as_ref().to_string();
        if *iou < 0.3 {
            b.low.push(id);
        } else if *iou <= 0.7 {
            b.middle.push(id);
        } else {
            b.high.push(id);
        }
    }
    b
}
