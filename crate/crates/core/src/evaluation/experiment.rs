use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry};
use super::metrics::{bucket_disagreements, error_rate, quality_from_ious, DisagreementBuckets, QualityReport};
use super::EvalError;
use crate::edge::load_edge_map;
use crate::geometry::{iou_boxes, iou_masks, simulate_extreme_clicks, tight_box_from_mask, BinaryMask};
use crate::grabcut::{grabcut, EnergyConfig, GrabCutError, Mode};

/// Outcome for one successfully segmented entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub id: String,
    pub class: String,
    /// Against the ground-truth mask when there is one, otherwise between
    /// the box around the output and the ground-truth box.
    pub iou: f64,
    pub error_rate: Option<f64>,
    pub energy: f64,
    pub iterations: usize,
    /// Wall-clock segmentation time; kept out of the deterministic outputs.
    #[serde(skip)]
    pub time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub id: String,
    pub class: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub mode: Mode,
    pub evaluated: usize,
    pub quality: QualityReport,
    /// Mean over entries that have a ground-truth mask.
    pub mean_error_rate: Option<f64>,
    pub buckets: DisagreementBuckets,
    pub failures: Vec<EntryFailure>,
}

impl EvalReport {
    pub fn from_records(dataset: &str, mode: Mode, records: &[EntryRecord], failures: Vec<EntryFailure>) -> Self {
        let ious: Vec<(&str, f64)> = records.iter().map(|r| (r.class.as_str(), r.iou)).collect();
        let ids: Vec<(&str, f64)> = records.iter().map(|r| (r.id.as_str(), r.iou)).collect();
        let rates: Vec<f64> = records.iter().filter_map(|r| r.error_rate).collect();
        Self {
            dataset: dataset.to_string(),
            mode,
            evaluated: records.len(),
            quality: quality_from_ious(&ious),
            mean_error_rate: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
            buckets: bucket_disagreements(&ids),
            failures,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub report: EvalReport,
    /// Successful entries in manifest order.
    pub records: Vec<EntryRecord>,
}

/// Segments one entry and scores it.
///
/// Box mode uses the entry box (or the box around its mask) and the entry
/// edge map when present. Click mode uses the entry clicks, or clicks
/// simulated from the mask, and requires an edge map.
pub fn evaluate_entry(entry: &ManifestEntry, mode: Mode, config: &EnergyConfig) -> Result<EntryRecord, EvalError> {
    let image = image::open(&entry.image)
        .map_err(|e| EvalError::Image {
            path: entry.image.clone(),
            message: e.to_string(),
        })?
        .to_rgb8();
    let dims = image.dimensions();
    let gt_mask = entry.mask.as_deref().map(load_mask).transpose()?;
    if let Some(m) = &gt_mask {
        if m.dims() != dims {
            return Err(EvalError::Input(format!("mask is {:?}, image is {:?}", m.dims(), dims)));
        }
    }
    let gt_box = match (&entry.bbox, &gt_mask) {
        (Some(b), _) => *b,
        (None, Some(m)) => tight_box_from_mask(m)?,
        (None, None) => return Err(EvalError::Input("entry needs a box or a mask".into())),
    };
    let edges = entry
        .edges
        .as_deref()
        .map(|p| load_edge_map(p, Some(dims)))
        .transpose()
        .map_err(GrabCutError::from)?;
    let clicks = match mode {
        Mode::Box => None,
        Mode::Clicks => Some(match (&entry.clicks, &gt_mask) {
            (Some(c), _) => c.clone(),
            (None, Some(m)) => simulate_extreme_clicks(m)?,
            (None, None) => return Err(EvalError::Input("click mode needs clicks or a mask".into())),
        }),
    };
    let start = Instant::now();
    let result = grabcut(&image, &gt_box, clicks.as_ref(), edges.as_ref(), config)?;
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let pred = result.labeling.to_mask();
    let (iou, rate) = match &gt_mask {
        Some(m) => (iou_masks(&pred, m)?, Some(error_rate(&pred, m)?)),
        None => (iou_boxes(&tight_box_from_mask(&pred)?, &gt_box), None),
    };
    Ok(EntryRecord {
        id: entry.id(),
        class: entry.class.clone(),
        iou,
        error_rate: rate,
        energy: result.energy,
        iterations: result.iterations,
        time_ms,
    })
}

fn load_mask(path: &Path) -> Result<BinaryMask, EvalError> {
    BinaryMask::load_png(path).map_err(|e| EvalError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Evaluates every entry on `jobs` threads (0 = one per core). Failures are
/// collected, not fatal; records and failures keep manifest order.
pub fn run_experiment(
    manifest: &DatasetManifest,
    mode: Mode,
    config: &EnergyConfig,
    jobs: usize,
) -> Result<Experiment, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Input(e.to_string()))?;
    let outcomes: Vec<Result<EntryRecord, EvalError>> =
        pool.install(|| manifest.entries.par_iter().map(|e| evaluate_entry(e, mode, config)).collect());
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (entry, outcome) in manifest.entries.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(err) => {
                log::warn!("{}: {err}", entry.id());
                failures.push(EntryFailure {
                    id: entry.id(),
                    class: entry.class.clone(),
                    error: err.to_string(),
                });
            }
        }
    }
    let report = EvalReport::from_records(&manifest.dataset, mode, &records, failures);
    Ok(Experiment { report, records })
}

fn csv_error(e: csv::Error) -> EvalError {
    EvalError::Input(format!("csv: {e}"))
}

/// `id,class,iou,error_rate,energy,iterations`, one row per record.
/// Identical inputs give identical bytes.
pub fn write_entries_csv<W: Write>(records: &[EntryRecord], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| EvalError::Input(e.to_string()))
}

/// `id,time_ms`, one row per record.
pub fn write_timings_csv<W: Write>(records: &[EntryRecord], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "time_ms"]).map_err(csv_error)?;
    for r in records {
        w.write_record([r.id.clone(), format!("{:.3}", r.time_ms)]).map_err(csv_error)?;
    }
    w.flush().map_err(|e| EvalError::Input(e.to_string()))
}
