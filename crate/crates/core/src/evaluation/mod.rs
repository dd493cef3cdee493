//! Datasets, quality metrics and batch experiments.

mod experiment;
mod manifest;
mod metrics;
mod voc;

pub use experiment::{
    evaluate_entry, run_experiment, write_entries_csv, write_timings_csv, EntryFailure, EntryRecord, EvalReport, Experiment,
};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use metrics::{
    bucket_disagreements, class_metrics, error_rate, quality_from_ious, ClassStats, DisagreementBuckets, QualityReport,
    THRESHOLDS,
};
pub use voc::{parse_voc_annotation, voc_color, voc_to_manifest, VocAnnotation, VocObject, VocOptions};

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::grabcut::GrabCutError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: empty class label")]
    EmptyClass { line: usize },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: missing file {}", path.display())]
    MissingFile { line: usize, path: PathBuf },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    GrabCut(#[from] GrabCutError),
}
