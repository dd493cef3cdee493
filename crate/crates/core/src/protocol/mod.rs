//! Crowd annotation protocol: qualification, batches with hidden golden
//! images, an append-only event log and the reports built from it.

mod area;
mod batch;
mod events;
mod qualification;
mod service;
mod timing;

pub use area::{accepted_area, accepted_area_with, accepted_areas, validate_click, AcceptedArea, ClickCheck, DistanceMetric};
pub use batch::{build_batch, submit_batch, Batch, SubmitOutcome, BATCH_SIZE};
pub use events::{read_log, Event, EventSink, LOG_VERSION};
pub use qualification::{
    check_clicks, ClickFeedback, ImageFeedback, ImageResult, QualificationFeedback, QualificationSession, QualificationStatus,
    QUALIFICATION_IMAGES,
};
pub use service::{
    log_timing, AdminMetrics, Annotation, AnnotationService, BatchState, GtImage, ItemRef, PostResponse, PostStatus, Posted,
    PostedPoint, QualificationProgress, ServiceSetup, ServiceState, TaskImage, TaskKind, TaskView, WorkerState,
};
pub use timing::{timing_report, InstanceTiming, TimingReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Machine-readable error kinds, serialized as `SCREAMING_SNAKE_CASE`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    ClickCount,
    StaleTask,
    OutOfBounds,
    UnknownWorker,
    AlreadyRegistered,
    BadTimestamps,
    NoTask,
    Incomplete,
    MixedClass,
    InsufficientPool,
    EmptyMask,
    NotFound,
    InvalidInput,
    BadLog,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ClickCount => "CLICK_COUNT",
            ErrorCode::StaleTask => "STALE_TASK",
            ErrorCode::OutOfBounds => "OUT_OF_BOUNDS",
            ErrorCode::UnknownWorker => "UNKNOWN_WORKER",
            ErrorCode::AlreadyRegistered => "ALREADY_REGISTERED",
            ErrorCode::BadTimestamps => "BAD_TIMESTAMPS",
            ErrorCode::NoTask => "NO_TASK",
            ErrorCode::Incomplete => "INCOMPLETE",
            ErrorCode::MixedClass => "MIXED_CLASS",
            ErrorCode::InsufficientPool => "INSUFFICIENT_POOL",
            ErrorCode::EmptyMask => "EMPTY_MASK",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::InvalidInput => "INVALID_INPUT",
            ErrorCode::BadLog => "BAD_LOG",
            ErrorCode::Io => "IO",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Accepted-area radius in pixels.
    pub tolerance: u32,
    pub metric: DistanceMetric,
    pub qualification_images: usize,
    /// Payment per submitted batch, in dollars.
    pub pay_per_batch: f64,
    /// Seeds golden selection and placement.
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            tolerance: 10,
            metric: DistanceMetric::Euclidean,
            qualification_images: QUALIFICATION_IMAGES,
            pay_per_batch: 0.15,
            seed: 0,
        }
    }
}
