use serde::{Deserialize, Serialize};

use super::area::{validate_click, AcceptedArea, ClickCheck};
use super::{ErrorCode, ProtocolError};
use crate::geometry::{ExtremeClicks, Point, Role};

/// Images in one qualification attempt.
pub const QUALIFICATION_IMAGES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualificationStatus {
    InProgress,
    Passed,
    Failed,
}

/// Checks each click against the area for its role; results in role order.
pub fn check_clicks(clicks: &ExtremeClicks, areas: &[AcceptedArea; 4]) -> [ClickCheck; 4] {
    Role::ALL.map(|r| validate_click(clicks.get(r), &areas[r as usize]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickFeedback {
    pub role: Role,
    pub point: Point,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageFeedback {
    pub image: usize,
    pub clicks: Vec<ClickFeedback>,
    pub passed: bool,
    /// Where the UI can fetch each role's accepted area, role order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overlays: Vec<String>,
}

/// What the feedback page shows after an attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualificationFeedback {
    pub worker: String,
    pub attempt: u32,
    pub status: QualificationStatus,
    pub images: Vec<ImageFeedback>,
}

impl QualificationFeedback {
    /// `(image, role)` of every rejected click.
    pub fn failing(&self) -> Vec<(usize, Role)> {
        self.images
            .iter()
            .flat_map(|i| i.clicks.iter().filter(|c| !c.accepted).map(move |c| (i.image, c.role)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub clicks: ExtremeClicks,
    pub checks: [ClickCheck; 4],
}

impl ImageResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.accepted())
    }
}

/// One attempt at the qualification test. Passing needs every click on
/// every image inside its accepted area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualificationSession {
    pub worker: String,
    pub attempt: u32,
    pub results: Vec<Option<ImageResult>>,
}

impl QualificationSession {
    pub fn new(worker: impl Into<String>, attempt: u32, images: usize) -> Self {
        Self {
            worker: worker.into(),
            attempt,
            results: vec![None; images],
        }
    }

    pub fn record(&mut self, image: usize, clicks: ExtremeClicks, areas: &[AcceptedArea; 4]) -> &ImageResult {
        let checks = check_clicks(&clicks, areas);
        self.results[image] = Some(ImageResult { clicks, checks });
        self.results[image].as_ref().expect("just stored")
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.results.len()).filter(|&i| self.results[i].is_none()).collect()
    }

    pub fn next_image(&self) -> Option<usize> {
        self.missing().first().copied()
    }

    pub fn status(&self) -> QualificationStatus {
        if !self.missing().is_empty() {
            QualificationStatus::InProgress
        } else if self.results.iter().flatten().all(ImageResult::passed) {
            QualificationStatus::Passed
        } else {
            QualificationStatus::Failed
        }
    }

    /// A fresh attempt after this one.
    pub fn retake(&self) -> Self {
        Self::new(self.worker.clone(), self.attempt + 1, self.results.len())
    }

    pub fn feedback(&self) -> Result<QualificationFeedback, ProtocolError> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(ProtocolError::new(
                ErrorCode::Incomplete,
                format!("no clicks yet for qualification images {missing:?}"),
            ));
        }
        let images = self
            .results
            .iter()
            .flatten()
            .enumerate()
            .map(|(image, r)| ImageFeedback {
                image,
                clicks: Role::ALL
                    .iter()
                    .map(|&role| ClickFeedback {
                        role,
                        point: r.clicks.get(role),
                        accepted: r.checks[role as usize].accepted(),
                    })
                    .collect(),
                passed: r.passed(),
                overlays: Vec::new(),
            })
            .collect();
        Ok(QualificationFeedback {
            worker: self.worker.clone(),
            attempt: self.attempt,
            status: self.status(),
            images,
        })
    }
}
