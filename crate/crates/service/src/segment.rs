use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xclick_core::edge::load_edge_map;
use xclick_core::geometry::{box_from_clicks, BoundingBox, ExtremeClicks};
use xclick_core::grabcut::{grabcut, EnergyConfig, GrabCutError, Mode};

use crate::ApiError;

/// Largest image `/api/segment` accepts, per side.
pub const MAX_SIDE: u32 = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    /// Reference returned by `POST /api/images`.
    pub image: String,
    /// Edge-map reference; required in click mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clicks: Option<ExtremeClicks>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub mode: Mode,
    /// Fields to change in the server's energy configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    /// URL of the mask PNG, named by its content hash.
    pub mask: String,
    pub energy: f64,
    pub iterations: usize,
    pub mode: Mode,
    pub width: u32,
    pub height: u32,
}

impl SegmentRequest {
    /// Cache key: hash of the canonical request JSON.
    pub fn key(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("requests serialize"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Resolves a client-supplied reference inside `dir`. References are plain
/// file names; anything that could walk out of `dir` is refused.
pub fn resolve_ref(dir: &Path, r: &str) -> Result<PathBuf, ApiError> {
    let plain = !r.is_empty() && !r.starts_with('.') && r.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if !plain {
        return Err(ApiError::bad_request(format!("bad reference {r:?}")));
    }
    let p = dir.join(r);
    if !p.is_file() {
        return Err(ApiError::not_found(format!("no image {r:?}")));
    }
    Ok(p)
}

fn merged_config(base: &EnergyConfig, overrides: Option<&serde_json::Map<String, serde_json::Value>>) -> Result<EnergyConfig, ApiError> {
    let Some(o) = overrides else {
        return Ok(base.clone());
    };
    let mut v = serde_json::to_value(base).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    for (k, val) in o {
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| ApiError::bad_request(format!("config: {e}")))
}

fn grabcut_error(e: GrabCutError) -> ApiError {
    match e {
        GrabCutError::MissingEdges => ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "MISSING_EDGES",
            "click mode needs an edge map reference in \"edges\"",
        ),
        GrabCutError::BoxOutsideImage => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "OUT_OF_BOUNDS", e.to_string()),
        GrabCutError::Config(_) => ApiError::bad_request(e.to_string()),
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "SEGMENTATION_FAILED", other.to_string()),
    }
}

/// Runs one request; returns the response and the mask PNG bytes.
pub fn run_segment(
    req: &SegmentRequest,
    images: &Path,
    base: &EnergyConfig,
) -> Result<(SegmentResponse, Vec<u8>), ApiError> {
    let path = resolve_ref(images, &req.image)?;
    let (w, h) = image::image_dimensions(&path).map_err(|e| ApiError::bad_request(format!("{}: {e}", req.image)))?;
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "IMAGE_TOO_LARGE",
            format!("{w}x{h} exceeds {MAX_SIDE}x{MAX_SIDE}"),
        ));
    }
    let config = merged_config(base, req.config.as_ref())?;
    let edges = match &req.edges {
        Some(r) => {
            let p = resolve_ref(images, r)?;
            Some(load_edge_map(&p, Some((w, h))).map_err(|e| ApiError::bad_request(format!("{r}: {e}")))?)
        }
        None => None,
    };
    let image = image::open(&path)
        .map_err(|e| ApiError::bad_request(format!("{}: {e}", req.image)))?
        .to_rgb8();
    let result = match req.mode {
        Mode::Clicks => {
            let clicks = req
                .clicks
                .as_ref()
                .ok_or_else(|| ApiError::bad_request("click mode needs \"clicks\""))?;
            grabcut(&image, &box_from_clicks(clicks), Some(clicks), edges.as_ref(), &config)
        }
        Mode::Box => {
            let b = match (&req.bbox, &req.clicks) {
                (Some(b), _) => *b,
                (None, Some(c)) => box_from_clicks(c),
                (None, None) => return Err(ApiError::bad_request("box mode needs \"box\" or \"clicks\"")),
            };
            grabcut(&image, &b, None, edges.as_ref(), &config)
        }
    }
    .map_err(grabcut_error)?;
    let png = result.labeling.to_mask().to_png_bytes();
    let response = SegmentResponse {
        mask: format!("/api/masks/{}.png", sha256_hex(&png)),
        energy: result.energy,
        iterations: result.iterations,
        mode: result.mode,
        width: w,
        height: h,
    };
    Ok((response, png))
}
