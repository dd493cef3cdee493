//! GrabCut segmentation from a box or from extreme clicks.
//!
//! Each pixel gets label object or background. The energy is
//!
//! ```text
//! E(L) = sum_p U_p(l_p) + sum_{p~q} w_pq [l_p != l_q]
//! ```
//!
//! where `U_p` is the negative log-likelihood of the pixel colour under the
//! object or background colour mixture and `w_pq` falls off with the edge
//! response of the two pixels. The loop alternates an exact min-cut with
//! refits of both mixtures on the current labeling.

mod energy;
mod gmm;
mod maxflow;
mod seeds;

pub use energy::{min_cut_segment, pairwise_weight, GridEnergy, Labeling, FORWARD_NEIGHBORS};
pub use gmm::{fit_gmm, neg_log_likelihood, Gaussian, GmmConfig, GmmFit, GmmModel, Rgb};
pub use maxflow::FlowGraph;
pub use seeds::{build_box_seeds, build_click_seeds, core_box, ring_margin, SeedConfig, SeedWarning};

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{estimate_surface_with, ContourError, PathObjective, DEFAULT_SEARCH_MARGIN};
use crate::edge::{gradient_edges, EdgeError, EdgeMap};
use crate::geometry::{box_from_clicks, BoundingBox, ExtremeClicks};

#[derive(Debug, Error)]
pub enum GrabCutError {
    #[error("no pixels to fit an appearance model")]
    NoPixels,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("pairwise weight {0} is negative or not finite")]
    NotSubmodular(f64),
    #[error("pixel ({x}, {y}) is clamped to both labels")]
    ClampConflict { x: u32, y: u32 },
    #[error("click mode needs an edge map")]
    MissingEdges,
    #[error("box lies outside the image")]
    BoxOutsideImage,
    #[error("dimension mismatch")]
    Dimensions,
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Contour(#[from] ContourError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Box only: central quarter clamped object.
    #[default]
    Box,
    /// Extreme clicks: boundary estimate initialises the object model and
    /// its skeleton is clamped object.
    Clicks,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Box => "box",
            Mode::Clicks => "clicks",
        })
    }
}

impl FromStr for Mode {
    type Err = GrabCutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box" => Ok(Mode::Box),
            "clicks" => Ok(Mode::Clicks),
            other => Err(GrabCutError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    /// Pairwise strength.
    pub lambda: f64,
    /// Edge-response sharpness of the pairwise term.
    pub beta: f64,
    pub gmm_components: usize,
    /// Lower bound on every covariance eigenvalue.
    pub covariance_floor: f64,
    pub max_iterations: usize,
    pub em_iterations: usize,
    /// Dilation of the click box when tracing the boundary estimate.
    pub search_margin: u32,
    pub path_objective: PathObjective,
    /// Seed for k-means++ initialisation.
    pub seed: u64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            beta: 2.0,
            gmm_components: 5,
            covariance_floor: 1e-3,
            max_iterations: 5,
            em_iterations: 10,
            search_margin: DEFAULT_SEARCH_MARGIN,
            path_objective: PathObjective::Maximin,
            seed: 0,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<(), GrabCutError> {
        let bad = |m: &str| Err(GrabCutError::Config(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be >= 0");
        }
        if self.gmm_components == 0 {
            return bad("gmm_components must be >= 1");
        }
        if !(self.covariance_floor > 0.0 && self.covariance_floor.is_finite()) {
            return bad("covariance_floor must be > 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        Ok(())
    }

    fn gmm(&self) -> GmmConfig {
        GmmConfig {
            components: self.gmm_components,
            floor: self.covariance_floor,
            em_iterations: self.em_iterations,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub mode: Mode,
    pub labeling: Labeling,
    /// Energy of `labeling` under the models used for the final cut.
    pub energy: f64,
    /// Number of cuts performed.
    pub iterations: usize,
    pub seeds: SeedConfig,
    /// Energy after each cut.
    pub cut_energies: Vec<f64>,
    /// Appearance models the final cut was computed with.
    pub object_model: GmmModel,
    pub background_model: GmmModel,
}

/// Image colours scaled to `[0,1]`, row-major.
pub fn image_colors(image: &RgbImage) -> Vec<Rgb> {
    image
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect()
}

/// The grid energy for the given appearance models.
pub fn build_energy(
    colors: &[Rgb],
    edges: &EdgeMap,
    object: &GmmModel,
    background: &GmmModel,
    config: &EnergyConfig,
) -> Result<GridEnergy, GrabCutError> {
    let unary: Vec<[f64; 2]> = colors
        .par_iter()
        .map(|c| [background.neg_log_likelihood(c), object.neg_log_likelihood(c)])
        .collect();
    GridEnergy::from_edges(unary, edges, config.lambda, config.beta)
}

/// Segments the object in `bbox`.
///
/// With `clicks`, runs extreme-click mode: the box is taken from the clicks
/// and `edges` must be supplied. Without clicks, runs box mode on `bbox`,
/// using `edges` for the pairwise term when given and image gradients
/// otherwise.
pub fn grabcut(
    image: &RgbImage,
    bbox: &BoundingBox,
    clicks: Option<&ExtremeClicks>,
    edges: Option<&EdgeMap>,
    config: &EnergyConfig,
) -> Result<SegmentationResult, GrabCutError> {
    config.validate()?;
    let (w, h) = image.dimensions();
    let (mode, seeds, owned_edges);
    match clicks {
        Some(c) => {
            let e = edges.ok_or(GrabCutError::MissingEdges)?;
            e.check_dims(w, h)?;
            let b = box_from_clicks(c);
            if !b.fits(w, h) {
                return Err(GrabCutError::BoxOutsideImage);
            }
            let surface = estimate_surface_with(c, e, config.search_margin, config.path_objective)?;
            seeds = build_click_seeds(&surface, &b, w, h)?;
            mode = Mode::Clicks;
            owned_edges = None;
        }
        None => {
            seeds = build_box_seeds(bbox, w, h)?;
            mode = Mode::Box;
            owned_edges = match edges {
                Some(e) => {
                    e.check_dims(w, h)?;
                    None
                }
                None => Some(gradient_edges(image)?),
            };
        }
    }
    let edges = owned_edges.as_ref().or(edges).expect("edge map chosen above");
    seeds.validate()?;
    run(image, edges, seeds, mode, config)
}

/// The alternation itself, for callers that build their own seeds.
pub fn grabcut_with_seeds(
    image: &RgbImage,
    edges: &EdgeMap,
    seeds: SeedConfig,
    mode: Mode,
    config: &EnergyConfig,
) -> Result<SegmentationResult, GrabCutError> {
    config.validate()?;
    edges.check_dims(image.width(), image.height())?;
    if seeds.clamp_object.dims() != image.dimensions() {
        return Err(GrabCutError::Dimensions);
    }
    seeds.validate()?;
    run(image, edges, seeds, mode, config)
}

fn select(colors: &[Rgb], mask: impl Fn(usize) -> bool) -> Vec<Rgb> {
    colors.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, c)| *c).collect()
}

fn run(
    image: &RgbImage,
    edges: &EdgeMap,
    seeds: SeedConfig,
    mode: Mode,
    config: &EnergyConfig,
) -> Result<SegmentationResult, GrabCutError> {
    let colors = image_colors(image);
    let gmm = config.gmm();
    let obj_init = Labeling::from_mask(&seeds.object_init);
    let bg_init = Labeling::from_mask(&seeds.background_init);
    let mut object = fit_gmm(&select(&colors, |i| obj_init.as_slice()[i]), &gmm)?.model;
    let mut background = fit_gmm(&select(&colors, |i| bg_init.as_slice()[i]), &gmm)?.model;

    let mut cut_energies = Vec::new();
    let mut previous: Option<Labeling> = None;
    loop {
        let energy = build_energy(&colors, edges, &object, &background, config)?;
        let labeling = min_cut_segment(&energy, &seeds.clamp_object, &seeds.clamp_background)?;
        let e = energy.energy(&labeling);
        cut_energies.push(e);
        log::debug!("grabcut cut {}: energy {e:.6}", cut_energies.len());
        let done = previous.as_ref() == Some(&labeling) || cut_energies.len() >= config.max_iterations;
        if done {
            return Ok(SegmentationResult {
                mode,
                labeling,
                energy: e,
                iterations: cut_energies.len(),
                seeds,
                cut_energies,
                object_model: object,
                background_model: background,
            });
        }
        // Warm-started EM never lowers the likelihood of the current
        // labeling, so the next cut cannot raise the energy.
        let fg = select(&colors, |i| labeling.as_slice()[i]);
        let bg = select(&colors, |i| !labeling.as_slice()[i]);
        if !fg.is_empty() {
            object = object.refine(&fg, config.em_iterations, config.covariance_floor).model;
        }
        if !bg.is_empty() {
            background = background.refine(&bg, config.em_iterations, config.covariance_floor).model;
        }
        previous = Some(labeling);
    }
}
