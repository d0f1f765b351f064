//! Global alignment of many images over a common ground plane.
//!
//! Each image carries a homography to the plane frame. Pairwise matches and
//! surveyed control points are combined in a Levenberg-Marquardt bundle
//! adjustment over all non-anchored homographies.

mod graph;
mod init;
mod solve;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homography::{Homography, HomographyError};
use crate::optim::{LmConfig, Termination};

pub use graph::{Control, CorrespondenceGraph, Edge, EdgeEntry, GraphFile, GraphImage, ImageCamera, ImageEntry};
pub(crate) use init::check_structure;
pub use init::initialize;
pub use solve::{edge_residual_jacobian, evaluate, solve, EvaluationReport, HoldoutPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MosaicError {
    #[error("unknown image '{0}'")]
    UnknownImage(String),
    #[error("duplicate image id '{0}'")]
    DuplicateImage(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is disconnected: {0}")]
    SolveDisconnected(String),
    #[error("gauge is not fixed: {0}")]
    NoGauge(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid solver configuration")]
    InvalidConfig,
    #[error("graph file: {0}")]
    File(String),
    #[error(transparent)]
    Homography(#[from] HomographyError),
}

impl MosaicError {
    pub fn kind(&self) -> &'static str {
        match self {
            MosaicError::UnknownImage(_) => "UnknownImage",
            MosaicError::DuplicateImage(_) => "DuplicateImage",
            MosaicError::InvalidGraph(_) => "InvalidGraph",
            MosaicError::SolveDisconnected(_) => "SolveDisconnected",
            MosaicError::NoGauge(_) => "NoGauge",
            MosaicError::NumericalFailure(_) => "NumericalFailure",
            MosaicError::InvalidConfig => "InvalidConfig",
            MosaicError::File(_) => "InvalidGraphFile",
            MosaicError::Homography(e) => e.kind(),
        }
    }
}

/// Solver settings: LM controls plus residual weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaConfig {
    pub lm: LmConfig,
    pub edge_weight: f64,
    pub control_weight: f64,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            lm: LmConfig::default(),
            edge_weight: 1.0,
            control_weight: 10.0,
        }
    }
}

impl BaConfig {
    pub fn is_valid(&self) -> bool {
        self.lm.is_valid()
            && self.edge_weight.is_finite()
            && self.edge_weight > 0.0
            && self.control_weight.is_finite()
            && self.control_weight > 0.0
    }

    pub fn from_json(text: &str) -> Result<Self, MosaicError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| MosaicError::File(e.to_string()))?;
        if !cfg.is_valid() {
            return Err(MosaicError::InvalidConfig);
        }
        Ok(cfg)
    }
}

/// Pixel reprojection RMS over the matches of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRms {
    pub a: String,
    pub b: String,
    pub rms_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaSolution {
    /// Image → plane homographies.
    pub homographies: BTreeMap<String, Homography>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub cost_trace: Vec<f64>,
    pub per_edge_rms: Vec<EdgeRms>,
}

impl BaSolution {
    pub fn max_edge_rms(&self) -> f64 {
        self.per_edge_rms.iter().map(|e| e.rms_px).fold(0.0, f64::max)
    }

    /// Accepted-step costs never increase.
    pub fn trace_is_monotone(&self) -> bool {
        self.cost_trace.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MosaicError> {
        serde_json::from_str(text).map_err(|e| MosaicError::File(e.to_string()))
    }
}

#[cfg(test)]
mod tests;
