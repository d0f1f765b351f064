//! Seeded synthetic scenes, noisy observations and error statistics.
//!
//! Noise is applied in a fixed order: camera pose perturbation per trial,
//! then Gaussian pixel noise per observation, then outlier replacement.
//! Trial `t` draws from stream `t + 1` of a ChaCha8 generator keyed by the
//! master seed, so serial and parallel runs agree bit for bit.

mod ba;
mod observe;
mod report;
mod scenes;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraConfig, CameraIntrinsics, CameraPose, PixelPoint, PlanePoint};
use crate::mosaic::MosaicError;

pub use ba::{generate_ba_graph, BaScenario};
pub use observe::{evaluate_mono, evaluate_stereo, generate_observations, CameraObservations, Observations};
pub use report::{ErrorRecord, ErrorReport, Summary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("camera footprints do not overlap: {0}")]
    NoOverlap(String),
    #[error("scene file: {0}")]
    File(String),
    #[error(transparent)]
    Mosaic(#[from] MosaicError),
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::InvalidSpec(_) => "InvalidSpec",
            SimError::InvalidNoise(_) => "InvalidNoise",
            SimError::NoOverlap(_) => "NoOverlap",
            SimError::File(_) => "InvalidSimFile",
            SimError::Mosaic(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub pixel_sigma_px: f64,
    pub pitch_sigma_deg: f64,
    pub yaw_sigma_deg: f64,
    pub height_sigma_m: f64,
    /// Probability that an observation is replaced by an outlier.
    pub outlier_fraction: f64,
    /// Half-width of the uniform outlier offset.
    pub outlier_scale_px: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_sigma_px: 0.0,
            pitch_sigma_deg: 0.0,
            yaw_sigma_deg: 0.0,
            height_sigma_m: 0.0,
            outlier_fraction: 0.0,
            outlier_scale_px: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn zero(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let sigmas = [
            ("pixel_sigma_px", self.pixel_sigma_px),
            ("pitch_sigma_deg", self.pitch_sigma_deg),
            ("yaw_sigma_deg", self.yaw_sigma_deg),
            ("height_sigma_m", self.height_sigma_m),
            ("outlier_scale_px", self.outlier_scale_px),
        ];
        for (name, v) in sigmas {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidNoise(format!("{name} = {v} must be >= 0")));
            }
        }
        if !(self.outlier_fraction >= 0.0 && self.outlier_fraction < 1.0) {
            return Err(SimError::InvalidNoise(format!(
                "outlier_fraction = {} must lie in [0, 1)",
                self.outlier_fraction
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let n: Self = serde_json::from_str(text).map_err(|e| SimError::File(e.to_string()))?;
        n.validate()?;
        Ok(n)
    }

    /// Generator for trial `t`.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial + 1);
        rng
    }

    /// Generator for scene layout draws, independent of every trial.
    pub fn layout_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        rng
    }

    /// Perturbed copy of `pose`. Always consumes three normal draws.
    pub(crate) fn perturb_pose(&self, pose: &CameraPose, rng: &mut ChaCha8Rng) -> CameraPose {
        let (dh, dp, dy): (f64, f64, f64) = (
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        CameraPose {
            height: pose.height + dh * self.height_sigma_m,
            pitch: pose.pitch + (dp * self.pitch_sigma_deg).to_radians(),
            yaw: pose.yaw + (dy * self.yaw_sigma_deg).to_radians(),
            position: pose.position,
        }
    }

    /// Pixel noise then outlier replacement. Always consumes three draws
    /// plus two more for an outlier.
    pub(crate) fn corrupt_pixel(&self, clean: PixelPoint, rng: &mut ChaCha8Rng) -> PixelPoint {
        let (nu, nv): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let roll: f64 = rng.random();
        if roll < self.outlier_fraction {
            let s = self.outlier_scale_px;
            let du = rng.random_range(-1.0..=1.0) * s;
            let dv = rng.random_range(-1.0..=1.0) * s;
            return PixelPoint::new(clean.u + du, clean.v + dv);
        }
        PixelPoint::new(clean.u + nu * self.pixel_sigma_px, clean.v + nv * self.pixel_sigma_px)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PointLayout {
    /// Cell centers of an `nx` by `ny` grid.
    Grid { nx: usize, ny: usize },
    /// Uniform points drawn from the layout generator.
    Random { count: usize },
}

impl Default for PointLayout {
    fn default() -> Self {
        PointLayout::Grid { nx: 11, ny: 15 }
    }
}

fn default_extent() -> [f64; 2] {
    [220.0, 300.0]
}

fn default_controls() -> usize {
    8
}

fn default_holdout() -> usize {
    20
}

fn default_matches() -> usize {
    20
}

/// Ground-truth scene: a rectangular patch of the plane and the cameras
/// looking at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub plane_origin_m: [f64; 2],
    #[serde(default = "default_extent")]
    pub plane_extent_m: [f64; 2],
    #[serde(default)]
    pub point_layout: PointLayout,
    pub cameras: Vec<CameraConfig>,
    /// Image width and height in pixels; defaults to twice the principal
    /// point of each camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_size: Option<[f64; 2]>,
    #[serde(default = "default_controls")]
    pub control_point_count: usize,
    #[serde(default = "default_holdout")]
    pub holdout_count: usize,
    #[serde(default = "default_matches")]
    pub matches_per_edge: usize,
}

impl SceneSpec {
    pub fn new(cameras: Vec<CameraConfig>) -> Self {
        Self {
            plane_origin_m: [0.0, 0.0],
            plane_extent_m: default_extent(),
            point_layout: PointLayout::default(),
            cameras,
            image_size: None,
            control_point_count: default_controls(),
            holdout_count: default_holdout(),
            matches_per_edge: default_matches(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text).map_err(|e| SimError::File(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let [w, l] = self.plane_extent_m;
        if !(w.is_finite() && l.is_finite() && w > 0.0 && l > 0.0) {
            return Err(SimError::InvalidSpec(format!(
                "plane extent {w} x {l} must be positive"
            )));
        }
        if !self.plane_origin_m.iter().all(|v| v.is_finite()) {
            return Err(SimError::InvalidSpec("plane origin must be finite".into()));
        }
        if self.cameras.is_empty() {
            return Err(SimError::InvalidSpec("at least one camera is required".into()));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            c.camera()
                .map_err(|e| SimError::InvalidSpec(format!("camera {i}: {e}")))?;
        }
        match self.point_layout {
            PointLayout::Grid { nx, ny } if nx == 0 || ny == 0 => {
                return Err(SimError::InvalidSpec("grid layout needs nx, ny >= 1".into()))
            }
            PointLayout::Random { count: 0 } => {
                return Err(SimError::InvalidSpec("random layout needs count >= 1".into()))
            }
            _ => {}
        }
        if let Some([iw, ih]) = self.image_size {
            if !(iw > 0.0 && ih > 0.0) {
                return Err(SimError::InvalidSpec("image size must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn cameras(&self) -> Result<Vec<(CameraIntrinsics, CameraPose)>, SimError> {
        self.validate()?;
        Ok(self.cameras.iter().map(|c| c.camera().expect("validated")).collect())
    }

    pub(crate) fn image_size_of(&self, k: &CameraIntrinsics) -> [f64; 2] {
        self.image_size.unwrap_or([2.0 * k.u0, 2.0 * k.v0])
    }

    pub(crate) fn in_image(&self, k: &CameraIntrinsics, p: PixelPoint) -> bool {
        let [w, h] = self.image_size_of(k);
        p.u >= 0.0 && p.v >= 0.0 && p.u <= w && p.v <= h
    }

    /// Ground-truth target points.
    pub fn points(&self, noise: &NoiseModel) -> Vec<PlanePoint> {
        let [ox, oy] = self.plane_origin_m;
        let [w, l] = self.plane_extent_m;
        match self.point_layout {
            PointLayout::Grid { nx, ny } => (0..ny)
                .flat_map(|j| {
                    (0..nx).map(move |i| {
                        PlanePoint::new(
                            ox + (i as f64 + 0.5) / nx as f64 * w,
                            oy + (j as f64 + 0.5) / ny as f64 * l,
                        )
                    })
                })
                .collect(),
            PointLayout::Random { count } => {
                let mut rng = noise.layout_rng();
                (0..count)
                    .map(|_| PlanePoint::new(ox + rng.random::<f64>() * w, oy + rng.random::<f64>() * l))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests;
