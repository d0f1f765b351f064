//! Planar projective maps.
//!
//! Homographies are stored scaled to unit Frobenius norm with `m[2][2] > 0`
//! (or, when that entry is zero, with the largest entry positive). This
//! removes the scale ambiguity without pinning `m[2][2] = 1`, which breaks
//! when that entry passes through zero.

mod dlt;
mod warp;

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CameraPose, PixelPoint, PlanePoint};

pub use dlt::{estimate_dlt, metric_rectify, RansacConfig};
pub use warp::{warp_raster, Interpolation, Raster, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("homography is singular")]
    Singular,
    #[error("non-finite homography entries")]
    NonFinite,
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate correspondence configuration")]
    DegenerateConfiguration,
    #[error("RANSAC found only {0} inliers")]
    NoConsensus(usize),
    #[error("pitch {pitch_deg:.4} deg is outside (0, 90) deg")]
    InvalidPitch { pitch_deg: f64 },
    #[error("output bounds are empty")]
    EmptyBounds,
    #[error("raster: {0}")]
    Raster(String),
    #[error("homography file: {0}")]
    File(String),
}

impl HomographyError {
    pub fn kind(&self) -> &'static str {
        match self {
            HomographyError::Singular => "Singular",
            HomographyError::NonFinite => "NonFinite",
            HomographyError::PointAtInfinity => "PointAtInfinity",
            HomographyError::InsufficientPoints(_) => "InsufficientPoints",
            HomographyError::DegenerateConfiguration => "DegenerateConfiguration",
            HomographyError::NoConsensus(_) => "NoConsensus",
            HomographyError::InvalidPitch { .. } => "InvalidPitch",
            HomographyError::EmptyBounds => "EmptyBounds",
            HomographyError::Raster(_) => "InvalidRaster",
            HomographyError::File(_) => "InvalidHomographyFile",
        }
    }
}

/// Smallest homogeneous coordinate treated as finite.
pub const INFINITY_EPS: f64 = 1e-12;
/// Smallest |det| of a normalized matrix treated as invertible.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    m: Matrix3<f64>,
}

/// Scales `m` to unit Frobenius norm and fixes the sign.
pub fn normalize_matrix(m: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    let mut out = if (norm - 1.0).abs() <= 8.0 * f64::EPSILON {
        *m
    } else {
        m / norm
    };
    let pivot = if out[(2, 2)] != 0.0 {
        out[(2, 2)]
    } else {
        let mut best = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                if out[(r, c)].abs() > best.abs() {
                    best = out[(r, c)];
                }
            }
        }
        best
    };
    if pivot < 0.0 {
        out = -out;
    }
    out
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, HomographyError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(HomographyError::NonFinite);
        }
        if m.norm() == 0.0 {
            return Err(HomographyError::Singular);
        }
        let m = normalize_matrix(&m);
        if m.determinant().abs() <= SINGULAR_EPS {
            return Err(HomographyError::Singular);
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity()).expect("identity is invertible")
    }

    pub fn from_row_slice(v: &[f64]) -> Result<Self, HomographyError> {
        if v.len() != 9 {
            return Err(HomographyError::File(format!("expected 9 entries, got {}", v.len())));
        }
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::new(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0)).expect("translation is invertible")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn normalized(&self) -> Self {
        Self {
            m: normalize_matrix(&self.m),
        }
    }

    pub fn inverse(&self) -> Result<Self, HomographyError> {
        let inv = self.m.try_inverse().ok_or(HomographyError::Singular)?;
        Self::new(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self, HomographyError> {
        Self::new(self.m * other.m)
    }

    /// Homogeneous image of `p` before perspective division.
    pub fn apply_homogeneous(&self, p: Point2<f64>) -> Vector3<f64> {
        self.m * Vector3::new(p.x, p.y, 1.0)
    }

    pub fn apply(&self, p: Point2<f64>) -> Result<Point2<f64>, HomographyError> {
        let q = self.apply_homogeneous(p);
        if q.z.abs() < INFINITY_EPS {
            return Err(HomographyError::PointAtInfinity);
        }
        Ok(Point2::new(q.x / q.z, q.y / q.z))
    }

    pub fn apply_pixel(&self, p: PixelPoint) -> Result<PlanePoint, HomographyError> {
        let q = self.apply(Point2::new(p.u, p.v))?;
        Ok(PlanePoint::new(q.x, q.y))
    }

    /// Frobenius distance to `other`; both are normalized so this is
    /// scale- and sign-free.
    pub fn distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).norm()
    }
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = HomographyError;

    fn try_from(v: [f64; 9]) -> Result<Self, Self::Error> {
        Self::from_row_slice(&v)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.to_row_array()
    }
}

/// Target of a correspondence: another image, or the metric plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Pixel(PixelPoint),
    Plane(PlanePoint),
}

impl Target {
    pub fn point(&self) -> Point2<f64> {
        match *self {
            Target::Pixel(p) => Point2::new(p.u, p.v),
            Target::Plane(p) => Point2::new(p.x, p.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub src: PixelPoint,
    pub dst: Target,
}

impl Correspondence {
    pub fn to_pixel(src: PixelPoint, dst: PixelPoint) -> Self {
        Self {
            src,
            dst: Target::Pixel(dst),
        }
    }

    pub fn to_plane(src: PixelPoint, dst: PlanePoint) -> Self {
        Self {
            src,
            dst: Target::Plane(dst),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub inlier_count: usize,
    /// RMS transfer error over inliers, in target-frame units.
    pub rms_error: f64,
    /// The solution is only weakly determined by the data.
    pub condition_warning: bool,
}

/// Image → metric ground homography of a roll-free camera, scaled to
/// `ground_scale` output units per meter.
///
/// Agrees with [`crate::mono::MonoRangingModel::locate`] whenever the
/// pixel aspect equals `f_x / f_y` (square pixels with equal focal lengths
/// in particular).
pub fn bev_from_camera(
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    ground_scale: f64,
) -> Result<Homography, HomographyError> {
    let a = pose.pitch;
    if !(a > 0.0 && a < FRAC_PI_2) {
        return Err(HomographyError::InvalidPitch {
            pitch_deg: a.to_degrees(),
        });
    }
    if !(ground_scale.is_finite() && ground_scale > 0.0) {
        return Err(HomographyError::Singular);
    }
    let k = intrinsics;
    let h = pose.height;
    let (sa, ca) = a.sin_cos();
    let normalize = Matrix3::new(
        1.0 / k.fx,
        0.0,
        -k.u0 / k.fx,
        0.0,
        1.0 / k.fy,
        -k.v0 / k.fy,
        0.0,
        0.0,
        1.0,
    );
    let ground = Matrix3::new(h, 0.0, 0.0, 0.0, h * sa, h * ca, 0.0, -ca, sa);
    let (sy, cy) = pose.yaw.sin_cos();
    let world = Matrix3::new(cy, -sy, pose.position.x, sy, cy, pose.position.y, 0.0, 0.0, 1.0);
    let scale = Matrix3::new(ground_scale, 0.0, 0.0, 0.0, ground_scale, 0.0, 0.0, 0.0, 1.0);
    Homography::new(scale * world * ground * normalize)
}

/// On-disk homography: nine row-major entries plus frame labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomographyFile {
    pub h: [f64; 9],
    pub frame_src: String,
    pub frame_dst: String,
}

impl HomographyFile {
    pub fn new(h: &Homography, frame_src: &str, frame_dst: &str) -> Self {
        Self {
            h: h.to_row_array(),
            frame_src: frame_src.to_owned(),
            frame_dst: frame_dst.to_owned(),
        }
    }

    pub fn homography(&self) -> Result<Homography, HomographyError> {
        Homography::from_row_slice(&self.h)
    }

    pub fn from_json(text: &str) -> Result<Self, HomographyError> {
        serde_json::from_str(text).map_err(|e| HomographyError::File(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HomographyError> {
        let text = std::fs::read_to_string(path).map_err(|e| HomographyError::File(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}
