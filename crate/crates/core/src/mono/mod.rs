//! Monocular ground-plane localization.
//!
//! A roll-free pinhole camera at height `H` pitched down by `α` sees a
//! ground point through a ray whose depression angle is
//! `β = α - arctan((v - v0) / f_y)`. The longitudinal distance is
//! `Y = H / tan β` and the lateral coordinate is
//!
//! ```text
//! X = (u - u0) H / ( sqrt(f_x² + (v - v0)² a²) · sin β )
//! ```
//!
//! with `a` the pixel aspect `d_y / d_x` (1 for square pixels).
//!
//! The vertical pixel coordinate follows that model: `v - v0 > 0` tilts the
//! ray toward the horizon, so larger `v` means farther ground points. Images
//! stored top-down must be flipped (`v = 2 v0 - row`) before ranging.

mod calibrate;

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AngleRad, CameraIntrinsics, CameraPose, PixelPoint, PlanePoint};

pub use calibrate::{fit_calibration, CalibrationError, CalibrationFit, CalibrationOptions, CalibrationProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RangingError {
    #[error("ray does not meet the ground in front of the camera (depression {depression_deg:.4} deg)")]
    RayAboveHorizon { depression_deg: f64 },
    #[error("depression {depression_deg:.4} deg is below the {threshold_deg:.3} deg stability threshold")]
    RayTooShallow { depression_deg: f64, threshold_deg: f64 },
    #[error("effective pitch {pitch_deg:.4} deg is outside (0, 90) deg")]
    InvalidPitch { pitch_deg: f64 },
    #[error("point lies behind the camera")]
    BehindCamera,
    #[error("point does not project onto the image plane")]
    OffImagePlane,
    #[error("invalid sweep range: {0}")]
    InvalidRange(&'static str),
    #[error("non-finite input")]
    NonFinite,
}

impl RangingError {
    pub fn kind(&self) -> &'static str {
        match self {
            RangingError::RayAboveHorizon { .. } => "RayAboveHorizon",
            RangingError::RayTooShallow { .. } => "RayTooShallow",
            RangingError::InvalidPitch { .. } => "InvalidPitch",
            RangingError::BehindCamera => "BehindCamera",
            RangingError::OffImagePlane => "OffImagePlane",
            RangingError::InvalidRange(_) => "InvalidRange",
            RangingError::NonFinite => "NonFinite",
        }
    }
}

/// Corrections estimated from surveyed ground points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationCorrection {
    /// Added to the installed pitch, radians.
    pub delta_pitch: f64,
    /// Added to the principal point, pixels.
    pub delta_u0: f64,
    pub delta_v0: f64,
    /// Added to the installed height, meters. Zero unless fitted explicitly.
    #[serde(default)]
    pub delta_height: f64,
}

impl CalibrationCorrection {
    pub const MAX_DELTA_PITCH: f64 = std::f64::consts::FRAC_PI_4;

    pub fn is_valid(&self) -> bool {
        self.delta_pitch.is_finite()
            && self.delta_u0.is_finite()
            && self.delta_v0.is_finite()
            && self.delta_height.is_finite()
            && self.delta_pitch.abs() < Self::MAX_DELTA_PITCH
    }
}

/// What to do with rays flatter than the shallow-ray threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ShallowRayPolicy {
    /// Evaluate anyway; callers can query [`MonoRangingModel::is_shallow`].
    #[default]
    Warn,
    Reject,
}

pub const DEFAULT_SHALLOW_THRESHOLD_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoRangingModel {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub corrections: Option<CalibrationCorrection>,
    pub shallow_threshold: f64,
    pub shallow_policy: ShallowRayPolicy,
}

/// Parameters after corrections are applied.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Effective {
    pub pitch: f64,
    pub u0: f64,
    pub v0: f64,
    pub height: f64,
}

impl MonoRangingModel {
    pub fn new(intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Self {
            intrinsics,
            pose,
            corrections: None,
            shallow_threshold: DEFAULT_SHALLOW_THRESHOLD_DEG.to_radians(),
            shallow_policy: ShallowRayPolicy::Warn,
        }
    }

    pub fn with_corrections(mut self, c: CalibrationCorrection) -> Self {
        self.corrections = Some(c);
        self
    }

    pub fn with_shallow_policy(mut self, threshold: AngleRad, policy: ShallowRayPolicy) -> Self {
        self.shallow_threshold = threshold.0;
        self.shallow_policy = policy;
        self
    }

    pub(crate) fn effective(&self) -> Result<Effective, RangingError> {
        let c = self.corrections.unwrap_or_default();
        let e = Effective {
            pitch: self.pose.pitch + c.delta_pitch,
            u0: self.intrinsics.u0 + c.delta_u0,
            v0: self.intrinsics.v0 + c.delta_v0,
            height: self.pose.height + c.delta_height,
        };
        if !(e.pitch > 0.0 && e.pitch < FRAC_PI_2) {
            return Err(RangingError::InvalidPitch {
                pitch_deg: e.pitch.to_degrees(),
            });
        }
        if !(e.height > 0.0) {
            return Err(RangingError::NonFinite);
        }
        Ok(e)
    }

    /// Depression angle `β` of the ray through `p`, radians.
    pub fn depression_angle(&self, p: PixelPoint) -> Result<f64, RangingError> {
        if !p.is_finite() {
            return Err(RangingError::NonFinite);
        }
        let e = self.effective()?;
        Ok(depression(&e, self.intrinsics.fy, p.v))
    }

    pub fn is_shallow(&self, p: PixelPoint) -> Result<bool, RangingError> {
        Ok(self.depression_angle(p)? < self.shallow_threshold)
    }

    fn checked_depression(&self, e: &Effective, p: PixelPoint) -> Result<f64, RangingError> {
        if !p.is_finite() {
            return Err(RangingError::NonFinite);
        }
        let beta = depression(e, self.intrinsics.fy, p.v);
        if !(beta > 0.0) {
            return Err(RangingError::RayAboveHorizon {
                depression_deg: beta.to_degrees(),
            });
        }
        if self.shallow_policy == ShallowRayPolicy::Reject && beta < self.shallow_threshold {
            return Err(RangingError::RayTooShallow {
                depression_deg: beta.to_degrees(),
                threshold_deg: self.shallow_threshold.to_degrees(),
            });
        }
        Ok(beta)
    }

    /// Camera-local `(X, Y)` of the ground point seen at `p`.
    pub fn locate_local(&self, p: PixelPoint) -> Result<PlanePoint, RangingError> {
        let e = self.effective()?;
        let beta = self.checked_depression(&e, p)?;
        let dv = p.v - e.v0;
        let k = &self.intrinsics;
        let denom = (k.fx * k.fx + dv * dv * k.pixel_aspect * k.pixel_aspect).sqrt();
        let x = (p.u - e.u0) * e.height / (denom * beta.sin());
        let y = e.height / beta.tan();
        Ok(PlanePoint::new(x, y))
    }

    pub fn longitudinal_distance(&self, p: PixelPoint) -> Result<f64, RangingError> {
        let e = self.effective()?;
        let beta = self.checked_depression(&e, p)?;
        Ok(e.height / beta.tan())
    }

    pub fn lateral_coordinate(&self, p: PixelPoint) -> Result<f64, RangingError> {
        Ok(self.locate_local(p)?.x)
    }

    /// World position of the ground point seen at `p`.
    pub fn locate(&self, p: PixelPoint) -> Result<PlanePoint, RangingError> {
        Ok(self.pose.local_to_world(self.locate_local(p)?))
    }

    /// Slant distance from the camera center to the ground point.
    pub fn slant_distance(&self, p: PixelPoint) -> Result<f64, RangingError> {
        let local = self.locate_local(p)?;
        let h = self.effective()?.height;
        Ok((local.x * local.x + local.y * local.y + h * h).sqrt())
    }

    /// Forward model: the pixel at which world point `q` is seen.
    pub fn project_to_pixel(&self, q: PlanePoint) -> Result<PixelPoint, RangingError> {
        if !q.is_finite() {
            return Err(RangingError::NonFinite);
        }
        let e = self.effective()?;
        let local = self.pose.world_to_local(q);
        if !(local.y > 0.0) {
            return Err(RangingError::BehindCamera);
        }
        let beta = (e.height / local.y).atan();
        let tilt = e.pitch - beta;
        if tilt.abs() >= FRAC_PI_2 {
            return Err(RangingError::OffImagePlane);
        }
        let k = &self.intrinsics;
        let dv = k.fy * tilt.tan();
        let denom = (k.fx * k.fx + dv * dv * k.pixel_aspect * k.pixel_aspect).sqrt();
        Ok(PixelPoint::new(
            e.u0 + local.x * denom * beta.sin() / e.height,
            e.v0 + dv,
        ))
    }
}

fn depression(e: &Effective, fy: f64, v: f64) -> f64 {
    e.pitch - ((v - e.v0) / fy).atan()
}

/// `Y = H / tan α` sampled across a pitch range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub height: f64,
    /// `(pitch radians, Y meters)`.
    pub samples: Vec<(f64, f64)>,
}

impl SensitivityCurve {
    /// `alpha_deg,Y_m` with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha_deg,Y_m\n");
        for (a, y) in &self.samples {
            let _ = writeln!(out, "{:.6},{:.6}", a.to_degrees(), y);
        }
        out
    }
}

/// Number of samples in an inclusive sweep `min, min + step, ..., <= max`.
pub fn sweep_len(min: f64, max: f64, step: f64) -> usize {
    // tolerate representation error when `max` sits on the grid
    ((max - min) / step + 1e-9).floor() as usize + 1
}

pub fn sensitivity_sweep(
    height: f64,
    pitch_min: AngleRad,
    pitch_max: AngleRad,
    step: AngleRad,
) -> Result<SensitivityCurve, RangingError> {
    let (lo, hi, st) = (pitch_min.0, pitch_max.0, step.0);
    if !(height.is_finite() && height > 0.0) {
        return Err(RangingError::InvalidRange("height must be positive"));
    }
    if !(lo > 0.0 && lo < hi && hi < FRAC_PI_2) {
        return Err(RangingError::InvalidRange("need 0 < pitch_min < pitch_max < 90 deg"));
    }
    if !(st > 0.0 && st.is_finite()) {
        return Err(RangingError::InvalidRange("step must be positive"));
    }
    let n = sweep_len(lo, hi, st);
    let samples = (0..n)
        .map(|k| {
            let a = lo + k as f64 * st;
            (a, height / a.tan())
        })
        .collect();
    Ok(SensitivityCurve { height, samples })
}

/// One surveyed ground point and its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlObservation {
    pub pixel: PixelPoint,
    pub world: PlanePoint,
}

#[derive(Debug, Deserialize)]
struct ControlRow {
    u: f64,
    v: f64,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Y")]
    y: f64,
}

/// Parses a `u,v,X,Y` control-point CSV.
pub fn parse_control_points(text: &str) -> Result<Vec<ControlObservation>, csv::Error> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<ControlRow>()
        .map(|r| {
            r.map(|r| ControlObservation {
                pixel: PixelPoint::new(r.u, r.v),
                world: PlanePoint::new(r.x, r.y),
            })
        })
        .collect()
}

pub fn write_control_points(points: &[ControlObservation]) -> String {
    let mut out = String::from("u,v,X,Y\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.pixel.u, p.pixel.v, p.world.x, p.world.y);
    }
    out
}
