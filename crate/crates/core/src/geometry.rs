//! Shared camera and plane types, angle conventions and the camera
//! configuration file.
//!
//! Conventions used throughout the crate:
//!
//! * Angles are radians internally; degrees appear only at I/O boundaries.
//! * Pitch is positive when the optical axis looks down from horizontal.
//! * The camera-local ground frame has its origin at the camera foot point,
//!   `+Y` along the horizontal projection of the optical axis and `+X` to the
//!   right of it. A camera's `yaw` rotates that frame counterclockwise into
//!   the world frame, so a heading angle `θ` points along `(-sin θ, cos θ)`.
//! * Roll is assumed zero.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("invalid pose: {0}")]
    InvalidPose(&'static str),
    #[error("camera config: {0}")]
    Config(String),
    #[error("camera config I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl GeometryError {
    pub fn kind(&self) -> &'static str {
        match self {
            GeometryError::InvalidIntrinsics(_) => "InvalidIntrinsics",
            GeometryError::InvalidPose(_) => "InvalidPose",
            GeometryError::Config(_) => "InvalidCameraConfig",
            GeometryError::Io(_) => "Io",
        }
    }
}

/// An angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleDeg(pub f64);

/// An angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleRad(pub f64);

impl AngleDeg {
    pub fn to_rad(self) -> AngleRad {
        deg_to_rad(self)
    }
}

impl AngleRad {
    pub fn to_deg(self) -> AngleDeg {
        rad_to_deg(self)
    }

    pub fn normalized(self) -> AngleRad {
        normalize_angle(self)
    }
}

impl From<AngleDeg> for AngleRad {
    fn from(a: AngleDeg) -> Self {
        deg_to_rad(a)
    }
}

impl From<AngleRad> for AngleDeg {
    fn from(a: AngleRad) -> Self {
        rad_to_deg(a)
    }
}

pub fn deg_to_rad(a: AngleDeg) -> AngleRad {
    AngleRad(a.0.to_radians())
}

pub fn rad_to_deg(a: AngleRad) -> AngleDeg {
    AngleDeg(a.0.to_degrees())
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: AngleRad) -> AngleRad {
    let two_pi = 2.0 * PI;
    let mut r = a.0.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    // rem_euclid may return exactly two_pi for tiny negative inputs
    if r <= -PI {
        r += two_pi;
    }
    AngleRad(r)
}

/// Unit ground-plane direction for a heading angle (counterclockwise from `+Y`).
pub fn heading_direction(heading: AngleRad) -> [f64; 2] {
    let (s, c) = heading.0.sin_cos();
    [-s, c]
}

/// Heading angle of a ground-plane direction vector.
pub fn direction_heading(dx: f64, dy: f64) -> AngleRad {
    AngleRad((-dx).atan2(dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// A point on the ground plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &PlanePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Pixel-unit pinhole intrinsics.
///
/// `pixel_aspect` is `d_y / d_x`, the ratio of the physical pixel pitches.
/// It only enters the lateral localization denominator and defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    pub pixel_aspect: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        Self::with_aspect(fx, fy, u0, v0, 1.0)
    }

    pub fn with_aspect(fx: f64, fy: f64, u0: f64, v0: f64, pixel_aspect: f64) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            u0,
            v0,
            pixel_aspect,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.u0.is_finite() && self.v0.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("principal point must be finite"));
        }
        if !(self.pixel_aspect.is_finite() && self.pixel_aspect > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("pixel_aspect must be positive"));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> PixelPoint {
        PixelPoint::new(self.u0, self.v0)
    }
}

/// Installation pose of a camera over the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Height above the ground plane, meters.
    pub height: f64,
    /// Downward tilt of the optical axis, radians.
    pub pitch: f64,
    /// Counterclockwise rotation about the vertical axis, radians.
    pub yaw: f64,
    /// World coordinates of the camera foot point, meters.
    pub position: PlanePoint,
}

impl CameraPose {
    pub fn new(height: f64, pitch: AngleRad) -> Result<Self, GeometryError> {
        let p = Self {
            height,
            pitch: pitch.0,
            yaw: 0.0,
            position: PlanePoint::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_yaw(mut self, yaw: AngleRad) -> Self {
        self.yaw = yaw.0;
        self
    }

    pub fn at(mut self, position: PlanePoint) -> Self {
        self.position = position;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(GeometryError::InvalidPose("height must be positive"));
        }
        if !(self.pitch.is_finite() && self.yaw.is_finite() && self.position.is_finite()) {
            return Err(GeometryError::InvalidPose("angles and position must be finite"));
        }
        Ok(())
    }

    /// Camera-local ground coordinates to world coordinates.
    pub fn local_to_world(&self, local: PlanePoint) -> PlanePoint {
        let (s, c) = self.yaw.sin_cos();
        PlanePoint::new(
            self.position.x + c * local.x - s * local.y,
            self.position.y + s * local.x + c * local.y,
        )
    }

    /// World coordinates to camera-local ground coordinates.
    pub fn world_to_local(&self, world: PlanePoint) -> PlanePoint {
        let (s, c) = self.yaw.sin_cos();
        let dx = world.x - self.position.x;
        let dy = world.y - self.position.y;
        PlanePoint::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

/// On-disk camera configuration, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    #[serde(default = "one")]
    pub pixel_aspect: f64,
    pub height_m: f64,
    pub pitch_deg: f64,
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub position_m: [f64; 2],
}

fn one() -> f64 {
    1.0
}

impl CameraConfig {
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        serde_json::from_str(text).map_err(|e| GeometryError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_camera(intrinsics: &CameraIntrinsics, pose: &CameraPose) -> Self {
        Self {
            fx: intrinsics.fx,
            fy: intrinsics.fy,
            u0: intrinsics.u0,
            v0: intrinsics.v0,
            pixel_aspect: intrinsics.pixel_aspect,
            height_m: pose.height,
            pitch_deg: pose.pitch.to_degrees(),
            yaw_deg: pose.yaw.to_degrees(),
            position_m: [pose.position.x, pose.position.y],
        }
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, GeometryError> {
        CameraIntrinsics::with_aspect(self.fx, self.fy, self.u0, self.v0, self.pixel_aspect)
    }

    pub fn pose(&self) -> Result<CameraPose, GeometryError> {
        let pose = CameraPose {
            height: self.height_m,
            pitch: self.pitch_deg.to_radians(),
            yaw: self.yaw_deg.to_radians(),
            position: PlanePoint::new(self.position_m[0], self.position_m[1]),
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn camera(&self) -> Result<(CameraIntrinsics, CameraPose), GeometryError> {
        Ok((self.intrinsics()?, self.pose()?))
    }
}

/// Camera given inline or as a path to a camera config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraSource {
    Inline(CameraConfig),
    Path(String),
}

impl CameraSource {
    /// Loads the config, resolving a relative path against `base`.
    pub fn resolve(&self, base: &Path) -> Result<CameraConfig, GeometryError> {
        match self {
            CameraSource::Inline(cfg) => Ok(cfg.clone()),
            CameraSource::Path(p) => CameraConfig::load(base.join(p)),
        }
    }
}
