//! Two-camera ranging by the law of sines.
//!
//! Each camera reports a compass yaw; the column of the target pixel adds a
//! horizontal offset. The two bearings and the measured baseline form a
//! triangle whose sides give the distance from each camera.
//!
//! ```text
//!                 T
//!                / \
//!        dist_a /γ  \ dist_b
//!              /     \
//!             /α     β\
//!            A---------B
//!                 d
//! ```
//!
//! Bearings are headings measured counterclockwise from `+Y`. The interior
//! angle at `A` is the unsigned angle between the ray and the direction
//! `A → B`; at `B` it is taken against `B → A`. Both rays must leave the
//! baseline on the same side.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    direction_heading, heading_direction, normalize_angle, AngleRad, CameraIntrinsics, CameraPose, CameraSource,
    GeometryError, PixelPoint, PlanePoint,
};
use crate::mono::{MonoRangingModel, RangingError};

/// Rays closer than this to parallel are rejected.
pub const DEFAULT_DEGENERACY_EPS_DEG: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StereoError {
    #[error("rays are nearly parallel: alpha + beta = {sum_deg:.6} deg")]
    DegenerateTriangle { sum_deg: f64 },
    #[error("bearing of camera {camera} does not cross the baseline toward the target")]
    BearingBehindBaseline { camera: char },
    #[error("interior angle {angle_deg:.6} deg is outside (0, 180) deg")]
    InvalidAngle { angle_deg: f64 },
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("rig file: {0}")]
    File(String),
}

impl StereoError {
    pub fn kind(&self) -> &'static str {
        match self {
            StereoError::DegenerateTriangle { .. } => "DegenerateTriangle",
            StereoError::BearingBehindBaseline { .. } => "BearingBehindBaseline",
            StereoError::InvalidAngle { .. } => "InvalidAngle",
            StereoError::InvalidRig(_) => "InvalidRig",
            StereoError::NonFinite => "NonFinite",
            StereoError::File(_) => "InvalidRigFile",
        }
    }
}

/// Horizontal angle of the pixel column from the optical axis, positive to
/// the right of the principal point.
pub fn pixel_yaw(intrinsics: &CameraIntrinsics, p: PixelPoint) -> AngleRad {
    AngleRad(((p.u - intrinsics.u0) / intrinsics.fx).atan())
}

/// World bearing of the ray through `p`. A column right of the principal
/// point turns clockwise, so the pixel yaw is subtracted from the pose yaw.
pub fn total_yaw(pose: &CameraPose, intrinsics: &CameraIntrinsics, p: PixelPoint) -> AngleRad {
    normalize_angle(AngleRad(pose.yaw - pixel_yaw(intrinsics, p).0))
}

/// Column whose ray has world bearing `bearing`; the inverse of
/// [`total_yaw`] in `u`. `None` when the bearing is 90° or more off-axis.
pub fn column_for_bearing(pose: &CameraPose, intrinsics: &CameraIntrinsics, bearing: AngleRad) -> Option<f64> {
    let off = normalize_angle(AngleRad(pose.yaw - bearing.0)).0;
    (off.abs() < PI / 2.0).then(|| intrinsics.u0 + intrinsics.fx * off.tan())
}

/// Bearing error of the column model for a real pinhole projection: the
/// column-derived bearing of the projected target minus its true bearing.
/// Zero on the optical axis and at zero pitch; grows with pitch and offset.
pub fn column_model_error(
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    target: PlanePoint,
) -> Result<AngleRad, RangingError> {
    let p = MonoRangingModel::new(*intrinsics, *pose).project_to_pixel(target)?;
    let d = PlanePoint::new(target.x - pose.position.x, target.y - pose.position.y);
    let truth = direction_heading(d.x, d.y);
    Ok(normalize_angle(AngleRad(total_yaw(pose, intrinsics, p).0 - truth.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleSolution {
    /// Interior angle at camera A.
    pub alpha: f64,
    /// Interior angle at camera B.
    pub beta: f64,
    /// Angle at the target.
    pub gamma: f64,
    /// Camera A to target.
    pub dist_a: f64,
    /// Camera B to target.
    pub dist_b: f64,
    /// From [`solve_triangle`]: baseline frame with `A` at the origin and
    /// `B` on `+X`. From [`StereoRig::range_target`]: world frame.
    pub target: PlanePoint,
}

impl TriangleSolution {
    /// Largest relative spread of the three law-of-sines ratios.
    pub fn law_of_sines_residual(&self, baseline: f64) -> f64 {
        let r = [
            self.dist_a / self.beta.sin(),
            self.dist_b / self.alpha.sin(),
            baseline / self.gamma.sin(),
        ];
        let hi = r.iter().copied().fold(f64::MIN, f64::max);
        let lo = r.iter().copied().fold(f64::MAX, f64::min);
        (hi - lo) / hi.abs()
    }
}

pub fn solve_triangle(d: f64, alpha: AngleRad, beta: AngleRad) -> Result<TriangleSolution, StereoError> {
    solve_triangle_with(d, alpha, beta, DEFAULT_DEGENERACY_EPS_DEG.to_radians())
}

/// [`solve_triangle`] with an explicit near-parallel guard `eps` (radians).
pub fn solve_triangle_with(d: f64, alpha: AngleRad, beta: AngleRad, eps: f64) -> Result<TriangleSolution, StereoError> {
    let (a, b) = (alpha.0, beta.0);
    if !(d.is_finite() && a.is_finite() && b.is_finite()) {
        return Err(StereoError::NonFinite);
    }
    if d <= 0.0 {
        return Err(StereoError::InvalidRig(format!("baseline {d} must be positive")));
    }
    for x in [a, b] {
        if !(x > 0.0 && x < PI) {
            return Err(StereoError::InvalidAngle {
                angle_deg: x.to_degrees(),
            });
        }
    }
    if a + b >= PI - eps {
        return Err(StereoError::DegenerateTriangle {
            sum_deg: (a + b).to_degrees(),
        });
    }
    let gamma = PI - a - b;
    let sg = gamma.sin();
    let dist_a = d * b.sin() / sg;
    let dist_b = d * a.sin() / sg;
    Ok(TriangleSolution {
        alpha: a,
        beta: b,
        gamma,
        dist_a,
        dist_b,
        target: PlanePoint::new(dist_a * a.cos(), dist_a * a.sin()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub cam_a: (CameraIntrinsics, CameraPose),
    pub cam_b: (CameraIntrinsics, CameraPose),
    pub baseline: f64,
    /// Heading of the direction `A → B`.
    pub baseline_azimuth: f64,
    pub degeneracy_eps: f64,
}

impl StereoRig {
    /// When both poses sit at the same position, B is placed at
    /// `A + baseline` along the azimuth. Otherwise the positions must agree
    /// with the baseline length and azimuth.
    pub fn new(
        cam_a: (CameraIntrinsics, CameraPose),
        mut cam_b: (CameraIntrinsics, CameraPose),
        baseline: f64,
        baseline_azimuth: AngleRad,
    ) -> Result<Self, StereoError> {
        if !(baseline.is_finite() && baseline_azimuth.0.is_finite()) {
            return Err(StereoError::NonFinite);
        }
        if baseline <= 0.0 {
            return Err(StereoError::InvalidRig(format!("baseline {baseline} must be positive")));
        }
        let az = baseline_azimuth.0;
        let pa = cam_a.1.position;
        let pb = cam_b.1.position;
        if pa == pb {
            let [dx, dy] = heading_direction(baseline_azimuth);
            cam_b.1.position = PlanePoint::new(pa.x + baseline * dx, pa.y + baseline * dy);
        } else {
            let len = pa.distance(&pb);
            if (len - baseline).abs() > 1e-6 * baseline {
                return Err(StereoError::InvalidRig(format!(
                    "camera positions are {len} m apart but the baseline is {baseline} m"
                )));
            }
            let dir = direction_heading(pb.x - pa.x, pb.y - pa.y);
            if normalize_angle(AngleRad(dir.0 - az)).0.abs() > 1e-6 {
                return Err(StereoError::InvalidRig(format!(
                    "camera positions lie at azimuth {:.6} deg, not {:.6} deg",
                    dir.0.to_degrees(),
                    az.to_degrees()
                )));
            }
        }
        Ok(Self {
            cam_a,
            cam_b,
            baseline,
            baseline_azimuth: az,
            degeneracy_eps: DEFAULT_DEGENERACY_EPS_DEG.to_radians(),
        })
    }

    /// Rig from two placed cameras; baseline and azimuth follow from the
    /// positions.
    pub fn from_positions(
        cam_a: (CameraIntrinsics, CameraPose),
        cam_b: (CameraIntrinsics, CameraPose),
    ) -> Result<Self, StereoError> {
        let (pa, pb) = (cam_a.1.position, cam_b.1.position);
        if pa == pb {
            return Err(StereoError::InvalidRig("cameras share a position".into()));
        }
        let az = direction_heading(pb.x - pa.x, pb.y - pa.y);
        Self::new(cam_a, cam_b, pa.distance(&pb), az)
    }

    /// Same rig seen from B: cameras exchanged, azimuth reversed.
    pub fn swapped(&self) -> Self {
        Self {
            cam_a: self.cam_b,
            cam_b: self.cam_a,
            baseline_azimuth: normalize_angle(AngleRad(self.baseline_azimuth + PI)).0,
            ..*self
        }
    }

    /// Interior angles at A and B for two world bearings.
    pub fn interior_angles(&self, yaw_a: AngleRad, yaw_b: AngleRad) -> Result<(f64, f64), StereoError> {
        let sa = normalize_angle(AngleRad(yaw_a.0 - self.baseline_azimuth)).0;
        let sb = normalize_angle(AngleRad(yaw_b.0 - self.baseline_azimuth - PI)).0;
        // target left of A→B means a counterclockwise turn at A and a
        // clockwise turn at B
        if sa == 0.0 || sa.abs() >= PI {
            return Err(StereoError::BearingBehindBaseline { camera: 'A' });
        }
        if sb == 0.0 || sb.abs() >= PI || sa.signum() == sb.signum() {
            return Err(StereoError::BearingBehindBaseline { camera: 'B' });
        }
        Ok((sa.abs(), sb.abs()))
    }

    /// Solves from two world bearings; the target is reported in the world
    /// frame.
    pub fn range_bearings(&self, yaw_a: AngleRad, yaw_b: AngleRad) -> Result<TriangleSolution, StereoError> {
        if !(yaw_a.0.is_finite() && yaw_b.0.is_finite()) {
            return Err(StereoError::NonFinite);
        }
        let (a, b) = self.interior_angles(yaw_a, yaw_b)?;
        let mut sol = solve_triangle_with(self.baseline, AngleRad(a), AngleRad(b), self.degeneracy_eps)?;
        let [dx, dy] = heading_direction(yaw_a);
        let pa = self.cam_a.1.position;
        sol.target = PlanePoint::new(pa.x + sol.dist_a * dx, pa.y + sol.dist_a * dy);
        Ok(sol)
    }

    pub fn range_target(&self, p_a: PixelPoint, p_b: PixelPoint) -> Result<TriangleSolution, StereoError> {
        if !(p_a.is_finite() && p_b.is_finite()) {
            return Err(StereoError::NonFinite);
        }
        let (ka, pose_a) = &self.cam_a;
        let (kb, pose_b) = &self.cam_b;
        self.range_bearings(total_yaw(pose_a, ka, p_a), total_yaw(pose_b, kb, p_b))
    }
}

/// On-disk rig: two cameras, the measured baseline and its azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub camera_a: CameraSource,
    pub camera_b: CameraSource,
    pub baseline_m: f64,
    pub baseline_azimuth_deg: f64,
}

impl RigFile {
    pub fn from_json(text: &str) -> Result<Self, StereoError> {
        serde_json::from_str(text).map_err(|e| StereoError::File(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn rig(&self, base: &Path) -> Result<StereoRig, StereoError> {
        let load = |src: &CameraSource| -> Result<(CameraIntrinsics, CameraPose), GeometryError> {
            src.resolve(base)?.camera()
        };
        let a = load(&self.camera_a).map_err(|e| StereoError::File(format!("camera_a: {e}")))?;
        let b = load(&self.camera_b).map_err(|e| StereoError::File(format!("camera_b: {e}")))?;
        StereoRig::new(a, b, self.baseline_m, AngleRad(self.baseline_azimuth_deg.to_radians()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StereoRig, StereoError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| StereoError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)?.rig(path.parent().unwrap_or_else(|| Path::new(".")))
    }
}

#[cfg(test)]
mod tests;
