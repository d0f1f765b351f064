//! Planar metric measurement from camera observations.
//!
//! Three ranging strategies over a flat ground plane:
//!
//! * [`mono`]: single-camera localization from installation height, pitch
//!   and intrinsics, with calibration from surveyed points.
//! * [`homography`] and [`mosaic`]: bird's-eye-view homographies, DLT
//!   estimation and bundle adjustment of many images over the plane.
//! * [`stereo`]: two monocular cameras with a measured baseline, solved by
//!   the law of sines.
//!
//! [`sim`] generates seeded synthetic scenes and error statistics for all of
//! them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod homography;
pub mod mono;
pub mod mosaic;
pub mod optim;
mod par;
pub mod sim;
pub mod stereo;

pub use geometry::{
    deg_to_rad, normalize_angle, rad_to_deg, AngleDeg, AngleRad, CameraConfig, CameraIntrinsics, CameraPose,
    CameraSource, GeometryError, PixelPoint, PlanePoint,
};
