//! Pitch and principal-point corrections fitted from surveyed ground points.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CalibrationCorrection, ControlObservation, MonoRangingModel, RangingError};
use crate::geometry::{CameraIntrinsics, CameraPose};
use crate::optim::{levenberg_marquardt, DenseSystem, LeastSquaresProblem, LmConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("need at least {needed} control points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("control point geometry is degenerate: {0}")]
    DegenerateGeometry(String),
    #[error("calibration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Ranging(#[from] RangingError),
}

impl CalibrationError {
    pub fn kind(&self) -> &'static str {
        match self {
            CalibrationError::InsufficientPoints { .. } => "InsufficientPoints",
            CalibrationError::DegenerateGeometry(_) => "DegenerateGeometry",
            CalibrationError::NoConvergence(_) => "NoConvergence",
            CalibrationError::Ranging(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    /// Also fit a height correction; needs at least 4 points.
    pub fit_height: bool,
    /// Largest acceptable condition number of the column-scaled normal matrix.
    pub max_condition: f64,
    pub lm: LmConfig,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            fit_height: false,
            max_condition: 1e12,
            lm: LmConfig {
                cost_tolerance: 1e-15,
                parameter_tolerance: 1e-14,
                ..LmConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub correction: CalibrationCorrection,
    /// RMS of world-frame residual norms, meters.
    pub rms: f64,
    pub iterations: usize,
}

/// World-frame residuals of `locate` over control points as a function of
/// the correction vector `(Δα, Δu0, Δv0[, ΔH])`.
pub struct CalibrationProblem<'a> {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub observations: &'a [ControlObservation],
    pub fit_height: bool,
}

impl CalibrationProblem<'_> {
    pub fn n_params(&self) -> usize {
        if self.fit_height {
            4
        } else {
            3
        }
    }

    pub fn correction(&self, x: &DVector<f64>) -> CalibrationCorrection {
        CalibrationCorrection {
            delta_pitch: x[0],
            delta_u0: x[1],
            delta_v0: x[2],
            delta_height: if self.fit_height { x[3] } else { 0.0 },
        }
    }

    fn model(&self, x: &DVector<f64>) -> MonoRangingModel {
        MonoRangingModel::new(self.intrinsics, self.pose).with_corrections(self.correction(x))
    }

    pub fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>, RangingError> {
        let model = self.model(x);
        let mut r = DVector::zeros(2 * self.observations.len());
        for (i, obs) in self.observations.iter().enumerate() {
            let q = model.locate(obs.pixel)?;
            r[2 * i] = q.x - obs.world.x;
            r[2 * i + 1] = q.y - obs.world.y;
        }
        Ok(r)
    }

    /// Analytic Jacobian of [`Self::residuals`].
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, RangingError> {
        let model = self.model(x);
        let e = model.effective()?;
        let k = &self.intrinsics;
        let a2 = k.pixel_aspect * k.pixel_aspect;
        let (sy, cy) = self.pose.yaw.sin_cos();
        let rot = Matrix2::new(cy, -sy, sy, cy);
        let mut j = DMatrix::zeros(2 * self.observations.len(), self.n_params());
        for (i, obs) in self.observations.iter().enumerate() {
            let du = obs.pixel.u - e.u0;
            let dv = obs.pixel.v - e.v0;
            let beta = e.pitch - (dv / k.fy).atan();
            if !(beta > 0.0) {
                return Err(RangingError::RayAboveHorizon {
                    depression_deg: beta.to_degrees(),
                });
            }
            let (sb, cb) = beta.sin_cos();
            let d = (k.fx * k.fx + dv * dv * a2).sqrt();
            let h = e.height;

            let dbeta_dv0 = k.fy / (k.fy * k.fy + dv * dv);
            let dy_dbeta = -h / (sb * sb);
            let dx_dbeta = -du * h * cb / (d * sb * sb);
            let dx_dd = -du * h / (d * d * sb);
            let dd_dv0 = -dv * a2 / d;

            // local (X, Y) partials per parameter
            let cols = [
                (dx_dbeta, dy_dbeta),
                (-h / (d * sb), 0.0),
                (dx_dbeta * dbeta_dv0 + dx_dd * dd_dv0, dy_dbeta * dbeta_dv0),
                (du / (d * sb), 1.0 / beta.tan()),
            ];
            for (c, (lx, ly)) in cols.iter().take(self.n_params()).enumerate() {
                let w = rot * nalgebra::Vector2::new(*lx, *ly);
                j[(2 * i, c)] = w[0];
                j[(2 * i + 1, c)] = w[1];
            }
        }
        Ok(j)
    }
}

impl LeastSquaresProblem for CalibrationProblem<'_> {
    type Params = DVector<f64>;
    type System = DenseSystem;

    fn cost(&self, x: &DVector<f64>) -> f64 {
        if !self.correction(x).is_valid() {
            return f64::INFINITY;
        }
        match self.residuals(x) {
            Ok(r) => r.norm_squared(),
            Err(_) => f64::INFINITY,
        }
    }

    fn linearize(&self, x: &DVector<f64>) -> (f64, DenseSystem) {
        let r = self.residuals(x).expect("linearized at an accepted point");
        let j = self.jacobian(x).expect("linearized at an accepted point");
        (r.norm_squared(), DenseSystem::from_jacobian(&j, &r))
    }

    fn retract(&self, x: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        x + delta
    }

    fn param_scale(&self, x: &DVector<f64>) -> f64 {
        x.norm()
    }
}

fn pixels_collinear(observations: &[ControlObservation]) -> bool {
    let n = observations.len() as f64;
    let (mu, mv) = observations
        .iter()
        .fold((0.0, 0.0), |(a, b), o| (a + o.pixel.u / n, b + o.pixel.v / n));
    let mut c = Matrix2::zeros();
    for o in observations {
        let d = nalgebra::Vector2::new(o.pixel.u - mu, o.pixel.v - mv);
        c += d * d.transpose();
    }
    let ev = c.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    hi <= 0.0 || lo <= 1e-12 * hi
}

/// Fits `(Δα, Δu0, Δv0)` (and optionally `ΔH`) minimizing the squared world
/// residuals of `locate` over the control observations.
pub fn fit_calibration(
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    observations: &[ControlObservation],
    options: &CalibrationOptions,
) -> Result<CalibrationFit, CalibrationError> {
    let needed = if options.fit_height { 4 } else { 3 };
    if observations.len() < needed {
        return Err(CalibrationError::InsufficientPoints {
            needed,
            got: observations.len(),
        });
    }
    if pixels_collinear(observations) {
        return Err(CalibrationError::DegenerateGeometry(
            "control pixels are collinear".into(),
        ));
    }
    let problem = CalibrationProblem {
        intrinsics: *intrinsics,
        pose: *pose,
        observations,
        fit_height: options.fit_height,
    };
    let x0 = DVector::zeros(problem.n_params());
    problem.residuals(&x0)?;

    let j = problem.jacobian(&x0)?;
    let norms: Vec<f64> = j.column_iter().map(|c| c.norm()).collect();
    if norms.contains(&0.0) {
        return Err(CalibrationError::DegenerateGeometry(
            "a correction parameter is unobservable".into(),
        ));
    }
    let scaled = DMatrix::from_fn(j.nrows(), j.ncols(), |r, c| j[(r, c)] / norms[c]);
    let ev = scaled.tr_mul(&scaled).symmetric_eigenvalues();
    let cond = ev.max() / ev.min().max(f64::MIN_POSITIVE);
    if !(cond <= options.max_condition) {
        return Err(CalibrationError::DegenerateGeometry(format!(
            "normal equations condition number {cond:.3e}"
        )));
    }

    let out = levenberg_marquardt(&problem, x0, &options.lm);
    if !out.converged {
        return Err(CalibrationError::NoConvergence(out.iterations));
    }
    let correction = problem.correction(&out.params);
    let rms = (out.final_cost / observations.len() as f64).sqrt();
    Ok(CalibrationFit {
        correction,
        rms,
        iterations: out.iterations,
    })
}
