use std::path::Path;

use planar_ranging::mono::{
    fit_calibration, parse_control_points, sensitivity_sweep, CalibrationCorrection, CalibrationOptions,
    MonoRangingModel, RangingError,
};
use planar_ranging::stereo::RigFile;
use planar_ranging::{AngleDeg, CameraConfig, CameraIntrinsics, CameraPose, PixelPoint};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, Command, Report};

mod bev;
mod mosaic;
mod sim;

/// Calibration corrections as stored on disk, degrees and pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionFile {
    pub delta_pitch_deg: f64,
    pub delta_u0_px: f64,
    pub delta_v0_px: f64,
    #[serde(default)]
    pub delta_height_m: f64,
    /// Fit residual, informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_m: Option<f64>,
}

impl CorrectionFile {
    pub fn correction(&self) -> CalibrationCorrection {
        CalibrationCorrection {
            delta_pitch: self.delta_pitch_deg.to_radians(),
            delta_u0: self.delta_u0_px,
            delta_v0: self.delta_v0_px,
            delta_height: self.delta_height_m,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let c: Self = serde_json::from_str(&read(path)?)
            .map_err(|e| CliError::domain("InvalidCorrectionFile", format!("{}: {e}", path.display())))?;
        if !c.correction().is_valid() {
            return Err(CliError::domain(
                "InvalidCorrectionFile",
                format!("{}: corrections out of range", path.display()),
            ));
        }
        Ok(c)
    }
}

pub(crate) fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn load_camera(path: &Path) -> Result<(CameraIntrinsics, CameraPose), CliError> {
    Ok(CameraConfig::load(path)?.camera()?)
}

pub(crate) fn execute(cmd: &Command, warnings: &mut Vec<String>) -> Result<Report, CliError> {
    match cmd {
        Command::Mono { camera, pixel, calib } => mono(camera, *pixel, calib.as_deref(), warnings),
        Command::Stereo { rig, pixel_a, pixel_b } => stereo(rig, *pixel_a, *pixel_b),
        Command::Sensitivity {
            height,
            alpha_min,
            alpha_max,
            step,
            out,
        } => sensitivity(*height, *alpha_min, *alpha_max, *step, out.as_deref()),
        Command::Calibrate {
            camera,
            points,
            out,
            fit_height,
        } => calibrate(camera, points, out, *fit_height),
        Command::Bev(args) => bev::bev(args),
        Command::Mosaic(m) => mosaic::execute(m),
        Command::Sim(s) => sim::execute(s),
    }
}

fn mono(camera: &Path, p: PixelPoint, calib: Option<&Path>, warnings: &mut Vec<String>) -> Result<Report, CliError> {
    let (k, pose) = load_camera(camera)?;
    let mut model = MonoRangingModel::new(k, pose);
    if let Some(path) = calib {
        model = model.with_corrections(CorrectionFile::load(path)?.correction());
    }
    let q = model.locate(p)?;
    let local = model.locate_local(p)?;
    let slant = model.slant_distance(p)?;
    let beta = model.depression_angle(p)?;
    let shallow = model.is_shallow(p)?;
    if shallow {
        warnings.push(format!(
            "depression {:.3} deg is below {:.3} deg; the estimate is unstable",
            beta.to_degrees(),
            model.shallow_threshold.to_degrees()
        ));
    }
    Ok(Report::new()
        .m("x_m", q.x)
        .m("y_m", q.y)
        .m("lateral_m", local.x)
        .m("longitudinal_m", local.y)
        .m("slant_m", slant)
        .deg("depression_deg", beta.to_degrees())
        .flag("shallow", shallow))
}

fn stereo(rig: &Path, pa: PixelPoint, pb: PixelPoint) -> Result<Report, CliError> {
    let rig = RigFile::load(rig)?;
    let s = rig.range_target(pa, pb)?;
    Ok(Report::new()
        .m("dist_a_m", s.dist_a)
        .m("dist_b_m", s.dist_b)
        .m("target_x_m", s.target.x)
        .m("target_y_m", s.target.y)
        .deg("alpha_deg", s.alpha.to_degrees())
        .deg("beta_deg", s.beta.to_degrees())
        .deg("gamma_deg", s.gamma.to_degrees())
        .m("baseline_m", rig.baseline))
}

fn sensitivity(height: f64, lo: f64, hi: f64, step: f64, out: Option<&Path>) -> Result<Report, CliError> {
    let curve = sensitivity_sweep(
        height,
        AngleDeg(lo).to_rad(),
        AngleDeg(hi).to_rad(),
        AngleDeg(step).to_rad(),
    )
    .map_err(|e| match e {
        RangingError::InvalidRange(m) => CliError::Usage(format!("InvalidRange: {m}")),
        e => e.into(),
    })?;
    let samples: Vec<_> = curve
        .samples
        .iter()
        .map(|(a, y)| json!({"alpha_deg": a.to_degrees(), "y_m": y}))
        .collect();
    let (first, last) = (curve.samples[0], curve.samples[curve.samples.len() - 1]);
    let mut report = Report::new()
        .m("height_m", height)
        .int("rows", curve.samples.len())
        .deg("first_alpha_deg", first.0.to_degrees())
        .m("first_y_m", first.1)
        .deg("last_alpha_deg", last.0.to_degrees())
        .m("last_y_m", last.1);
    match out {
        Some(path) => {
            write(path, &curve.to_csv())?;
            report = report.text("out", path.display().to_string());
        }
        None => report.body = Some(curve.to_csv()),
    }
    Ok(report.extra("samples", samples.into()))
}

fn calibrate(camera: &Path, points: &Path, out: &Path, fit_height: bool) -> Result<Report, CliError> {
    let (k, pose) = load_camera(camera)?;
    let obs = parse_control_points(&read(points)?)
        .map_err(|e| CliError::domain("InvalidControlFile", format!("{}: {e}", points.display())))?;
    let options = CalibrationOptions {
        fit_height,
        ..Default::default()
    };
    let fit = fit_calibration(&k, &pose, &obs, &options)?;
    let c = fit.correction;
    let file = CorrectionFile {
        delta_pitch_deg: c.delta_pitch.to_degrees(),
        delta_u0_px: c.delta_u0,
        delta_v0_px: c.delta_v0,
        delta_height_m: c.delta_height,
        rms_m: Some(fit.rms),
    };
    write(
        out,
        &(serde_json::to_string_pretty(&file).expect("plain data serializes") + "\n"),
    )?;
    let mut report = Report::new()
        .deg("delta_pitch_deg", file.delta_pitch_deg)
        .px("delta_u0_px", c.delta_u0)
        .px("delta_v0_px", c.delta_v0);
    if fit_height {
        report = report.m("delta_height_m", c.delta_height);
    }
    Ok(report
        .m("rms_m", fit.rms)
        .int("points", obs.len())
        .int("iterations", fit.iterations)
        .text("out", out.display().to_string()))
}
