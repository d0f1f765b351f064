use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ErrorRecord, ErrorReport, NoiseModel, SceneSpec, SimError};
use crate::geometry::{direction_heading, CameraIntrinsics, CameraPose, PixelPoint, PlanePoint};
use crate::mono::MonoRangingModel;
use crate::par::par_map;
use crate::stereo::{column_for_bearing, StereoRig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraObservations {
    pub camera: usize,
    /// Index into the scene's point list.
    pub points: Vec<usize>,
    pub truth: Vec<PlanePoint>,
    pub observed: Vec<PixelPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub cameras: Vec<CameraObservations>,
    /// Point/camera pairs dropped as not visible.
    pub omitted: usize,
}

impl Observations {
    /// `camera,point,X,Y,u,v` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("camera,point,X,Y,u,v\n");
        for c in &self.cameras {
            for i in 0..c.points.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.camera, c.points[i], c.truth[i].x, c.truth[i].y, c.observed[i].u, c.observed[i].v
                ));
            }
        }
        out
    }
}

type Camera = (CameraIntrinsics, CameraPose);

/// Pinhole projection, `None` when behind the camera or off the image.
fn pinhole(spec: &SceneSpec, cam: &Camera, q: PlanePoint) -> Option<PixelPoint> {
    let p = MonoRangingModel::new(cam.0, cam.1).project_to_pixel(q).ok()?;
    spec.in_image(&cam.0, p).then_some(p)
}

/// Column from the bearing model, row from the pinhole model. Visibility
/// depends on the column only.
fn bearing_pixel(spec: &SceneSpec, cam: &Camera, q: PlanePoint) -> Option<PixelPoint> {
    let (k, pose) = cam;
    let bearing = direction_heading(q.x - pose.position.x, q.y - pose.position.y);
    let u = column_for_bearing(pose, k, bearing)?;
    let v = MonoRangingModel::new(*k, *pose)
        .project_to_pixel(q)
        .map_or(k.v0, |p| p.v);
    let [w, _] = spec.image_size_of(k);
    (0.0..=w).contains(&u).then_some(PixelPoint::new(u, v))
}

fn observe_trial(
    spec: &SceneSpec,
    cams: &[Camera],
    points: &[PlanePoint],
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
    project: impl Fn(&SceneSpec, &Camera, PlanePoint) -> Option<PixelPoint>,
) -> Observations {
    let mut out = Vec::with_capacity(cams.len());
    let mut omitted = 0;
    for (ci, (k, nominal)) in cams.iter().enumerate() {
        let actual = (*k, noise.perturb_pose(nominal, rng));
        let mut obs = CameraObservations {
            camera: ci,
            points: Vec::new(),
            truth: Vec::new(),
            observed: Vec::new(),
        };
        for (pi, &q) in points.iter().enumerate() {
            let clean = project(spec, &actual, q);
            // draws are consumed for every point so streams stay aligned
            let noisy = noise.corrupt_pixel(clean.unwrap_or(PixelPoint::new(0.0, 0.0)), rng);
            match clean {
                Some(_) => {
                    obs.points.push(pi);
                    obs.truth.push(q);
                    obs.observed.push(noisy);
                }
                None => omitted += 1,
            }
        }
        out.push(obs);
    }
    Observations { cameras: out, omitted }
}

/// One trial (trial 0) of noisy pinhole observations of every scene point.
pub fn generate_observations(spec: &SceneSpec, noise: &NoiseModel) -> Result<Observations, SimError> {
    noise.validate()?;
    let cams = spec.cameras()?;
    let points = spec.points(noise);
    let mut rng = noise.trial_rng(0);
    Ok(observe_trial(spec, &cams, &points, noise, &mut rng, pinhole))
}

fn merge(trials: usize, parts: Vec<(Vec<ErrorRecord>, usize, usize)>) -> ErrorReport {
    let mut records = Vec::new();
    let (mut omitted, mut failures) = (0, 0);
    for (r, o, f) in parts {
        records.extend(r);
        omitted += o;
        failures += f;
    }
    ErrorReport::new(trials, records, omitted, failures)
}

/// Monte-Carlo error of single-camera localization with the nominal
/// camera model.
pub fn evaluate_mono(spec: &SceneSpec, noise: &NoiseModel, trials: usize) -> Result<ErrorReport, SimError> {
    noise.validate()?;
    let cams = spec.cameras()?;
    let points = spec.points(noise);
    let parts = par_map(trials, |t| {
        let mut rng = noise.trial_rng(t as u64);
        let obs = observe_trial(spec, &cams, &points, noise, &mut rng, pinhole);
        let mut records = Vec::new();
        let mut failures = 0;
        for c in &obs.cameras {
            let (k, pose) = cams[c.camera];
            let model = MonoRangingModel::new(k, pose);
            for i in 0..c.points.len() {
                let truth = c.truth[i];
                match model.locate(c.observed[i]) {
                    Ok(est) => {
                        let abs = est.distance(&truth);
                        records.push(ErrorRecord {
                            trial: t,
                            camera: c.camera,
                            point: c.points[i],
                            truth,
                            abs_error: abs,
                            rel_error: abs / truth.distance(&pose.position),
                        });
                    }
                    Err(_) => failures += 1,
                }
            }
        }
        (records, obs.omitted, failures)
    });
    Ok(merge(trials, parts))
}

/// Monte-Carlo error of two-camera ranging. The scene must hold exactly
/// two placed cameras; columns follow the bearing model.
pub fn evaluate_stereo(spec: &SceneSpec, noise: &NoiseModel, trials: usize) -> Result<ErrorReport, SimError> {
    noise.validate()?;
    let cams = spec.cameras()?;
    if cams.len() != 2 {
        return Err(SimError::InvalidSpec(format!(
            "stereo needs exactly 2 cameras, got {}",
            cams.len()
        )));
    }
    let rig = StereoRig::from_positions(cams[0], cams[1]).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
    let points = spec.points(noise);
    let origin = cams[0].1.position;
    let parts = par_map(trials, |t| {
        let mut rng = noise.trial_rng(t as u64);
        let obs = observe_trial(spec, &cams, &points, noise, &mut rng, bearing_pixel);
        let (a, b) = (&obs.cameras[0], &obs.cameras[1]);
        let mut records = Vec::new();
        let (mut omitted, mut failures) = (0, 0);
        for (pi, &truth) in points.iter().enumerate() {
            let ia = a.points.iter().position(|&p| p == pi);
            let ib = b.points.iter().position(|&p| p == pi);
            let (Some(ia), Some(ib)) = (ia, ib) else {
                omitted += 1;
                continue;
            };
            match rig.range_target(a.observed[ia], b.observed[ib]) {
                Ok(sol) => {
                    let abs = sol.target.distance(&truth);
                    records.push(ErrorRecord {
                        trial: t,
                        camera: 0,
                        point: pi,
                        truth,
                        abs_error: abs,
                        rel_error: abs / truth.distance(&origin),
                    });
                }
                Err(_) => failures += 1,
            }
        }
        (records, omitted, failures)
    });
    Ok(merge(trials, parts))
}
