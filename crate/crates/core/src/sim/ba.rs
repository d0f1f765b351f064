use rand::Rng;

use super::{NoiseModel, SceneSpec, SimError};
use crate::geometry::{PixelPoint, PlanePoint};
use crate::homography::{bev_from_camera, Homography};
use crate::mono::MonoRangingModel;
use crate::mosaic::{check_structure, CorrespondenceGraph, Edge, GraphImage, HoldoutPoint, MosaicError};

/// Synthetic mosaic problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct BaScenario {
    pub graph: CorrespondenceGraph,
    /// True image → plane homographies, indexed like `graph.images`.
    pub truth: Vec<Homography>,
    /// Surveyed points withheld from the graph.
    pub holdout: Vec<HoldoutPoint>,
}

impl BaScenario {
    /// RMS over a 10 x 10 pixel grid of the plane-frame distance between
    /// `h` and the truth of image `i`, divided by the RMS radius of the
    /// true footprint of that grid.
    pub fn relative_error(&self, i: usize, h: &Homography, size: [f64; 2]) -> f64 {
        let t = &self.truth[i];
        let mut pts = Vec::with_capacity(100);
        for a in 0..10 {
            for b in 0..10 {
                let p = PixelPoint::new((a as f64 + 0.5) / 10.0 * size[0], (b as f64 + 0.5) / 10.0 * size[1]);
                pts.push((t.apply_pixel(p), h.apply_pixel(p)));
            }
        }
        let n = pts.len() as f64;
        let mut err = 0.0;
        let (mut cx, mut cy) = (0.0, 0.0);
        for (a, b) in &pts {
            let (Ok(a), Ok(b)) = (a, b) else {
                return f64::INFINITY;
            };
            err += a.distance(b).powi(2);
            cx += a.x / n;
            cy += a.y / n;
        }
        let c = PlanePoint::new(cx, cy);
        let spread: f64 = pts
            .iter()
            .map(|(a, _)| a.as_ref().map_or(0.0, |a| a.distance(&c).powi(2)))
            .sum();
        (err / spread).sqrt()
    }
}

fn image_id(i: usize) -> String {
    format!("img{i:02}")
}

/// Well-spread pixel positions: inset corners, center, edge midpoints.
fn spread_pixel(k: usize, size: [f64; 2], rng: &mut impl Rng) -> PixelPoint {
    const FIXED: [(f64, f64); 9] = [
        (0.1, 0.1),
        (0.9, 0.1),
        (0.9, 0.9),
        (0.1, 0.9),
        (0.5, 0.5),
        (0.5, 0.1),
        (0.9, 0.5),
        (0.5, 0.9),
        (0.1, 0.5),
    ];
    let (a, b) = FIXED
        .get(k)
        .copied()
        .unwrap_or_else(|| (rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)));
    PixelPoint::new(a * size[0], b * size[1])
}

/// Builds a correspondence graph over the scene's cameras.
///
/// Pixels come from the nominal cameras; the graph records poses perturbed
/// by the noise model, standing in for reported installation data. Edges
/// join every pair whose footprints share points; matches and controls
/// carry pixel noise, matches also carry outliers. Controls go to the
/// first and last camera.
pub fn generate_ba_graph(spec: &SceneSpec, noise: &NoiseModel) -> Result<BaScenario, SimError> {
    noise.validate()?;
    let cams = spec.cameras()?;
    let n = cams.len();
    let mut rng = noise.trial_rng(0);
    let clean_noise = NoiseModel {
        outlier_fraction: 0.0,
        ..*noise
    };

    let mut images = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut bbox = Vec::with_capacity(n);
    for (i, (k, pose)) in cams.iter().enumerate() {
        let reported = noise.perturb_pose(pose, &mut rng);
        images.push(GraphImage::new(image_id(i)).with_camera(*k, reported));
        let h = bev_from_camera(k, pose, 1.0).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        truth.push(h);
        let [w, hh] = spec.image_size_of(k);
        let model = MonoRangingModel::new(*k, *pose);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (u, v) in [(0.0, 0.0), (w, 0.0), (w, hh), (0.0, hh)] {
            let q = model.locate(PixelPoint::new(u, v)).map_err(|e| {
                SimError::InvalidSpec(format!(
                    "camera {i} footprint is unbounded ({e}); BA scenes need the horizon out of view"
                ))
            })?;
            lo = [lo[0].min(q.x), lo[1].min(q.y)];
            hi = [hi[0].max(q.x), hi[1].max(q.y)];
        }
        bbox.push((lo, hi));
    }

    let mut graph = CorrespondenceGraph::new(images)?;
    let visible = |i: usize, q: PlanePoint| {
        let (k, pose) = cams[i];
        MonoRangingModel::new(k, pose)
            .project_to_pixel(q)
            .ok()
            .filter(|p| spec.in_image(&k, *p))
    };
    let m = spec.matches_per_edge;
    for i in 0..n {
        for j in i + 1..n {
            let lo = [bbox[i].0[0].max(bbox[j].0[0]), bbox[i].0[1].max(bbox[j].0[1])];
            let hi = [bbox[i].1[0].min(bbox[j].1[0]), bbox[i].1[1].min(bbox[j].1[1])];
            if lo[0] >= hi[0] || lo[1] >= hi[1] {
                continue;
            }
            let mut matches = Vec::with_capacity(m);
            for _ in 0..50 * m {
                if matches.len() == m {
                    break;
                }
                let q = PlanePoint::new(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]));
                if let (Some(pa), Some(pb)) = (visible(i, q), visible(j, q)) {
                    matches.push((noise.corrupt_pixel(pa, &mut rng), noise.corrupt_pixel(pb, &mut rng)));
                }
            }
            if matches.len() >= 4 {
                graph.add_edge(Edge {
                    a: image_id(i),
                    b: image_id(j),
                    matches,
                })?;
            }
        }
    }

    let holders: Vec<usize> = if n == 1 { vec![0] } else { vec![0, n - 1] };
    let per = spec.control_point_count.div_ceil(holders.len());
    let mut left = spec.control_point_count;
    for &i in &holders {
        let size = spec.image_size_of(&cams[i].0);
        for c in 0..per.min(left) {
            let p = spread_pixel(c, size, &mut rng);
            let q = truth[i]
                .apply_pixel(p)
                .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
            graph.add_control(&image_id(i), clean_noise.corrupt_pixel(p, &mut rng), q)?;
        }
        left -= per.min(left);
    }

    let mut holdout = Vec::with_capacity(spec.holdout_count);
    for _ in 0..spec.holdout_count {
        let i = rng.random_range(0..n);
        let size = spec.image_size_of(&cams[i].0);
        let p = PixelPoint::new(
            rng.random_range(0.1..0.9) * size[0],
            rng.random_range(0.1..0.9) * size[1],
        );
        let q = truth[i]
            .apply_pixel(p)
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        holdout.push(HoldoutPoint::new(
            image_id(i),
            clean_noise.corrupt_pixel(p, &mut rng),
            q,
        ));
    }

    match check_structure(&graph) {
        Err(MosaicError::SolveDisconnected(msg)) => return Err(SimError::NoOverlap(msg)),
        Err(MosaicError::NoGauge(_)) | Ok(_) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(BaScenario { graph, truth, holdout })
}
