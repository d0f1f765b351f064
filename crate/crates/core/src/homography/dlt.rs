use nalgebra::{DMatrix, Matrix3, Point2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Correspondence, EstimationReport, Homography, HomographyError};
use crate::geometry::{PixelPoint, PlanePoint};

/// Ambiguity threshold on the gap between the two smallest singular values.
const DEGENERACY_EPS: f64 = 1e-10;
/// Gap below which a solution is flagged as weakly conditioned.
const CONDITION_WARNING_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    /// Inlier threshold on transfer error, in target-frame units.
    pub threshold: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            confidence: 0.999,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

/// Similarity taking the points to zero centroid and mean radius √2.
fn hartley_transform(pts: &[Point2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (cx, cy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    let s = if mean > 0.0 {
        std::f64::consts::SQRT_2 / mean
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    Point2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

struct DltSolution {
    h: Homography,
    /// `(σ₈ - σ₉) / σ₁` of the normalized system.
    gap: f64,
}

/// Normalized DLT on raw point pairs.
fn dlt(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<DltSolution, HomographyError> {
    let n = src.len();
    if n < 4 {
        return Err(HomographyError::InsufficientPoints(n));
    }
    let ts = hartley_transform(src);
    let td = hartley_transform(dst);

    // pad to 9 rows so the SVD exposes the full right null space
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for k in 0..n {
        let s = transform(&ts, &src[k]);
        let d = transform(&td, &dst[k]);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(HomographyError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = |k: usize| svd.singular_values[order[k]];
    let largest = sv(0);
    if !(largest > 0.0) {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let gap = (sv(7) - sv(8)) / largest;
    if gap <= DEGENERACY_EPS {
        return Err(HomographyError::DegenerateConfiguration);
    }
    let null = v_t.row(order[8]);
    let hn = Matrix3::from_fn(|r, c| null[3 * r + c]);
    let td_inv = td.try_inverse().ok_or(HomographyError::DegenerateConfiguration)?;
    let h = Homography::new(td_inv * hn * ts).map_err(|e| match e {
        HomographyError::Singular => HomographyError::DegenerateConfiguration,
        other => other,
    })?;
    Ok(DltSolution { h, gap })
}

fn split(corrs: &[Correspondence]) -> (Vec<Point2<f64>>, Vec<Point2<f64>>) {
    corrs
        .iter()
        .map(|c| (Point2::new(c.src.u, c.src.v), c.dst.point()))
        .unzip()
}

fn transfer_error(h: &Homography, s: &Point2<f64>, d: &Point2<f64>) -> f64 {
    match h.apply(*s) {
        Ok(p) => (p - d).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn report(h: &Homography, src: &[Point2<f64>], dst: &[Point2<f64>], gap: f64) -> EstimationReport {
    let sq: f64 = src.iter().zip(dst).map(|(s, d)| transfer_error(h, s, d).powi(2)).sum();
    EstimationReport {
        inlier_count: src.len(),
        rms_error: (sq / src.len() as f64).sqrt(),
        condition_warning: gap < CONDITION_WARNING_EPS,
    }
}

/// Estimates the homography mapping `src` to `dst` by Hartley-normalized DLT,
/// optionally inside RANSAC.
pub fn estimate_dlt(
    corrs: &[Correspondence],
    robust: Option<&RansacConfig>,
) -> Result<(Homography, EstimationReport), HomographyError> {
    if corrs.len() < 4 {
        return Err(HomographyError::InsufficientPoints(corrs.len()));
    }
    if !corrs
        .iter()
        .all(|c| c.src.is_finite() && c.dst.point().iter().all(|v| v.is_finite()))
    {
        return Err(HomographyError::NonFinite);
    }
    let (src, dst) = split(corrs);
    match robust {
        None => {
            let sol = dlt(&src, &dst)?;
            let rep = report(&sol.h, &src, &dst, sol.gap);
            Ok((sol.h, rep))
        }
        Some(cfg) => ransac(&src, &dst, cfg),
    }
}

fn inliers(h: &Homography, src: &[Point2<f64>], dst: &[Point2<f64>], threshold: f64) -> Vec<usize> {
    (0..src.len())
        .filter(|&i| transfer_error(h, &src[i], &dst[i]) < threshold)
        .collect()
}

fn ransac(
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
    cfg: &RansacConfig,
) -> Result<(Homography, EstimationReport), HomographyError> {
    let n = src.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Vec<usize> = Vec::new();
    let mut needed = cfg.max_iterations;
    let mut iter = 0;
    while iter < needed.min(cfg.max_iterations) {
        iter += 1;
        let idx = sample(&mut rng, n, 4);
        let s: Vec<_> = idx.iter().map(|i| src[i]).collect();
        let d: Vec<_> = idx.iter().map(|i| dst[i]).collect();
        let Ok(sol) = dlt(&s, &d) else { continue };
        let set = inliers(&sol.h, src, dst, cfg.threshold);
        if set.len() > best.len() {
            best = set;
            let w = best.len() as f64 / n as f64;
            let p_fail = 1.0 - w.powi(4);
            needed = if p_fail <= 0.0 {
                iter
            } else {
                let k = (1.0 - cfg.confidence).ln() / p_fail.ln();
                if k.is_finite() {
                    k.ceil().max(1.0) as usize
                } else {
                    cfg.max_iterations
                }
            };
        }
    }
    // a minimal sample always agrees with itself; demand outside support
    if best.len() < n.min(5) {
        return Err(HomographyError::NoConsensus(best.len()));
    }

    // refit on the consensus set until it stops changing
    let mut set = best;
    let mut sol = None;
    for _ in 0..5 {
        let s: Vec<_> = set.iter().map(|&i| src[i]).collect();
        let d: Vec<_> = set.iter().map(|&i| dst[i]).collect();
        let fit = dlt(&s, &d)?;
        let next = inliers(&fit.h, src, dst, cfg.threshold);
        let done = next == set;
        sol = Some(fit);
        if done || next.len() < 4 {
            break;
        }
        set = next;
    }
    let sol = sol.expect("at least one refit");
    let s: Vec<_> = set.iter().map(|&i| src[i]).collect();
    let d: Vec<_> = set.iter().map(|&i| dst[i]).collect();
    let rep = report(&sol.h, &s, &d, sol.gap);
    Ok((sol.h, rep))
}

/// Image → metric plane homography from surveyed control points.
pub fn metric_rectify(
    points: &[(PixelPoint, PlanePoint)],
    robust: Option<&RansacConfig>,
) -> Result<(Homography, EstimationReport), HomographyError> {
    let corrs: Vec<_> = points.iter().map(|&(p, q)| Correspondence::to_plane(p, q)).collect();
    estimate_dlt(&corrs, robust)
}
