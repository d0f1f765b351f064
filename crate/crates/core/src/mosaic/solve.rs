use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::init::initialize_indexed;
use super::{BaConfig, BaSolution, CorrespondenceGraph, EdgeRms, MosaicError};
use crate::geometry::{PixelPoint, PlanePoint};
use crate::homography::{normalize_matrix, Homography, INFINITY_EPS};
use crate::optim::{levenberg_marquardt, BlockSparseSystem, LeastSquaresProblem, RobustLoss, Termination};
use crate::par::par_map;

type Jac = SMatrix<f64, 2, 8>;
type Block = SMatrix<f64, 8, 8>;
type Grad = SVector<f64, 8>;

/// Plane-frame point `π(H p)` and its Jacobian with respect to the 8-vector
/// local update `H ← (I + Δ) H`, `Δ[2][2] = 0`, taken row-major.
pub fn edge_residual_jacobian(h: &Matrix3<f64>, p: PixelPoint) -> Option<(Vector2<f64>, Jac)> {
    let x = h * Vector3::new(p.u, p.v, 1.0);
    if x.z.abs() < INFINITY_EPS {
        return None;
    }
    let iz = 1.0 / x.z;
    let pi = Vector2::new(x.x * iz, x.y * iz);
    // dπ/dx columns
    let dpi = [
        Vector2::new(iz, 0.0),
        Vector2::new(0.0, iz),
        Vector2::new(-pi.x * iz, -pi.y * iz),
    ];
    let mut j = Jac::zeros();
    for k in 0..8 {
        let (r, c) = (k / 3, k % 3);
        j.set_column(k, &(dpi[r] * x[c]));
    }
    Some((pi, j))
}

fn project(h: &Matrix3<f64>, p: PixelPoint) -> Option<Vector2<f64>> {
    let x = h * Vector3::new(p.u, p.v, 1.0);
    (x.z.abs() >= INFINITY_EPS).then(|| Vector2::new(x.x / x.z, x.y / x.z))
}

/// Normal-equation contribution of one edge or one control.
struct Terms {
    cost: f64,
    a: usize,
    b: Option<usize>,
    haa: Block,
    hbb: Block,
    hab: Block,
    ga: Grad,
    gb: Grad,
}

impl Terms {
    fn new(a: usize, b: Option<usize>) -> Self {
        Self {
            cost: 0.0,
            a,
            b,
            haa: Block::zeros(),
            hbb: Block::zeros(),
            hab: Block::zeros(),
            ga: Grad::zeros(),
            gb: Grad::zeros(),
        }
    }
}

struct BaProblem<'a> {
    g: &'a CorrespondenceGraph,
    /// Parameter block of each image; `None` when frozen.
    free: Vec<Option<usize>>,
    n_free: usize,
    edge_scale: f64,
    control_scale: f64,
    loss: RobustLoss,
}

impl BaProblem<'_> {
    fn edge_terms(&self, hs: &[Matrix3<f64>], e: usize, jac: bool) -> Option<Terms> {
        let (a, b, matches) = &self.g.edges[e];
        let mut t = Terms::new(*a, Some(*b));
        for &(p, q) in matches {
            let (pa, ja) = edge_residual_jacobian(&hs[*a], p)?;
            let (pb, jb) = edge_residual_jacobian(&hs[*b], q)?;
            let r = (pa - pb) * self.edge_scale;
            let sq = r.norm_squared();
            if !sq.is_finite() {
                return None;
            }
            t.cost += self.loss.rho(sq);
            if jac {
                let w = self.loss.weight(sq);
                let ja = ja * self.edge_scale;
                let jb = jb * -self.edge_scale;
                t.haa += ja.transpose() * ja * w;
                t.hbb += jb.transpose() * jb * w;
                t.hab += ja.transpose() * jb * w;
                t.ga += ja.transpose() * r * w;
                t.gb += jb.transpose() * r * w;
            }
        }
        Some(t)
    }

    fn control_terms(&self, hs: &[Matrix3<f64>], c: usize, jac: bool) -> Option<Terms> {
        let ctl = &self.g.controls[c];
        let mut t = Terms::new(ctl.image, None);
        let (pa, ja) = edge_residual_jacobian(&hs[ctl.image], ctl.pixel)?;
        let r = (pa - Vector2::new(ctl.world.x, ctl.world.y)) * self.control_scale;
        t.cost = r.norm_squared();
        if !t.cost.is_finite() {
            return None;
        }
        if jac {
            let ja = ja * self.control_scale;
            t.haa = ja.transpose() * ja;
            t.ga = ja.transpose() * r;
        }
        Some(t)
    }

    fn terms(&self, hs: &[Matrix3<f64>], jac: bool) -> Option<Vec<Terms>> {
        let ne = self.g.edges.len();
        let all = par_map(ne + self.g.controls.len(), |k| {
            if k < ne {
                self.edge_terms(hs, k, jac)
            } else {
                self.control_terms(hs, k - ne, jac)
            }
        });
        all.into_iter().collect()
    }
}

impl LeastSquaresProblem for BaProblem<'_> {
    type Params = Vec<Matrix3<f64>>;
    type System = BlockSparseSystem<8>;

    fn cost(&self, hs: &Vec<Matrix3<f64>>) -> f64 {
        match self.terms(hs, false) {
            // summed in a fixed order
            Some(ts) => ts.iter().map(|t| t.cost).sum(),
            None => f64::INFINITY,
        }
    }

    fn linearize(&self, hs: &Vec<Matrix3<f64>>) -> (f64, BlockSparseSystem<8>) {
        let mut sys = BlockSparseSystem::new(self.n_free);
        let Some(ts) = self.terms(hs, true) else {
            return (f64::INFINITY, sys);
        };
        let mut cost = 0.0;
        for t in &ts {
            cost += t.cost;
            let fa = self.free[t.a];
            if let Some(i) = fa {
                sys.add_block(i, i, &t.haa);
                sys.add_gradient(i, &t.ga);
            }
            if let Some(b) = t.b {
                if let Some(j) = self.free[b] {
                    sys.add_block(j, j, &t.hbb);
                    sys.add_gradient(j, &t.gb);
                    if let Some(i) = fa {
                        sys.add_block(i, j, &t.hab);
                    }
                }
            }
        }
        (cost, sys)
    }

    fn retract(&self, hs: &Vec<Matrix3<f64>>, delta: &DVector<f64>) -> Vec<Matrix3<f64>> {
        hs.iter()
            .zip(&self.free)
            .map(|(h, f)| match f {
                None => *h,
                Some(k) => {
                    let d = delta.rows(8 * k, 8);
                    let upd = Matrix3::new(1.0 + d[0], d[1], d[2], d[3], 1.0 + d[4], d[5], d[6], d[7], 1.0);
                    normalize_matrix(&(upd * h))
                }
            })
            .collect()
    }

    fn param_scale(&self, _hs: &Vec<Matrix3<f64>>) -> f64 {
        // every homography has unit norm
        (self.n_free as f64).sqrt()
    }
}

/// Plane point of `p` under `h` and the local area scale (plane units² per
/// pixel²) there.
fn map_with_scale(h: &Matrix3<f64>, p: PixelPoint) -> Option<(Vector2<f64>, f64)> {
    let x = h * Vector3::new(p.u, p.v, 1.0);
    if x.z.abs() < INFINITY_EPS {
        return None;
    }
    let (px, py) = (x.x / x.z, x.y / x.z);
    let j00 = (h[(0, 0)] - px * h[(2, 0)]) / x.z;
    let j01 = (h[(0, 1)] - px * h[(2, 1)]) / x.z;
    let j10 = (h[(1, 0)] - py * h[(2, 0)]) / x.z;
    let j11 = (h[(1, 1)] - py * h[(2, 1)]) / x.z;
    Some((Vector2::new(px, py), (j00 * j11 - j01 * j10).abs()))
}

/// Pixel reprojection RMS of an edge. Each match is placed on the plane
/// by averaging both mapped points, weighted by inverse area scale, and
/// reprojected into both images.
fn edge_rms(ha: &Homography, hb: &Homography, matches: &[(PixelPoint, PixelPoint)]) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    let (Ok(ia), Ok(ib)) = (ha.inverse(), hb.inverse()) else {
        return f64::INFINITY;
    };
    let mut sq = 0.0;
    for &(p, q) in matches {
        let (Some((xa, sa)), Some((xb, sb))) = (map_with_scale(ha.matrix(), p), map_with_scale(hb.matrix(), q)) else {
            return f64::INFINITY;
        };
        let (wa, wb) = (1.0 / sa, 1.0 / sb);
        let x = (xa * wa + xb * wb) / (wa + wb);
        let x = PixelPoint::new(x.x, x.y);
        match (project(ia.matrix(), x), project(ib.matrix(), x)) {
            (Some(ra), Some(rb)) => {
                sq += (ra - Vector2::new(p.u, p.v)).norm_squared();
                sq += (rb - Vector2::new(q.u, q.v)).norm_squared();
            }
            _ => return f64::INFINITY,
        }
    }
    (sq / (2 * matches.len()) as f64).sqrt()
}

/// Bundle adjustment of all non-anchored image → plane homographies.
///
/// A run that exhausts its iteration budget is still returned, with
/// `converged = false`.
pub fn solve(g: &CorrespondenceGraph, config: &BaConfig) -> Result<BaSolution, MosaicError> {
    if !config.is_valid() {
        return Err(MosaicError::InvalidConfig);
    }
    let init = initialize_indexed(g)?;
    let mut free = Vec::with_capacity(g.images.len());
    let mut n_free = 0;
    for im in &g.images {
        if im.anchor {
            free.push(None);
        } else {
            free.push(Some(n_free));
            n_free += 1;
        }
    }
    let problem = BaProblem {
        g,
        free,
        n_free,
        edge_scale: config.edge_weight.sqrt(),
        control_scale: config.control_weight.sqrt(),
        loss: config.lm.loss,
    };
    let x0: Vec<Matrix3<f64>> = init.iter().map(|h| *h.matrix()).collect();
    let out = if n_free == 0 {
        let c = problem.cost(&x0);
        crate::optim::LmOutcome {
            params: x0,
            initial_cost: c,
            final_cost: c,
            iterations: 0,
            converged: c.is_finite(),
            termination: if c.is_finite() {
                Termination::ZeroCost
            } else {
                Termination::NonFinite
            },
            cost_trace: vec![c],
        }
    } else {
        levenberg_marquardt(&problem, x0, &config.lm)
    };
    if out.termination == Termination::NonFinite || !out.final_cost.is_finite() {
        return Err(MosaicError::NumericalFailure("non-finite cost".into()));
    }

    let mut hs = Vec::with_capacity(g.images.len());
    for (i, m) in out.params.iter().enumerate() {
        if g.images[i].anchor {
            hs.push(init[i]);
        } else {
            hs.push(Homography::new(*m)?);
        }
    }
    let per_edge_rms = g
        .edges
        .iter()
        .map(|(a, b, m)| EdgeRms {
            a: g.images[*a].id.clone(),
            b: g.images[*b].id.clone(),
            rms_px: edge_rms(&hs[*a], &hs[*b], m),
        })
        .collect();
    let homographies = g
        .images
        .iter()
        .map(|im| im.id.clone())
        .zip(hs)
        .collect::<BTreeMap<_, _>>();

    Ok(BaSolution {
        homographies,
        initial_cost: out.initial_cost,
        final_cost: out.final_cost,
        iterations: out.iterations,
        converged: out.converged,
        termination: out.termination,
        cost_trace: out.cost_trace,
        per_edge_rms,
    })
}

/// A surveyed point withheld from the solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutPoint {
    pub image: String,
    pub pixel: PixelPoint,
    pub world: PlanePoint,
}

impl HoldoutPoint {
    pub fn new(image: impl Into<String>, pixel: PixelPoint, world: PlanePoint) -> Self {
        Self {
            image: image.into(),
            pixel,
            world,
        }
    }

    /// Parses an `image_id,u,v,X,Y` CSV.
    pub fn parse_csv(text: &str) -> Result<Vec<Self>, MosaicError> {
        #[derive(Deserialize)]
        struct Row {
            image_id: String,
            u: f64,
            v: f64,
            #[serde(rename = "X")]
            x: f64,
            #[serde(rename = "Y")]
            y: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        reader
            .deserialize::<Row>()
            .map(|r| {
                r.map(|r| Self::new(r.image_id, PixelPoint::new(r.u, r.v), PlanePoint::new(r.x, r.y)))
                    .map_err(|e| MosaicError::File(e.to_string()))
            })
            .collect()
    }

    pub fn write_csv(points: &[Self]) -> String {
        let mut out = String::from("image_id,u,v,X,Y\n");
        for p in points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.image, p.pixel.u, p.pixel.v, p.world.x, p.world.y
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// World-frame error per holdout point, in input order.
    pub errors: Vec<f64>,
    /// `None` for an empty holdout.
    pub rms: Option<f64>,
    pub max: Option<f64>,
}

/// World-frame errors of points that did not take part in the solve.
pub fn evaluate(solution: &BaSolution, holdout: &[HoldoutPoint]) -> Result<EvaluationReport, MosaicError> {
    let mut errors = Vec::with_capacity(holdout.len());
    for p in holdout {
        let h = solution
            .homographies
            .get(&p.image)
            .ok_or_else(|| MosaicError::UnknownImage(p.image.clone()))?;
        let q = h.apply_pixel(p.pixel)?;
        errors.push(q.distance(&p.world));
    }
    let (rms, max) = if errors.is_empty() {
        (None, None)
    } else {
        let ms = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
        (Some(ms.sqrt()), Some(errors.iter().copied().fold(0.0, f64::max)))
    };
    Ok(EvaluationReport { errors, rms, max })
}
