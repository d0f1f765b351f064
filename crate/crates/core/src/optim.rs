//! Damped nonlinear least squares (Levenberg–Marquardt) shared by the
//! calibration fit and the mosaic bundle adjustment.
//!
//! Problems hand the driver a linearized normal system per iteration. Two
//! system types are provided: a dense one and a block-sparse one whose
//! damped solve runs a right-looking block Cholesky over the nonzero block
//! pattern, falling back to a dense factorization for small block counts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

/// Robust loss applied to residual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RobustLoss {
    #[default]
    None,
    Huber {
        delta: f64,
    },
}

impl RobustLoss {
    pub fn huber() -> Self {
        RobustLoss::Huber { delta: 2.0 }
    }

    /// Loss value for a residual block with squared norm `sq`.
    pub fn rho(&self, sq: f64) -> f64 {
        match *self {
            RobustLoss::None => sq,
            RobustLoss::Huber { delta } => {
                if sq <= delta * delta {
                    sq
                } else {
                    2.0 * delta * sq.sqrt() - delta * delta
                }
            }
        }
    }

    /// IRLS weight for a residual block with squared norm `sq`.
    pub fn weight(&self, sq: f64) -> f64 {
        match *self {
            RobustLoss::None => 1.0,
            RobustLoss::Huber { delta } => {
                if sq <= delta * delta {
                    1.0
                } else {
                    delta / sq.sqrt()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub cost_tolerance: f64,
    pub parameter_tolerance: f64,
    pub loss: RobustLoss,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_lambda: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            cost_tolerance: 1e-10,
            parameter_tolerance: 1e-10,
            loss: RobustLoss::None,
        }
    }
}

impl LmConfig {
    pub fn is_valid(&self) -> bool {
        let loss_ok = match self.loss {
            RobustLoss::None => true,
            RobustLoss::Huber { delta } => delta > 0.0,
        };
        self.max_iterations > 0
            && self.initial_lambda > 0.0
            && self.lambda_up > 1.0
            && self.lambda_down > 0.0
            && self.lambda_down < 1.0
            && self.cost_tolerance > 0.0
            && self.parameter_tolerance > 0.0
            && loss_ok
    }
}

/// A linearized normal system `H δ = -g` supporting Marquardt damping.
pub trait DampedSystem {
    fn dim(&self) -> usize;
    fn gradient(&self) -> &DVector<f64>;
    /// Solves `(H + λ diag(H)) δ = -g`.
    fn solve_damped(&self, lambda: f64) -> Option<DVector<f64>>;
}

pub trait LeastSquaresProblem {
    type Params: Clone;
    type System: DampedSystem;

    /// Total (robustified) cost at `x`.
    fn cost(&self, x: &Self::Params) -> f64;
    /// Cost and normal system at `x`.
    fn linearize(&self, x: &Self::Params) -> (f64, Self::System);
    /// Applies a step in the local parameterization.
    fn retract(&self, x: &Self::Params, delta: &DVector<f64>) -> Self::Params;
    /// Magnitude of the parameter vector, used by the step-size test.
    fn param_scale(&self, x: &Self::Params) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    CostTolerance,
    ParameterTolerance,
    ZeroCost,
    /// Damping grew without finding a descent step; the point is stationary
    /// to working precision.
    Stationary,
    MaxIterations,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LmOutcome<P> {
    pub params: P,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Cost before the first step followed by the cost after every accepted step.
    pub cost_trace: Vec<f64>,
}

const MAX_LAMBDA: f64 = 1e32;

pub fn levenberg_marquardt<P: LeastSquaresProblem>(
    problem: &P,
    x0: P::Params,
    config: &LmConfig,
) -> LmOutcome<P::Params> {
    let mut x = x0;
    let mut lambda = config.initial_lambda;
    let initial_cost = problem.cost(&x);
    let mut cost = initial_cost;
    let mut trace = vec![cost];
    let mut iterations = 0;

    let finish = |x, cost, iterations, termination: Termination, trace| LmOutcome {
        params: x,
        initial_cost,
        final_cost: cost,
        iterations,
        converged: !matches!(termination, Termination::MaxIterations | Termination::NonFinite),
        termination,
        cost_trace: trace,
    };

    if !cost.is_finite() {
        return finish(x, cost, 0, Termination::NonFinite, trace);
    }

    while iterations < config.max_iterations {
        if cost <= 1e-30 {
            return finish(x, cost, iterations, Termination::ZeroCost, trace);
        }
        iterations += 1;
        let (_, system) = problem.linearize(&x);
        loop {
            if lambda > MAX_LAMBDA {
                return finish(x, cost, iterations, Termination::Stationary, trace);
            }
            let Some(delta) = system.solve_damped(lambda) else {
                lambda *= config.lambda_up;
                continue;
            };
            if !delta.iter().all(|d| d.is_finite()) {
                lambda *= config.lambda_up;
                continue;
            }
            let candidate = problem.retract(&x, &delta);
            let new_cost = problem.cost(&candidate);
            if new_cost.is_finite() && new_cost <= cost {
                let decrease = cost - new_cost;
                let step = delta.norm();
                let scale = problem.param_scale(&x);
                x = candidate;
                cost = new_cost;
                trace.push(cost);
                lambda = (lambda * config.lambda_down).max(1e-15);
                if decrease <= config.cost_tolerance * cost.max(f64::MIN_POSITIVE) {
                    return finish(x, cost, iterations, Termination::CostTolerance, trace);
                }
                if step <= config.parameter_tolerance * (scale + config.parameter_tolerance) {
                    return finish(x, cost, iterations, Termination::ParameterTolerance, trace);
                }
                break;
            }
            lambda *= config.lambda_up;
        }
    }
    finish(x, cost, iterations, Termination::MaxIterations, trace)
}

fn damping(d: f64) -> f64 {
    // unobserved parameters still get a positive pivot
    d.max(1e-12)
}

/// Dense normal system.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

impl DenseSystem {
    /// Builds `JᵀJ`, `Jᵀr` from a stacked Jacobian and residual vector.
    pub fn from_jacobian(jacobian: &DMatrix<f64>, residuals: &DVector<f64>) -> Self {
        Self {
            hessian: jacobian.tr_mul(jacobian),
            gradient: jacobian.tr_mul(residuals),
        }
    }
}

impl DampedSystem for DenseSystem {
    fn dim(&self) -> usize {
        self.gradient.len()
    }

    fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    fn solve_damped(&self, lambda: f64) -> Option<DVector<f64>> {
        let mut a = self.hessian.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda * damping(self.hessian[(i, i)]);
        }
        let chol = a.cholesky()?;
        Some(-chol.solve(&self.gradient))
    }
}

/// Symmetric block-sparse normal system with `N×N` blocks.
///
/// Only the lower triangle is stored: `lower[j]` maps row block `i >= j` to
/// block `(i, j)`.
#[derive(Debug, Clone)]
pub struct BlockSparseSystem<const N: usize> {
    lower: Vec<BTreeMap<usize, SMatrix<f64, N, N>>>,
    gradient: DVector<f64>,
}

/// Below this many blocks the damped solve uses a dense factorization.
pub const DENSE_FALLBACK_BLOCKS: usize = 10;

impl<const N: usize> BlockSparseSystem<N> {
    pub fn new(blocks: usize) -> Self {
        let lower = (0..blocks)
            .map(|j| {
                let mut m = BTreeMap::new();
                m.insert(j, SMatrix::<f64, N, N>::zeros());
                m
            })
            .collect();
        Self {
            lower,
            gradient: DVector::zeros(blocks * N),
        }
    }

    pub fn blocks(&self) -> usize {
        self.lower.len()
    }

    /// Number of stored lower-triangle blocks (including the diagonal).
    pub fn stored_blocks(&self) -> usize {
        self.lower.iter().map(BTreeMap::len).sum()
    }

    /// Accumulates `Jiᵀ Jj` into block `(i, j)`; pass each unordered pair once
    /// with `i != j`, or the diagonal with `i == j`.
    pub fn add_block(&mut self, i: usize, j: usize, block: &SMatrix<f64, N, N>) {
        if i >= j {
            *self.lower[j].entry(i).or_insert_with(SMatrix::zeros) += block;
        } else {
            *self.lower[i].entry(j).or_insert_with(SMatrix::zeros) += block.transpose();
        }
    }

    pub fn add_gradient(&mut self, i: usize, g: &SVector<f64, N>) {
        let mut seg = self.gradient.fixed_rows_mut::<N>(i * N);
        seg += g;
    }

    pub fn to_dense(&self) -> DenseSystem {
        let n = self.lower.len() * N;
        let mut h = DMatrix::zeros(n, n);
        for (j, col) in self.lower.iter().enumerate() {
            for (&i, b) in col {
                h.fixed_view_mut::<N, N>(i * N, j * N).copy_from(b);
                if i != j {
                    h.fixed_view_mut::<N, N>(j * N, i * N).copy_from(&b.transpose());
                }
            }
        }
        DenseSystem {
            hessian: h,
            gradient: self.gradient.clone(),
        }
    }

    pub fn solve_damped_dense(&self, lambda: f64) -> Option<DVector<f64>> {
        self.to_dense().solve_damped(lambda)
    }

    pub fn solve_damped_sparse(&self, lambda: f64) -> Option<DVector<f64>> {
        let n = self.lower.len();
        let mut cols = self.lower.clone();
        for (j, col) in cols.iter_mut().enumerate() {
            let d = col.get_mut(&j).expect("diagonal block");
            for k in 0..N {
                let v = self.lower[j][&j][(k, k)];
                d[(k, k)] += lambda * damping(v);
            }
        }

        // right-looking block Cholesky; cols[k] ends up holding L(:, k)
        let mut diag_l: Vec<SMatrix<f64, N, N>> = Vec::with_capacity(n);
        for k in 0..n {
            let akk = cols[k][&k];
            let lkk = akk.cholesky()?.l();
            let rows: Vec<usize> = cols[k].range(k + 1..).map(|(&i, _)| i).collect();
            let mut lik = Vec::with_capacity(rows.len());
            for &i in &rows {
                let a = cols[k][&i];
                let l = lkk.solve_lower_triangular(&a.transpose())?.transpose();
                lik.push(l);
            }
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in rows.iter().enumerate().take(a + 1) {
                    let update = lik[a] * lik[b].transpose();
                    *cols[j].entry(i).or_insert_with(SMatrix::zeros) -= update;
                }
            }
            for (l, &i) in lik.into_iter().zip(&rows) {
                cols[k].insert(i, l);
            }
            cols[k].insert(k, lkk);
            diag_l.push(lkk);
        }

        // L y = -g
        let mut y: Vec<SVector<f64, N>> = (0..n)
            .map(|k| -self.gradient.fixed_rows::<N>(k * N).into_owned())
            .collect();
        for k in 0..n {
            let yk = diag_l[k].solve_lower_triangular(&y[k])?;
            for (&i, l) in cols[k].range(k + 1..) {
                y[i] -= l * yk;
            }
            y[k] = yk;
        }
        // Lᵀ x = y
        for k in (0..n).rev() {
            let mut rhs = y[k];
            for (&i, l) in cols[k].range(k + 1..) {
                rhs -= l.transpose() * y[i];
            }
            y[k] = diag_l[k].transpose().solve_upper_triangular(&rhs)?;
        }
        let mut out = DVector::zeros(n * N);
        for (k, yk) in y.iter().enumerate() {
            out.fixed_rows_mut::<N>(k * N).copy_from(yk);
        }
        Some(out)
    }
}

impl<const N: usize> DampedSystem for BlockSparseSystem<N> {
    fn dim(&self) -> usize {
        self.gradient.len()
    }

    fn gradient(&self) -> &DVector<f64> {
        &self.gradient
    }

    fn solve_damped(&self, lambda: f64) -> Option<DVector<f64>> {
        if self.lower.len() < DENSE_FALLBACK_BLOCKS {
            self.solve_damped_dense(lambda)
        } else {
            self.solve_damped_sparse(lambda)
        }
    }
}
