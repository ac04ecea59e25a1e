//! Gaussian-process surrogate: one independent Matérn-5/2 ARD regressor per
//! objective, fitted by maximizing the log marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignParams;
use crate::objectives::{ObjectiveVector, N_OBJECTIVES};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Jitter ladder tried, in order, when factorizing a kernel matrix.
const JITTER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-4, 1e3);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-6, 1e1);

/// Smallest target standard deviation used for standardization.
const MIN_TARGET_STD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("need at least 2 observations to fit, got {0}")]
    InsufficientData(usize),
    #[error("kernel matrix is not positive definite even with jitter {max_jitter:e}")]
    NumericalFailure { max_jitter: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self {
            lengthscales: vec![lengthscale; dim],
            signal_variance,
            noise_variance,
        }
    }

    /// Log-parameter vector `[ln l_1.., ln s2, ln n2]`.
    pub fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| l.ln())
            .chain([self.signal_variance.ln(), self.noise_variance.ln()])
            .collect()
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    fn log_bounds(dim: usize) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut b = vec![ln(LENGTHSCALE_BOUNDS); dim];
        b.push(ln(SIGNAL_VARIANCE_BOUNDS));
        b.push(ln(NOISE_VARIANCE_BOUNDS));
        b
    }
}

/// Matérn 5/2 covariance with one lengthscale per input dimension.
pub fn matern52(a: &[f64], b: &[f64], hyper: &GpHyperparams) -> f64 {
    let r = scaled_distance(a, b, &hyper.lengthscales);
    hyper.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
}

fn scaled_distance(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(lengthscales)
        .map(|((x, y), l)| {
            let d = (x - y) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn kernel_matrix(x: &[Vec<f64>], hyper: &GpHyperparams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.signal_variance;
        for j in 0..i {
            let v = matern52(&x[i], &x[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `k + (noise + jitter) I`, escalating the jitter.
fn factorize(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    for &jitter in &JITTER {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
    }
    Err(GpError::NumericalFailure {
        max_jitter: JITTER[JITTER.len() - 1],
    })
}

/// Log marginal likelihood of zero-mean targets `y` and its gradient with
/// respect to the log-parameters (see [`GpHyperparams::to_log`]).
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    hyper: &GpHyperparams,
) -> Result<(f64, Vec<f64>), GpError> {
    let n = x.len();
    let dim = hyper.lengthscales.len();
    let k = kernel_matrix(x, hyper);
    let (chol, _) = factorize(&k, hyper.noise_variance)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let l = chol.l();
    let log_det_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * yv.dot(&alpha) - log_det_half - 0.5 * n as f64 * LN_2PI;

    // W = alpha alpha^T - K^-1; dL/dtheta = 0.5 tr(W dK/dtheta).
    let w = &alpha * alpha.transpose() - chol.inverse();
    let mut grad = vec![0.0; dim + 2];
    for i in 0..n {
        for j in 0..i {
            let r = scaled_distance(&x[i], &x[j], &hyper.lengthscales);
            let e = (-SQRT5 * r).exp();
            // dk/d ln l_d = s2 (5/3) (1 + sqrt5 r) exp(-sqrt5 r) (dx_d / l_d)^2
            let common = hyper.signal_variance * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e;
            let wij = w[(i, j)];
            for d in 0..dim {
                let t = (x[i][d] - x[j][d]) / hyper.lengthscales[d];
                grad[d] += wij * common * t * t;
            }
            grad[dim] += wij * k[(i, j)];
        }
    }
    // Each off-diagonal pair appears twice in the trace, cancelling the 1/2.
    let trace_w: f64 = (0..n).map(|i| w[(i, i)]).sum();
    grad[dim] += 0.5 * trace_w * hyper.signal_variance;
    grad[dim + 1] = 0.5 * trace_w * hyper.noise_variance;
    Ok((lml, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when an accepted step improves the objective by less than this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 150,
            tolerance: 1e-7,
        }
    }
}

/// Projected gradient ascent with a backtracking (Armijo) line search.
fn ascend(
    x: &[Vec<f64>],
    y: &[f64],
    start: Vec<f64>,
    bounds: &[(f64, f64)],
    opts: &FitOptions,
) -> Option<(Vec<f64>, f64)> {
    let project = |t: &mut [f64]| {
        for (v, (lo, hi)) in t.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let eval = |t: &[f64]| log_marginal_likelihood(x, y, &GpHyperparams::from_log(t)).ok();

    let mut theta = start;
    project(&mut theta);
    let (mut f, mut g) = eval(&theta)?;
    let mut step = 0.1;
    for _ in 0..opts.max_iters {
        let mut accepted = false;
        while step > 1e-10 {
            let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * gi).collect();
            project(&mut cand);
            let ascent: f64 = cand
                .iter()
                .zip(&theta)
                .zip(&g)
                .map(|((c, t), gi)| (c - t) * gi)
                .sum();
            if ascent <= 0.0 {
                break;
            }
            if let Some((fc, gc)) = eval(&cand) {
                if fc >= f + 1e-4 * ascent {
                    let gain = fc - f;
                    theta = cand;
                    f = fc;
                    g = gc;
                    step *= 2.0;
                    accepted = gain >= opts.tolerance;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((theta, f))
}

/// Single-output GP over arbitrary-dimensional inputs with a zero prior mean.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    hyper: GpHyperparams,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

impl GaussianProcess {
    pub fn with_hyperparams(
        x: Vec<Vec<f64>>,
        y: &[f64],
        hyper: GpHyperparams,
    ) -> Result<Self, GpError> {
        if x.len() != y.len() || x.is_empty() {
            return Err(GpError::InvalidInput(format!(
                "{} inputs for {} targets",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|row| row.len() != hyper.lengthscales.len()) {
            return Err(GpError::InvalidInput("input dimension mismatch".into()));
        }
        let k = kernel_matrix(&x, &hyper);
        let (chol, jitter) = factorize(&k, hyper.noise_variance)?;
        let yv = DVector::from_column_slice(y);
        let alpha = chol.solve(&yv);
        let n = x.len();
        let l = chol.l();
        let lml = -0.5 * yv.dot(&alpha)
            - (0..n).map(|i| l[(i, i)].ln()).sum::<f64>()
            - 0.5 * n as f64 * LN_2PI;
        Ok(Self {
            x,
            hyper,
            chol,
            alpha,
            jitter,
            lml,
        })
    }

    /// Fits hyperparameters by maximizing the log marginal likelihood from
    /// `opts.restarts` log-uniform starting points.
    pub fn fit(
        x: Vec<Vec<f64>>,
        y: &[f64],
        opts: &FitOptions,
        rng: &mut impl Rng,
    ) -> Result<Self, GpError> {
        if x.len() < 2 {
            return Err(GpError::InsufficientData(x.len()));
        }
        let dim = x[0].len();
        let bounds = GpHyperparams::log_bounds(dim);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..opts.restarts.max(1) {
            let log_uniform = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| -> f64 {
                rng.random_range(lo.ln()..hi.ln())
            };
            let mut start: Vec<f64> = (0..dim).map(|_| log_uniform(rng, 0.05, 5.0)).collect();
            start.push(log_uniform(rng, 0.1, 10.0));
            start.push(log_uniform(rng, 1e-4, 0.5));
            if let Some((theta, f)) = ascend(&x, y, start, &bounds, opts) {
                if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                    best = Some((theta, f));
                }
            }
        }
        let (theta, _) = best.ok_or(GpError::NumericalFailure {
            max_jitter: JITTER[JITTER.len() - 1],
        })?;
        Self::with_hyperparams(x, y, GpHyperparams::from_log(&theta))
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn cross_kernel(&self, q: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.x.len(), q.len(), |i, j| matern52(&self.x[i], &q[j], &self.hyper))
    }

    /// Posterior mean and marginal variances at `q`.
    pub fn predict(&self, q: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let ks = self.cross_kernel(q);
        let mean = ks.transpose() * &self.alpha;
        let v = self.chol.l().solve_lower_triangular(&ks).expect("triangular solve");
        let var = (0..q.len())
            .map(|j| (self.hyper.signal_variance - v.column(j).norm_squared()).max(0.0))
            .collect();
        (mean.iter().copied().collect(), var)
    }

    /// Posterior mean and full covariance at `q`.
    pub fn predict_joint(&self, q: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
        let ks = self.cross_kernel(q);
        let mean = ks.transpose() * &self.alpha;
        let v = self.chol.l().solve_lower_triangular(&ks).expect("triangular solve");
        let prior = kernel_matrix(q, &self.hyper);
        let mut cov = prior - v.transpose() * v;
        for i in 0..q.len() {
            cov[(i, i)] = cov[(i, i)].max(0.0);
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        (mean.iter().copied().collect(), cov)
    }
}

/// Per-objective target standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    fn of(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean,
            std: var.sqrt().max(MIN_TARGET_STD),
        }
    }
}

/// Seven independent GPs over the design space.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    gps: Vec<GaussianProcess>,
    scaling: Vec<Standardization>,
}

/// Fitted state of one objective, as recorded in session exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedObjective {
    pub hyperparams: GpHyperparams,
    pub standardization: Standardization,
    pub log_marginal_likelihood: f64,
}

/// Posterior at `m` query points.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// `m` rows of 7 objective means.
    pub mean: Vec<[f64; N_OBJECTIVES]>,
    pub variance: Vec<[f64; N_OBJECTIVES]>,
    /// One `m x m` covariance per objective.
    pub covariance: Vec<DMatrix<f64>>,
}

fn inputs(designs: &[DesignParams]) -> Vec<Vec<f64>> {
    designs.iter().map(|d| d.as_slice().to_vec()).collect()
}

impl SurrogateModel {
    pub fn fit(
        history: &[(DesignParams, ObjectiveVector)],
        opts: &FitOptions,
        seed: u64,
    ) -> Result<Self, GpError> {
        if history.len() < 2 {
            return Err(GpError::InsufficientData(history.len()));
        }
        let x: Vec<Vec<f64>> = history.iter().map(|(d, _)| d.as_slice().to_vec()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gps = Vec::with_capacity(N_OBJECTIVES);
        let mut scaling = Vec::with_capacity(N_OBJECTIVES);
        for o in 0..N_OBJECTIVES {
            let y: Vec<f64> = history.iter().map(|(_, v)| v.to_array()[o]).collect();
            let s = Standardization::of(&y);
            let ys: Vec<f64> = y.iter().map(|v| (v - s.mean) / s.std).collect();
            gps.push(GaussianProcess::fit(x.clone(), &ys, opts, &mut rng)?);
            scaling.push(s);
        }
        Ok(Self { gps, scaling })
    }

    /// Builds a model with fixed hyperparameters for every objective.
    pub fn with_hyperparams(
        history: &[(DesignParams, ObjectiveVector)],
        hyper: &[GpHyperparams],
    ) -> Result<Self, GpError> {
        if history.is_empty() {
            return Err(GpError::InsufficientData(0));
        }
        let x: Vec<Vec<f64>> = history.iter().map(|(d, _)| d.as_slice().to_vec()).collect();
        let mut gps = Vec::new();
        let mut scaling = Vec::new();
        for (o, h) in hyper.iter().enumerate().take(N_OBJECTIVES) {
            let y: Vec<f64> = history.iter().map(|(_, v)| v.to_array()[o]).collect();
            let s = Standardization::of(&y);
            let ys: Vec<f64> = y.iter().map(|v| (v - s.mean) / s.std).collect();
            gps.push(GaussianProcess::with_hyperparams(x.clone(), &ys, h.clone())?);
            scaling.push(s);
        }
        if gps.len() != N_OBJECTIVES {
            return Err(GpError::InvalidInput("need 7 hyperparameter sets".into()));
        }
        Ok(Self { gps, scaling })
    }

    pub fn objectives(&self) -> &[GaussianProcess] {
        &self.gps
    }

    pub fn fitted(&self) -> Vec<FittedObjective> {
        self.gps
            .iter()
            .zip(&self.scaling)
            .map(|(gp, s)| FittedObjective {
                hyperparams: gp.hyperparams().clone(),
                standardization: *s,
                log_marginal_likelihood: gp.log_marginal_likelihood(),
            })
            .collect()
    }

    /// Marginal posterior (mean, variance) per query point, in objective
    /// units.
    pub fn marginals(&self, designs: &[DesignParams]) -> (Vec<[f64; N_OBJECTIVES]>, Vec<[f64; N_OBJECTIVES]>) {
        let q = inputs(designs);
        let mut mean = vec![[0.0; N_OBJECTIVES]; q.len()];
        let mut var = vec![[0.0; N_OBJECTIVES]; q.len()];
        for (o, (gp, s)) in self.gps.iter().zip(&self.scaling).enumerate() {
            let (m, v) = gp.predict(&q);
            for j in 0..q.len() {
                mean[j][o] = m[j] * s.std + s.mean;
                var[j][o] = v[j] * s.std * s.std;
            }
        }
        (mean, var)
    }

    pub fn posterior(&self, designs: &[DesignParams]) -> Posterior {
        let q = inputs(designs);
        let mut mean = vec![[0.0; N_OBJECTIVES]; q.len()];
        let mut variance = vec![[0.0; N_OBJECTIVES]; q.len()];
        let mut covariance = Vec::with_capacity(N_OBJECTIVES);
        for (o, (gp, s)) in self.gps.iter().zip(&self.scaling).enumerate() {
            let (m, cov) = gp.predict_joint(&q);
            let cov = cov * (s.std * s.std);
            for j in 0..q.len() {
                mean[j][o] = m[j] * s.std + s.mean;
                variance[j][o] = cov[(j, j)];
            }
            covariance.push(cov);
        }
        Posterior {
            mean,
            variance,
            covariance,
        }
    }

    /// Joint posterior draws: `n_samples x m x 7`, deterministic in `seed`.
    pub fn sample_posterior(
        &self,
        designs: &[DesignParams],
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<Vec<[f64; N_OBJECTIVES]>>, GpError> {
        let post = self.posterior(designs);
        let m = designs.len();
        let factors: Vec<DMatrix<f64>> = post.covariance.iter().map(psd_factor).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n_samples);
        let mut z = DVector::zeros(m);
        for _ in 0..n_samples {
            let mut draw = post.mean.clone();
            for (o, f) in factors.iter().enumerate() {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                let e = f * &z;
                for j in 0..m {
                    draw[j][o] += e[j];
                }
            }
            out.push(draw);
        }
        Ok(out)
    }
}

/// A factor `F` with `F F^T = cov`. Uses Cholesky when it succeeds and
/// falls back to a clamped eigendecomposition for singular matrices, so a
/// zero covariance yields an exactly zero factor.
fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = Cholesky::new(cov.clone()) {
        return c.l();
    }
    let eig = SymmetricEigen::new(cov.clone());
    let mut f = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}
