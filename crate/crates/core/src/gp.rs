//! Universal-kriging Gaussian process core: generalized least squares fit,
//! plug-in prediction, and the hierarchical (inverse-gamma mixed) posterior
//! predictive.
//!
//! All solves go through triangular Cholesky factorizations; no explicit
//! inverses are formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelSpec};
use crate::special::LN_2PI;
use crate::trend::TrendModel;

/// Observed design points (rows) and responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "design matrix".into() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "responses".into() });
        }
        Ok(Dataset { x, y })
    }

    /// Build from row-major point slices.
    pub fn from_rows(points: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::invalid("all points must share one dimension"));
        }
        let n = points.len();
        let x = DMatrix::from_fn(n, d, |i, j| points[i][j]);
        Dataset::new(x, DVector::from_column_slice(y))
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Current best (minimum) observed response.
    pub fn y_min(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sufficient statistics of a fit consumed by the hyperparameter layer.
#[derive(Debug, Clone, Copy)]
pub struct FitStats {
    /// Generalized residual sum of squares over two:
    /// `w = (y' K^-1 y - beta' G beta) / 2 = n sigma2_hat / 2`.
    pub w: f64,
    pub logdet_k: f64,
    pub logdet_g: f64,
    pub n: usize,
    pub q: usize,
}

/// A fitted universal-kriging model.
#[derive(Debug, Clone)]
pub struct GpFit {
    kernel: KernelSpec,
    trend: TrendModel,
    x: DMatrix<f64>,
    chol_k: Cholesky<f64, Dyn>,
    chol_g: Cholesky<f64, Dyn>,
    /// `K^-1 P`, cached so prediction needs a single solve per point.
    kinv_p: DMatrix<f64>,
    /// `K^-1 (y - P beta)`.
    kinv_resid: DVector<f64>,
    beta: DVector<f64>,
    sigma2_hat: f64,
    nugget: f64,
    logdet_k: f64,
    logdet_g: f64,
    n: usize,
    q: usize,
}

/// Fit the universal-kriging model by generalized least squares.
pub fn fit(data: &Dataset, kernel: &KernelSpec, trend: &TrendModel, nugget: f64) -> Result<GpFit> {
    let factor = kernel::corr_matrix(kernel, data.x(), nugget)?;
    fit_with_factor(data, kernel, trend, factor)
}

/// Fit reusing a pre-factorized correlation matrix (length-scale search
/// builds the factor from cached pair differences).
pub fn fit_with_factor(
    data: &Dataset,
    kernel: &KernelSpec,
    trend: &TrendModel,
    factor: kernel::CorrFactor,
) -> Result<GpFit> {
    let n = data.len();
    let q = trend.basis_count();
    if data.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: data.dim() });
    }
    if n <= q {
        return Err(Error::InsufficientData { n, q });
    }
    let p = trend.basis_matrix(data.x())?;
    let kinv_y = factor.chol.solve(data.y());
    let kinv_p = factor.chol.solve(&p);
    let mut g = p.transpose() * &kinv_p;
    // Symmetrize to wash out roundoff before factorizing.
    for i in 0..q {
        for j in (i + 1)..q {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let chol_g = Cholesky::new(g).ok_or(Error::Conditioning { nugget: factor.nugget })?;
    let logdet_g = 2.0 * chol_g.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !logdet_g.is_finite() {
        return Err(Error::Conditioning { nugget: factor.nugget });
    }
    let beta = chol_g.solve(&(p.transpose() * &kinv_y));
    let resid = data.y() - &p * &beta;
    let kinv_resid = factor.chol.solve(&resid);
    let mut rss = resid.dot(&kinv_resid).max(0.0);
    // A residual sum at pure-roundoff scale relative to the responses
    // (e.g. the trend reproduces y exactly) is a degenerate fit; snap it
    // to zero so downstream layers see the sentinel instead of noise.
    let y_scale = data.y().dot(data.y()) / n as f64;
    if rss <= 1e-24 * n as f64 * y_scale.max(1.0) {
        rss = 0.0;
    }
    Ok(GpFit {
        kernel: kernel.clone(),
        trend: trend.clone(),
        x: data.x().clone(),
        chol_k: factor.chol,
        chol_g,
        kinv_p,
        kinv_resid,
        beta,
        sigma2_hat: rss / n as f64,
        nugget: factor.nugget,
        logdet_k: factor.logdet,
        logdet_g,
        n,
        q,
    })
}

impl GpFit {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn trend(&self) -> &TrendModel {
        &self.trend
    }

    /// GLS trend coefficients.
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Plug-in process variance estimate `sigma2_hat = rss / n`.
    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    /// Nugget actually used by the factorization.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn stats(&self) -> FitStats {
        FitStats {
            w: 0.5 * self.sigma2_hat * self.n as f64,
            logdet_k: self.logdet_k,
            logdet_g: self.logdet_g,
            n: self.n,
            q: self.q,
        }
    }

    /// Posterior mean of `f(x)` (plug-in universal kriging predictor).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_mean_s2(x)?.0)
    }

    /// Normalized predictive variance `s_n^2(x)` (process variance factored
    /// out), including the trend-uncertainty term.
    pub fn predict_s2(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_mean_s2(x)?.1)
    }

    /// Mean and normalized variance in one pass (shared solves).
    pub fn predict_mean_s2(&self, x: &[f64]) -> Result<(f64, f64)> {
        let k = kernel::corr_vector(&self.kernel, &self.x, x)?;
        let p = self.trend.basis_eval(x)?;
        let mean = p.dot(&self.beta) + k.dot(&self.kinv_resid);
        let kik = self.chol_k.solve(&k);
        let h = &p - self.kinv_p.transpose() * &k;
        let gih = self.chol_g.solve(&h);
        let s2 = 1.0 - k.dot(&kik) + h.dot(&gih);
        Ok((mean, clamp_s2(s2, self.nugget)?))
    }

    /// Normalized predictive variances for many points at once (rows of
    /// `points`). Semantically identical to mapping [`GpFit::predict_s2`],
    /// but solves in blocks for throughput.
    pub fn predict_s2_batch(&self, points: &DMatrix<f64>) -> Result<Vec<f64>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: points.ncols() });
        }
        let m = points.nrows();
        let n = self.n;
        let d = self.dim();
        let theta = self.kernel.theta();
        let family = self.kernel.family;
        // Cross-correlation block K_c (n x m).
        let mut kc = DMatrix::zeros(n, m);
        for j in 0..m {
            for i in 0..n {
                let mut r2 = 0.0;
                for c in 0..d {
                    let u = (self.x[(i, c)] - points[(j, c)]) / theta[c];
                    r2 += u * u;
                }
                kc[(i, j)] = family.corr_at(r2.sqrt());
            }
        }
        let kik = self.chol_k.solve(&kc);
        // H = P_m' - (K^-1 P)' K_c, one column per point.
        let pm = self.trend.basis_matrix(points)?;
        let h = pm.transpose() - self.kinv_p.transpose() * &kc;
        let gih = self.chol_g.solve(&h);
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let mut kdot = 0.0;
            let mut hdot = 0.0;
            for i in 0..n {
                kdot += kc[(i, j)] * kik[(i, j)];
            }
            for r in 0..self.q {
                hdot += h[(r, j)] * gih[(r, j)];
            }
            out.push(clamp_s2(1.0 - kdot + hdot, self.nugget)?);
        }
        Ok(out)
    }

    /// Concentrated (profile) log-likelihood of the fitted model. Degenerate
    /// fits with `sigma2_hat = 0` return `-inf` as a defined sentinel so
    /// that searches steer away from them.
    pub fn profile_loglik(&self) -> f64 {
        if self.sigma2_hat <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let n = self.n as f64;
        -0.5 * n * self.sigma2_hat.ln() - 0.5 * self.logdet_k - 0.5 * n * (1.0 + LN_2PI)
    }
}

/// Negative variances beyond roundoff indicate a conditioning problem;
/// small negative values are clamped to zero.
fn clamp_s2(s2: f64, nugget: f64) -> Result<f64> {
    if s2 < -1e-10 {
        return Err(Error::Conditioning { nugget });
    }
    Ok(s2.max(0.0))
}

/// Inverse-gamma prior on the process variance: `sigma^2 ~ IG(a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct HierPrior {
    pub a: f64,
    pub b: f64,
}

impl HierPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!("prior shape a must be > 0, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid(format!("prior scale b must be > 0, got {b}")));
        }
        Ok(HierPrior { a, b })
    }
}

/// Location-scale Student-t predictive distribution for `f(x)`.
#[derive(Debug, Clone, Copy)]
pub struct PredictiveT {
    pub df: f64,
    pub loc: f64,
    pub scale: f64,
}

/// Posterior-updated variance parameters: shape `a_n = a + (n - q)/2`,
/// scale `b_n = b + n sigma2_hat / 2`, and the point estimate
/// `sigma_tilde^2 = b_n / a_n`.
pub fn posterior_variance_params(fit: &GpFit, prior: &HierPrior) -> (f64, f64, f64) {
    let n = fit.n as f64;
    let q = fit.q as f64;
    let a_n = prior.a + 0.5 * (n - q);
    let b_n = prior.b + 0.5 * n * fit.sigma2_hat;
    (a_n, b_n, b_n / a_n)
}

/// Marginal posterior of `f(x)` under the flat-trend, inverse-gamma
/// variance hierarchy: a Student-t with `df = 2a + n - q` centered at the
/// plug-in mean with scale `sigma_tilde * s_n(x)`.
pub fn hierarchical_posterior(fit: &GpFit, prior: &HierPrior, x: &[f64]) -> Result<PredictiveT> {
    let df = 2.0 * prior.a + (fit.n as f64 - fit.q as f64);
    if df <= 2.0 {
        return Err(Error::DegreesOfFreedom { df, min: 2.0 });
    }
    let (_, _, sigma_tilde2) = posterior_variance_params(fit, prior);
    let (loc, s2) = fit.predict_mean_s2(x)?;
    Ok(PredictiveT { df, loc, scale: (sigma_tilde2 * s2).sqrt() })
}
