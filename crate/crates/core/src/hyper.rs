//! Hyperparameter handling for the inverse-gamma variance prior: the
//! marginal likelihood of the data in `(a, b)`, its profile over `b`, and
//! the two data-driven estimation schemes (mode of the regularized profile
//! posterior, and the sample-size-scaled variant).
//!
//! Notation: `m = (n - q) / 2` and `w` is the generalized residual sum of
//! squares over two, both taken from a fitted model's [`FitStats`].

use crate::error::{Error, Result};
use crate::gp::FitStats;
use crate::special::{digamma, ln_gamma};

/// How the inverse-gamma prior parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperScheme {
    /// Fixed weakly-informative prior `(a, b) = (eps, eps)`.
    Weak { eps: f64 },
    /// Maximize the profile marginal posterior with a Gamma(zeta, iota)
    /// regularizer on `a` (rate parameterization).
    Mmap { zeta: f64, iota: f64 },
    /// As `Mmap`, but `b` is reparameterized as `kappa * n` so the prior
    /// scale tracks the sample size across iterations.
    Dsd { zeta: f64, iota: f64 },
}

impl HyperScheme {
    pub const DEFAULT_WEAK_EPS: f64 = 0.1;
    pub const DEFAULT_ZETA: f64 = 2.0;
    pub const DEFAULT_IOTA: f64 = 2.0;

    pub fn weak() -> Self {
        HyperScheme::Weak { eps: Self::DEFAULT_WEAK_EPS }
    }

    pub fn mmap() -> Self {
        HyperScheme::Mmap { zeta: Self::DEFAULT_ZETA, iota: Self::DEFAULT_IOTA }
    }

    pub fn dsd() -> Self {
        HyperScheme::Dsd { zeta: Self::DEFAULT_ZETA, iota: Self::DEFAULT_IOTA }
    }
}

/// Search controls for the one-dimensional mode search in `a`.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub a_lo: f64,
    pub a_hi: f64,
    /// Number of bracketing points on the log grid.
    pub grid: usize,
    /// Bisection interval tolerance (relative to the midpoint).
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { a_lo: 1e-3, a_hi: 1e3, grid: 32, tol: 1e-10 }
    }
}

fn validate_stats(stats: &FitStats) -> Result<(f64, f64)> {
    if stats.n <= stats.q {
        return Err(Error::InsufficientData { n: stats.n, q: stats.q });
    }
    if !(stats.w.is_finite() && stats.w > 0.0) {
        return Err(Error::DegenerateFit { w: stats.w });
    }
    let m = 0.5 * (stats.n as f64 - stats.q as f64);
    Ok((m, stats.w))
}

fn validate_ab(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("shape a must be > 0, got {a}")));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::invalid(format!("scale b must be > 0, got {b}")));
    }
    Ok(())
}

/// Log marginal likelihood of the data as a function of the prior
/// parameters, with the kernel and trend held fixed:
/// `-1/2 log det(G K) + a log b - log Gamma(a) + log Gamma(a + m)
///  - (a + m) log(b + w)`.
pub fn log_marginal(stats: &FitStats, a: f64, b: f64) -> Result<f64> {
    let (m, w) = validate_stats(stats)?;
    validate_ab(a, b)?;
    Ok(-0.5 * (stats.logdet_g + stats.logdet_k) + a * b.ln() - ln_gamma(a) + ln_gamma(a + m)
        - (a + m) * (b + w).ln())
}

/// Analytic gradient of [`log_marginal`] in `(a, b)`.
pub fn log_marginal_grad(stats: &FitStats, a: f64, b: f64) -> Result<(f64, f64)> {
    let (m, w) = validate_stats(stats)?;
    validate_ab(a, b)?;
    let da = b.ln() - digamma(a) + digamma(a + m) - (b + w).ln();
    let db = a / b - (a + m) / (b + w);
    Ok((da, db))
}

/// Profile maximizer of `b` for fixed `a`: `b*(a) = 2 a w / (n - q)`,
/// the unique stationary point of [`log_marginal`] in `b`.
pub fn profile_b(stats: &FitStats, a: f64) -> Result<f64> {
    let (m, w) = validate_stats(stats)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("shape a must be > 0, got {a}")));
    }
    Ok(a * w / m)
}

/// Log marginal likelihood along the profile curve `b = b*(a)`.
pub fn profile_log_marginal(stats: &FitStats, a: f64) -> Result<f64> {
    let b = profile_b(stats, a)?;
    log_marginal(stats, a, b)
}

/// Objective maximized by the regularized schemes:
/// `log p(y; a, b*(a)) + (zeta - 1) log a - iota a`.
pub fn mmap_objective(stats: &FitStats, a: f64, zeta: f64, iota: f64) -> Result<f64> {
    Ok(profile_log_marginal(stats, a)? + (zeta - 1.0) * a.ln() - iota * a)
}

/// Total derivative of [`mmap_objective`] in `a`. Along the profile curve
/// the partial in `b` vanishes, so the derivative collapses to
/// `psi(a + m) - psi(a) - log(1 + m / a) + (zeta - 1)/a - iota`,
/// which is strictly decreasing in `a`.
pub fn mmap_objective_deriv(stats: &FitStats, a: f64, zeta: f64, iota: f64) -> Result<f64> {
    let (m, _) = validate_stats(stats)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("shape a must be > 0, got {a}")));
    }
    Ok(digamma(a + m) - digamma(a) - (1.0 + m / a).ln() + (zeta - 1.0) / a - iota)
}

/// Result of a prior-parameter estimation.
#[derive(Debug, Clone, Copy)]
pub struct HyperEstimate {
    pub a: f64,
    pub b: f64,
    /// Set when the mode search stopped at a search-interval endpoint.
    pub at_boundary: bool,
}

/// Estimate `(a, b)` by maximizing the regularized profile posterior.
///
/// The derivative is strictly decreasing, so the maximizer is bracketed by
/// a sign change on a log-spaced grid and then refined by bisection. A
/// derivative that never changes sign puts the mode at an interval
/// endpoint, which is reported via `at_boundary`.
pub fn mmap_estimate(
    stats: &FitStats,
    zeta: f64,
    iota: f64,
    opts: &SearchOptions,
) -> Result<HyperEstimate> {
    validate_stats(stats)?;
    if !(zeta.is_finite() && zeta > 0.0) || !(iota.is_finite() && iota >= 0.0) {
        return Err(Error::invalid(format!(
            "regularizer requires zeta > 0 and iota >= 0, got ({zeta}, {iota})"
        )));
    }
    if !(opts.a_lo > 0.0 && opts.a_hi > opts.a_lo && opts.grid >= 2) {
        return Err(Error::invalid("mode-search options must satisfy 0 < a_lo < a_hi, grid >= 2"));
    }
    let deriv = |a: f64| mmap_objective_deriv(stats, a, zeta, iota).expect("validated above");

    // Log-spaced bracketing grid.
    let lo_ln = opts.a_lo.ln();
    let step = (opts.a_hi.ln() - lo_ln) / (opts.grid - 1) as f64;
    let grid: Vec<f64> = (0..opts.grid).map(|i| (lo_ln + step * i as f64).exp()).collect();

    let mut bracket: Option<(f64, f64)> = None;
    let mut prev = grid[0];
    let mut prev_g = deriv(prev);
    if prev_g <= 0.0 {
        // Decreasing from the start: mode at the left endpoint.
        let a = opts.a_lo;
        return Ok(HyperEstimate { a, b: profile_b(stats, a)?, at_boundary: true });
    }
    for &a in &grid[1..] {
        let g = deriv(a);
        if g <= 0.0 {
            bracket = Some((prev, a));
            break;
        }
        prev = a;
        prev_g = g;
    }
    let _ = prev_g;
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => {
            // Increasing over the whole interval: mode at the right endpoint.
            let a = opts.a_hi;
            return Ok(HyperEstimate { a, b: profile_b(stats, a)?, at_boundary: true });
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= opts.tol * (1.0 + mid) {
            break;
        }
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok(HyperEstimate { a, b: profile_b(stats, a)?, at_boundary: false })
}

/// Result of the sample-size-scaled estimation.
#[derive(Debug, Clone, Copy)]
pub struct DsdEstimate {
    pub a: f64,
    /// Per-observation prior scale; the prior at sample size `n` uses
    /// `b = kappa * n`.
    pub kappa: f64,
    pub at_boundary: bool,
}

impl DsdEstimate {
    /// Prior scale at sample size `n`.
    pub fn b_at(&self, n: usize) -> f64 {
        self.kappa * n as f64
    }
}

/// Estimate `(a, kappa)` with `b = kappa n`: the flat reparameterization
/// leaves the profile mode unchanged, so this reuses [`mmap_estimate`] on
/// the initial-design statistics and divides out the sample size.
pub fn dsd_estimate(
    stats: &FitStats,
    zeta: f64,
    iota: f64,
    opts: &SearchOptions,
) -> Result<DsdEstimate> {
    let est = mmap_estimate(stats, zeta, iota, opts)?;
    Ok(DsdEstimate { a: est.a, kappa: est.b / stats.n as f64, at_boundary: est.at_boundary })
}
