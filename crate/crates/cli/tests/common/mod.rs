//! Independent numerical oracles for the acceptance suite. Everything in
//! this module is written from scratch against textbook formulas — a
//! Stirling log-gamma, normal/Student-t log densities, panelled
//! Gauss-Legendre quadrature for hinge expectations, and a streaming
//! log-sum-exp accumulator — sharing no numerical code with the library
//! under test.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Log-gamma via upward recurrence into the Stirling regime plus the
/// asymptotic series; absolute error below 1e-15 for x >= 1e-3.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs x > 0, got {x}");
    let mut z = x;
    let mut shift = 0.0;
    while z < 12.0 {
        shift -= z.ln();
        z += 1.0;
    }
    // Bernoulli-number coefficients B_{2k} / (2k (2k - 1)).
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut term = inv;
    for c in C {
        series += c * term;
        term *= inv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * LN_2PI + series + shift
}

pub fn normal_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * LN_2PI
}

/// Log density of the standard Student-t with `nu` degrees of freedom.
pub fn t_log_pdf(nu: f64, z: f64) -> f64 {
    let ln_c = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln();
    ln_c - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
}

/// `E[(z0 - X)_+]` for a standardized variate `X` with the given log
/// density: integrates `u * p(z0 - u)` over `u in (0, u_max)` on
/// geometrically growing Gauss-Legendre panels. The integrand is
/// everywhere nonnegative, so panel sums accumulate without cancellation.
pub fn plus_expectation(
    z0: f64,
    log_pdf: impl Fn(f64) -> f64,
    u_max: f64,
    rule: &GaussLegendre,
) -> f64 {
    let u_min = 1e-12 * (1.0 + z0.abs());
    if u_max <= u_min {
        return 0.0;
    }
    let mut total = 0.0;
    let mut lo = u_min;
    while lo < u_max {
        let hi = (lo * 2.0).min(u_max);
        total += rule.integrate(lo, hi, |u| u * log_pdf(z0 - u).exp());
        lo = hi;
    }
    total
}

/// Hinge expectation under a normal predictive: `sigma_s * E[(z0 - Z)_+]`.
pub fn ei_oracle(improvement: f64, sigma_s: f64, rule: &GaussLegendre) -> f64 {
    let z0 = improvement / sigma_s;
    sigma_s * plus_expectation(z0, normal_log_pdf, z0 + 45.0, rule)
}

/// Hinge expectation under a location-scale t predictive:
/// `scale * E[(z0 - T)_+]`; the upper limit covers the polynomial tail to
/// well below 1e-12 relative for nu >= 2.5.
pub fn t_improvement_oracle(
    improvement: f64,
    scale: f64,
    nu: f64,
    rule: &GaussLegendre,
) -> f64 {
    let z0 = improvement / scale;
    scale * plus_expectation(z0, |z| t_log_pdf(nu, z), 1e9 * (1.0 + z0.abs()), rule)
}

/// Streaming log-sum-exp: `value()` returns `ln(sum of exp(terms))`.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    pub fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.sum += (term - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    pub fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

pub fn gl_rule(degree: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(degree).expect("degree > 0"))
}

/// Nodes/weights of a panelled Gauss-Legendre rule over `[lo, hi]` split
/// into `panels` equal pieces, for quadratures that need explicit nodes.
pub fn panel_nodes(rule: &GaussLegendre, lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / panels as f64;
    let mut out = Vec::new();
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let b = a + width;
        for (x, w) in rule.as_node_weight_pairs() {
            // Affine map from [-1, 1] to [a, b].
            out.push((0.5 * ((b - a) * x + (b + a)), 0.5 * (b - a) * w));
        }
    }
    out
}

/// Matern-5/2 correlation with per-coordinate length-scales, written
/// independently of the library's kernel module.
pub fn matern52_ind(x: &[f64], z: &[f64], theta: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for k in 0..theta.len() {
        let u = (x[k] - z[k]) / theta[k];
        r2 += u * u;
    }
    let s = (5.0 * r2).sqrt();
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Deterministic xorshift-based uniform generator for oracle-side
/// sampling, independent of the library's RNG plumbing.
pub struct OracleRng(u64);

impl OracleRng {
    pub fn new(seed: u64) -> Self {
        OracleRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (self.range(lo.ln(), hi.ln())).exp()
    }
}
