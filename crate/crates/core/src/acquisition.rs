//! Closed-form acquisition criteria over a fitted model: plug-in expected
//! improvement, its hierarchical and Student variants, and a
//! lower-confidence-bound score, plus the Student-t primitives they need.
//!
//! Improvement is always measured downward from the incumbent minimum:
//! `I(x) = y* - mean(x)`, and every criterion is maximized.

use crate::error::{Error, Result};
use crate::gp::{posterior_variance_params, GpFit, HierPrior};
use crate::special::{betainc_reg, ln_gamma, norm_cdf, norm_pdf};

/// Density of the standard Student-t distribution with `df` degrees of
/// freedom.
pub fn t_pdf(df: f64, x: f64) -> Result<f64> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::invalid(format!("t density requires df > 0, got {df}")));
    }
    let ln = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p();
    Ok(ln.exp())
}

/// CDF of the standard Student-t distribution with `df` degrees of
/// freedom, evaluated through the regularized incomplete beta function.
pub fn t_cdf(df: f64, x: f64) -> Result<f64> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::invalid(format!("t distribution requires df > 0, got {df}")));
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    let t = df / (df + x * x);
    let half_tail = 0.5 * betainc_reg(0.5 * df, 0.5, t);
    Ok(if x > 0.0 { 1.0 - half_tail } else { half_tail })
}

/// Plug-in expected improvement: `I Phi(I/s) + s phi(I/s)` with
/// `s = sigma_s` the predictive standard deviation. At zero scale the
/// limit `max(I, 0)` is returned; never negative.
pub fn ei_value(improvement: f64, sigma_s: f64) -> f64 {
    if !(sigma_s > 0.0) {
        return improvement.max(0.0);
    }
    let z = improvement / sigma_s;
    (improvement * norm_cdf(z) + sigma_s * norm_pdf(z)).max(0.0)
}

/// Hierarchical expected improvement under the Student-t predictive with
/// `df` degrees of freedom and location-scale `(y* - I, scale)`:
/// `I Phi_df(I/scale) + m scale phi_{df-2}(I/(m scale))` with
/// `m = sqrt(df/(df-2))`. Requires `df > 2`; at zero scale the limit
/// `max(I, 0)` is returned.
pub fn hei_value(improvement: f64, scale: f64, df: f64) -> Result<f64> {
    if !(df.is_finite() && df > 2.0) {
        return Err(Error::DegreesOfFreedom { df, min: 2.0 });
    }
    if !(scale > 0.0) {
        return Ok(improvement.max(0.0));
    }
    let m = (df / (df - 2.0)).sqrt();
    let v = improvement * t_cdf(df, improvement / scale)?
        + m * scale * t_pdf(df - 2.0, improvement / (m * scale))?;
    Ok(v.max(0.0))
}

/// Student expected improvement:
/// `scale (z Phi_df(z) + ((df + z^2)/(df - 1)) phi_df(z))` with
/// `z = I/scale`. Requires `df > 1`; at zero scale the limit `max(I, 0)`
/// is returned. Algebraically equal to [`hei_value`] wherever both are
/// defined.
pub fn sei_value(improvement: f64, scale: f64, df: f64) -> Result<f64> {
    if !(df.is_finite() && df > 1.0) {
        return Err(Error::DegreesOfFreedom { df, min: 1.0 });
    }
    if !(scale > 0.0) {
        return Ok(improvement.max(0.0));
    }
    let z = improvement / scale;
    let v = scale * (z * t_cdf(df, z)? + (df + z * z) / (df - 1.0) * t_pdf(df, z)?);
    Ok(v.max(0.0))
}

/// Lower-confidence-bound score for minimization:
/// `-(mean - mult sigma_s)`; maximizing it minimizes the bound.
pub fn ucb_score(mean: f64, sigma_s: f64, mult: f64) -> f64 {
    mult * sigma_s - mean
}

/// Acquisition criterion with per-method parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcqMethod {
    /// Plug-in EI over an ordinary-kriging fit (constant trend).
    EiOk,
    /// Plug-in EI over the universal-kriging fit.
    EiUk,
    /// Hierarchical EI; the prior comes from the evaluation state.
    Hei,
    /// Student EI with a fixed variance prior.
    Sei { a: f64, b: f64 },
    /// Lower confidence bound with the given exploration multiplier.
    Ucb { mult: f64 },
}

impl AcqMethod {
    /// The recommended fixed prior for the Student EI baseline.
    pub fn sei_default() -> Self {
        AcqMethod::Sei { a: 0.2, b: 12.0 }
    }

    /// The default exploration multiplier for the confidence-bound
    /// baseline.
    pub fn ucb_default() -> Self {
        AcqMethod::Ucb { mult: 2.96 }
    }

    /// Whether the criterion is an expected-improvement form whose
    /// degenerate-fit fallback applies.
    pub fn is_improvement_based(&self) -> bool {
        !matches!(self, AcqMethod::Ucb { .. })
    }
}

/// A criterion together with its optional selection wrappers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcqSpec {
    pub method: AcqMethod,
    /// Epsilon-greedy wrapper: probability of replacing the maximizer
    /// with a uniform draw.
    pub epsilon: Option<f64>,
    /// Stabilized wrapper: minimum predictive-deviation fraction gamma.
    pub gamma: Option<f64>,
}

impl AcqSpec {
    pub fn new(method: AcqMethod) -> Result<Self> {
        let spec = AcqSpec { method, epsilon: None, gamma: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = Some(epsilon);
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = Some(gamma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if let AcqMethod::Sei { a, b } = self.method {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::invalid(format!("fixed prior must be positive, got ({a}, {b})")));
            }
        }
        if let AcqMethod::Ucb { mult } = self.method {
            if !(mult > 0.0) {
                return Err(Error::invalid(format!("confidence multiplier must be > 0, got {mult}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {e}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::invalid(format!("gamma must lie in (0, 1], got {g}")));
            }
        }
        Ok(())
    }
}

/// Everything the criteria need at a fixed model state.
pub struct AcqState<'a> {
    pub fit: &'a GpFit,
    /// Variance prior for the hierarchical criterion.
    pub prior: Option<HierPrior>,
    /// Incumbent minimum of the observed responses.
    pub y_star: f64,
}

impl<'a> AcqState<'a> {
    pub fn new(fit: &'a GpFit, prior: Option<HierPrior>, y_star: f64) -> Self {
        AcqState { fit, prior, y_star }
    }

    /// Degenerate-scale threshold: below it the improvement-based criteria
    /// return their limiting value `max(I, 0)`.
    pub fn scale_tol(&self) -> f64 {
        1e-12 * (1.0 + self.y_star.abs())
    }
}

/// Evaluate the criterion at a point. Selection-stage wrappers (ε-greedy,
/// stabilized) do not change the pointwise value.
pub fn evaluate(state: &AcqState, spec: &AcqSpec, x: &[f64]) -> Result<f64> {
    let (mean, s2) = state.fit.predict_mean_s2(x)?;
    evaluate_with_prediction(state, spec, mean, s2)
}

/// Evaluate from an already-computed prediction `(mean, s2)` at the point;
/// candidate scoring uses this with batched variance solves.
pub fn evaluate_with_prediction(
    state: &AcqState,
    spec: &AcqSpec,
    mean: f64,
    s2: f64,
) -> Result<f64> {
    let s = s2.max(0.0).sqrt();
    let improvement = state.y_star - mean;
    let tol = state.scale_tol();
    match spec.method {
        AcqMethod::EiOk | AcqMethod::EiUk => {
            let sigma_s = state.fit.sigma2_hat().sqrt() * s;
            if sigma_s < tol {
                Ok(improvement.max(0.0))
            } else {
                Ok(ei_value(improvement, sigma_s))
            }
        }
        AcqMethod::Hei => {
            let prior = state
                .prior
                .as_ref()
                .ok_or_else(|| Error::invalid("hierarchical criterion needs a variance prior"))?;
            let df = 2.0 * prior.a + (state.fit.n() as f64 - state.fit.q() as f64);
            let (_, _, sigma_tilde2) = posterior_variance_params(state.fit, prior);
            let scale = sigma_tilde2.sqrt() * s;
            if scale < tol {
                if df <= 2.0 {
                    return Err(Error::DegreesOfFreedom { df, min: 2.0 });
                }
                Ok(improvement.max(0.0))
            } else {
                hei_value(improvement, scale, df)
            }
        }
        AcqMethod::Sei { a, b } => {
            let prior = HierPrior::new(a, b)?;
            let df = 2.0 * prior.a + (state.fit.n() as f64 - state.fit.q() as f64);
            let (_, _, sigma_tilde2) = posterior_variance_params(state.fit, &prior);
            let scale = sigma_tilde2.sqrt() * s;
            if scale < tol {
                if df <= 1.0 {
                    return Err(Error::DegreesOfFreedom { df, min: 1.0 });
                }
                Ok(improvement.max(0.0))
            } else {
                sei_value(improvement, scale, df)
            }
        }
        AcqMethod::Ucb { mult } => Ok(ucb_score(mean, state.fit.sigma2_hat().sqrt() * s, mult)),
    }
}
