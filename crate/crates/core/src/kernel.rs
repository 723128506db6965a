//! Stationary correlation kernels with anisotropic length-scales.
//!
//! All kernels are functions of the scaled distance
//! `r = || (x - z) / theta ||_2` (elementwise division), so `K(x, x) = 1`
//! and the process variance is carried separately by the GP layer.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Default jitter added to the correlation-matrix diagonal.
pub const NUGGET_DEFAULT: f64 = 1e-8;
/// Ceiling for nugget escalation; factorization failures beyond this are
/// reported as conditioning errors.
pub const NUGGET_MAX: f64 = 1e-4;

/// Supported stationary correlation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Matern12,
    Matern32,
    Matern52,
    SquaredExponential,
}

impl KernelFamily {
    /// Correlation as a function of the scaled distance `r >= 0`.
    pub fn corr_at(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern12 => (-r).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = 5f64.sqrt() * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
        }
    }

    /// Canonical lowercase name, used by the CLI and serialized output.
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::SquaredExponential => "sqexp",
        }
    }

    /// Parse a canonical family name.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "matern12" => Ok(KernelFamily::Matern12),
            "matern32" => Ok(KernelFamily::Matern32),
            "matern52" => Ok(KernelFamily::Matern52),
            "sqexp" => Ok(KernelFamily::SquaredExponential),
            other => Err(Error::invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A kernel family together with per-coordinate length-scales.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub family: KernelFamily,
    theta: Vec<f64>,
}

impl KernelSpec {
    /// Build a spec, validating that every length-scale is finite and > 0.
    pub fn new(family: KernelFamily, theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("theta must be non-empty"));
        }
        if theta.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::invalid(format!(
                "length-scales must be finite and positive, got {theta:?}"
            )));
        }
        Ok(KernelSpec { family, theta })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Scaled Euclidean distance between two points.
fn scaled_dist(theta: &[f64], x: &[f64], z: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for k in 0..theta.len() {
        let u = (x[k] - z[k]) / theta[k];
        r2 += u * u;
    }
    r2.sqrt()
}

/// Correlation between two points.
pub fn correlate(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() || z.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x.len().max(z.len()),
        });
    }
    Ok(spec.family.corr_at(scaled_dist(&spec.theta, x, z)))
}

/// Correlations between every row of `data` (n x d, points as rows) and a
/// single point `x`.
pub fn corr_vector(spec: &KernelSpec, data: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    if data.ncols() != spec.dim() || x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: data.ncols().max(x.len()),
        });
    }
    let n = data.nrows();
    let d = spec.dim();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut r2 = 0.0;
        for k in 0..d {
            let u = (data[(i, k)] - x[k]) / spec.theta[k];
            r2 += u * u;
        }
        out[i] = spec.family.corr_at(r2.sqrt());
    }
    Ok(out)
}

/// Packed per-coordinate squared differences for all row pairs of a design.
/// Cached once per design so that repeated correlation-matrix builds during
/// length-scale search only pay for scaling and the kernel profile.
#[derive(Debug, Clone)]
pub struct PairDiffs {
    n: usize,
    d: usize,
    /// Row-pair major: entry `[pair * d + k] = (x_ik - x_jk)^2` for i < j.
    sq: Vec<f64>,
}

impl PairDiffs {
    pub fn new(data: &DMatrix<f64>) -> Self {
        let n = data.nrows();
        let d = data.ncols();
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * d);
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..d {
                    let u = data[(i, k)] - data[(j, k)];
                    sq.push(u * u);
                }
            }
        }
        PairDiffs { n, d, sq }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

/// A successfully factorized correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrFactor {
    /// Lower-triangular Cholesky factor of `K + nugget I`.
    pub chol: Cholesky<f64, Dyn>,
    /// The nugget actually used (after any escalation).
    pub nugget: f64,
    /// `log det (K + nugget I)`.
    pub logdet: f64,
}

/// Build the dense correlation matrix for a design (without nugget).
fn build_corr(spec: &KernelSpec, data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let d = data.ncols();
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut r2 = 0.0;
            for c in 0..d {
                let u = (data[(i, c)] - data[(j, c)]) / spec.theta[c];
                r2 += u * u;
            }
            let v = spec.family.corr_at(r2.sqrt());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Build the dense correlation matrix from cached pair differences.
fn build_corr_cached(family: KernelFamily, theta: &[f64], diffs: &PairDiffs) -> DMatrix<f64> {
    let n = diffs.n;
    let d = diffs.d;
    let inv2: Vec<f64> = theta.iter().map(|t| 1.0 / (t * t)).collect();
    let mut mat = DMatrix::identity(n, n);
    let mut p = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let base = p * d;
            let mut r2 = 0.0;
            for k in 0..d {
                r2 += diffs.sq[base + k] * inv2[k];
            }
            let v = family.corr_at(r2.sqrt());
            mat[(i, j)] = v;
            mat[(j, i)] = v;
            p += 1;
        }
    }
    mat
}

/// Attempt Cholesky factorizations with nugget escalation: start from the
/// given nugget and multiply by 10 (capped at [`NUGGET_MAX`]) until the
/// factorization succeeds. A zero nugget is attempted exactly once, so
/// degenerate designs passed with `nugget = 0` fail rather than being
/// silently regularized.
fn factorize_with_escalation(mut mat: DMatrix<f64>, nugget: f64) -> Result<CorrFactor> {
    if !(nugget.is_finite() && nugget >= 0.0) {
        return Err(Error::invalid(format!("nugget must be >= 0, got {nugget}")));
    }
    let n = mat.nrows();
    let mut current = nugget;
    for i in 0..n {
        mat[(i, i)] += current;
    }
    loop {
        if let Some(factor) = try_cholesky(&mat) {
            let logdet = 2.0 * factor.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            return Ok(CorrFactor { chol: factor, nugget: current, logdet });
        }
        if current == 0.0 || current >= NUGGET_MAX {
            return Err(Error::Conditioning { nugget: current });
        }
        let next = (current * 10.0).min(NUGGET_MAX);
        for i in 0..n {
            mat[(i, i)] += next - current;
        }
        current = next;
    }
}

/// Cholesky with an explicit positivity check on the factor diagonal, so
/// that semi-definite edge cases are treated as failures.
fn try_cholesky(mat: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let factor = Cholesky::new(mat.clone())?;
    let ok = factor
        .l_dirty()
        .diagonal()
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
    ok.then_some(factor)
}

/// Factorized correlation matrix of a design, with nugget escalation.
pub fn corr_matrix(spec: &KernelSpec, data: &DMatrix<f64>, nugget: f64) -> Result<CorrFactor> {
    if data.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: data.ncols(),
        });
    }
    if data.nrows() == 0 {
        return Err(Error::invalid("design must contain at least one point"));
    }
    factorize_with_escalation(build_corr(spec, data), nugget)
}

/// As [`corr_matrix`] but reusing cached pair differences.
pub fn corr_matrix_cached(
    family: KernelFamily,
    theta: &[f64],
    diffs: &PairDiffs,
    nugget: f64,
) -> Result<CorrFactor> {
    if theta.len() != diffs.dim() {
        return Err(Error::DimensionMismatch {
            expected: diffs.dim(),
            got: theta.len(),
        });
    }
    factorize_with_escalation(build_corr_cached(family, theta, diffs), nugget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn spec52(theta: Vec<f64>) -> KernelSpec {
        KernelSpec::new(KernelFamily::Matern52, theta).unwrap()
    }

    #[test]
    fn matern52_unit_distance_value() {
        // (1 + sqrt5 + 5/3) exp(-sqrt5), reference 0.5239941088318203
        let s = spec52(vec![1.0]);
        let v = correlate(&s, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 0.5239941088318203, max_relative = 1e-14);
    }

    #[test]
    fn family_profiles_match_reference() {
        // Independently computed profile values at r = 0.77.
        assert_relative_eq!(
            KernelFamily::Matern12.corr_at(0.77),
            0.46301306831122807,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            KernelFamily::Matern32.corr_at(0.77),
            0.6149384623808151,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            KernelFamily::SquaredExponential.corr_at(0.77),
            0.7434527989747526,
            max_relative = 1e-14
        );
    }

    #[test]
    fn anisotropic_distance_value() {
        // x - z = (0.3, -0.4), theta = (0.5, 1.0) => r = 0.7211102550927979
        let s = spec52(vec![0.5, 1.0]);
        let v = correlate(&s, &[0.3, 0.0], &[0.0, 0.4]).unwrap();
        assert_relative_eq!(v, 0.6937298397981692, max_relative = 1e-14);
    }

    #[test]
    fn correlate_is_one_at_zero_distance_and_symmetric() {
        let s = spec52(vec![0.2, 0.9, 1.7]);
        let x = [0.1, 0.5, -0.3];
        let z = [0.7, 0.2, 0.4];
        assert_eq!(correlate(&s, &x, &x).unwrap(), 1.0);
        assert_relative_eq!(
            correlate(&s, &x, &z).unwrap(),
            correlate(&s, &z, &x).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn scale_consistency_invariant() {
        // Scaling coordinate k of both points and theta_k by c leaves the
        // correlation unchanged (up to roundoff).
        let s1 = spec52(vec![0.5, 1.0]);
        let s2 = spec52(vec![0.5, 7.0]);
        let x1 = [0.3, 0.2];
        let z1 = [0.1, 0.9];
        let x2 = [0.3, 0.2 * 7.0];
        let z2 = [0.1, 0.9 * 7.0];
        let a = correlate(&s1, &x1, &z1).unwrap();
        let b = correlate(&s2, &x2, &z2).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn far_points_decorrelate() {
        let s = spec52(vec![1.0]);
        let v = correlate(&s, &[0.0], &[20.0]).unwrap();
        assert!(v > 0.0 && v < 1e-6, "corr at r = 20 was {v}");
    }

    #[test]
    fn corr_vector_matches_pointwise() {
        let s = spec52(vec![0.4, 0.8]);
        let data = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.6, 0.9, 0.3, 0.3]);
        let x = [0.5, 0.5];
        let k = corr_vector(&s, &data, &x).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            assert_relative_eq!(k[i], correlate(&s, &row, &x).unwrap(), max_relative = 1e-15);
        }
    }

    #[test]
    fn duplicate_rows_with_zero_nugget_fail() {
        let s = spec52(vec![1.0, 1.0]);
        let data = DMatrix::from_row_slice(3, 2, &[0.2, 0.2, 0.2, 0.2, 0.8, 0.1]);
        let err = corr_matrix(&s, &data, 0.0).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }), "got {err:?}");
    }

    #[test]
    fn duplicate_rows_with_positive_nugget_factorize() {
        let s = spec52(vec![1.0, 1.0]);
        let data = DMatrix::from_row_slice(3, 2, &[0.2, 0.2, 0.2, 0.2, 0.8, 0.1]);
        let f = corr_matrix(&s, &data, 1e-8).unwrap();
        assert!(f.nugget >= 1e-8 && f.nugget <= NUGGET_MAX);
        assert!(f.logdet.is_finite());
    }

    #[test]
    fn random_design_factorizes_with_default_nugget() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let d = 10;
        let n = 50;
        let data = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
        let s = spec52(vec![0.5; d]);
        let f = corr_matrix(&s, &data, NUGGET_DEFAULT).unwrap();
        assert!(f.logdet.is_finite());
    }

    #[test]
    fn cached_build_matches_direct_build() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let data = DMatrix::from_fn(12, 3, |_, _| rng.random::<f64>());
        let theta = vec![0.3, 0.7, 1.4];
        let s = KernelSpec::new(KernelFamily::Matern32, theta.clone()).unwrap();
        let direct = corr_matrix(&s, &data, 1e-8).unwrap();
        let diffs = PairDiffs::new(&data);
        let cached = corr_matrix_cached(KernelFamily::Matern32, &theta, &diffs, 1e-8).unwrap();
        assert_relative_eq!(direct.logdet, cached.logdet, max_relative = 1e-12);
    }

    #[test]
    fn invalid_theta_rejected() {
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![0.0]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![-1.0]).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![f64::NAN]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn correlation_profiles_are_valid_and_nonincreasing(
            r1 in 0.0f64..50.0,
            r2 in 0.0f64..50.0,
        ) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            for family in [
                KernelFamily::Matern12,
                KernelFamily::Matern32,
                KernelFamily::Matern52,
                KernelFamily::SquaredExponential,
            ] {
                proptest::prop_assert!((family.corr_at(0.0) - 1.0).abs() < 1e-15);
                let c_lo = family.corr_at(lo);
                let c_hi = family.corr_at(hi);
                proptest::prop_assert!(c_lo >= 0.0 && c_lo <= 1.0);
                proptest::prop_assert!(c_hi <= c_lo + 1e-15);
            }
        }
    }
}
