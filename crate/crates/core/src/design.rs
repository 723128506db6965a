//! Space-filling initial designs and box-domain scaling: centered maximin
//! Latin hypercube construction by random restarts plus pairwise row-swap
//! hill-climbing, deterministic given the seed.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Rectangular feasible domain `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "domain bounds must be finite with lower < upper; coordinate {i} has [{lo}, {hi}]"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Domain { lower: vec![0.0; d], upper: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    /// Affine map from unit-cube coordinates into the domain.
    pub fn from_unit_point(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u.len())?;
        Ok(u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&lo, &hi))| lo + t * (hi - lo))
            .collect())
    }

    /// Inverse of [`Domain::from_unit_point`].
    pub fn to_unit_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (v - lo) / (hi - lo))
            .collect())
    }

    /// Rowwise affine map of a point matrix out of the unit cube.
    pub fn from_unit(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(points.ncols())?;
        let mut out = points.clone();
        for j in 0..self.dim() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            for i in 0..out.nrows() {
                out[(i, j)] = lo + out[(i, j)] * (hi - lo);
            }
        }
        Ok(out)
    }

    /// Rowwise affine map of a point matrix into the unit cube.
    pub fn to_unit(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(points.ncols())?;
        let mut out = points.clone();
        for j in 0..self.dim() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            for i in 0..out.nrows() {
                out[(i, j)] = (out[(i, j)] - lo) / (hi - lo);
            }
        }
        Ok(out)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }
}

/// Default number of random restarts for the maximin search.
pub const LHD_RESTARTS: usize = 50;

/// Smallest Euclidean distance between any two rows.
pub fn min_pairwise_dist(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for k in (i + 1)..n {
            let mut s = 0.0;
            for j in 0..points.ncols() {
                let dx = points[(i, j)] - points[(k, j)];
                s += dx * dx;
            }
            best = best.min(s);
        }
    }
    best.sqrt()
}

/// One centered Latin hypercube: every column is a random permutation of
/// the cell midpoints `(k - 0.5)/n`.
fn random_lhd(n: usize, d: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        // Fisher-Yates shuffle.
        for i in (1..n).rev() {
            let k = rng.random_range(0..=i);
            perm.swap(i, k);
        }
        for i in 0..n {
            out[(i, j)] = (perm[i] as f64 + 0.5) / n as f64;
        }
    }
    out
}

/// Squared distances between all rows, with `+inf` on the diagonal so row
/// minima ignore it.
fn sq_dist_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut dmat = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        for k in (i + 1)..n {
            let mut s = 0.0;
            for j in 0..x.ncols() {
                let dx = x[(i, j)] - x[(k, j)];
                s += dx * dx;
            }
            dmat[(i, k)] = s;
            dmat[(k, i)] = s;
        }
    }
    dmat
}

/// Per-row three smallest squared distances with their partner indices.
/// Two rows change per swap, so the third entry guarantees an exact row
/// minimum under any two exclusions.
#[derive(Clone, Copy)]
struct RowMins {
    d: [f64; 3],
    p: [usize; 3],
}

impl RowMins {
    fn scan(dmat: &DMatrix<f64>, row: usize) -> Self {
        let mut m = RowMins { d: [f64::INFINITY; 3], p: [usize::MAX; 3] };
        for k in 0..dmat.nrows() {
            if k != row {
                m.insert(dmat[(row, k)], k);
            }
        }
        m
    }

    fn insert(&mut self, v: f64, partner: usize) {
        if v < self.d[0] {
            self.d = [v, self.d[0], self.d[1]];
            self.p = [partner, self.p[0], self.p[1]];
        } else if v < self.d[1] {
            self.d = [self.d[0], v, self.d[1]];
            self.p = [self.p[0], partner, self.p[1]];
        } else if v < self.d[2] {
            self.d[2] = v;
            self.p[2] = partner;
        }
    }

    fn contains_partner(&self, a: usize, b: usize) -> bool {
        self.p.iter().any(|&p| p == a || p == b)
    }

    /// Row minimum over partners other than `a` and `b`.
    fn min_excluding(&self, a: usize, b: usize) -> f64 {
        for t in 0..3 {
            if self.p[t] != a && self.p[t] != b {
                return self.d[t];
            }
        }
        f64::INFINITY
    }
}

struct SwapSearch {
    x: DMatrix<f64>,
    dmat: DMatrix<f64>,
    mins: Vec<RowMins>,
    gmin: f64,
}

impl SwapSearch {
    fn new(x: DMatrix<f64>) -> Self {
        let dmat = sq_dist_matrix(&x);
        let n = x.nrows();
        let mins: Vec<RowMins> = (0..n).map(|i| RowMins::scan(&dmat, i)).collect();
        let gmin = mins.iter().map(|m| m.d[0]).fold(f64::INFINITY, f64::min);
        SwapSearch { x, dmat, mins, gmin }
    }

    /// Squared distances from rows `i1` and `i2` to every other row after
    /// swapping their entries in column `j`, plus the minima over each.
    fn proposed_rows(&self, j: usize, i1: usize, i2: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.x.nrows();
        let (a, b) = (self.x[(i1, j)], self.x[(i2, j)]);
        let mut u = vec![f64::INFINITY; n];
        let mut v = vec![f64::INFINITY; n];
        let mut affected_min = f64::INFINITY;
        for k in 0..n {
            if k == i1 || k == i2 {
                continue;
            }
            let c = self.x[(k, j)];
            let nu = self.dmat[(i1, k)] - (a - c) * (a - c) + (b - c) * (b - c);
            let nv = self.dmat[(i2, k)] - (b - c) * (b - c) + (a - c) * (a - c);
            u[k] = nu;
            v[k] = nv;
            affected_min = affected_min.min(nu).min(nv);
        }
        // The i1-i2 distance itself is unchanged by the swap.
        affected_min = affected_min.min(self.dmat[(i1, i2)]);
        (u, v, affected_min)
    }

    /// Minimum over all pairs not touching rows `i1` or `i2`.
    fn rest_min(&self, i1: usize, i2: usize) -> f64 {
        let mut rest = f64::INFINITY;
        for (k, m) in self.mins.iter().enumerate() {
            if k != i1 && k != i2 {
                rest = rest.min(m.min_excluding(i1, i2));
            }
        }
        rest
    }

    /// Try swapping rows `i1`/`i2` in column `j`; keep the swap only if it
    /// strictly increases the minimum pairwise distance.
    fn try_swap(&mut self, j: usize, i1: usize, i2: usize) {
        let (u, v, affected_min) = self.proposed_rows(j, i1, i2);
        // A swap can only help when the bottleneck pair touches a swapped
        // row; otherwise the global minimum is unchanged or worse.
        if affected_min <= self.gmin {
            return;
        }
        let candidate = self.rest_min(i1, i2).min(affected_min);
        if candidate <= self.gmin {
            return;
        }
        // Accept: write the swapped column entries and the two distance
        // rows, then repair the per-row minima.
        let n = self.x.nrows();
        let tmp = self.x[(i1, j)];
        self.x[(i1, j)] = self.x[(i2, j)];
        self.x[(i2, j)] = tmp;
        for k in 0..n {
            if k == i1 || k == i2 {
                continue;
            }
            self.dmat[(i1, k)] = u[k];
            self.dmat[(k, i1)] = u[k];
            self.dmat[(i2, k)] = v[k];
            self.dmat[(k, i2)] = v[k];
        }
        self.mins[i1] = RowMins::scan(&self.dmat, i1);
        self.mins[i2] = RowMins::scan(&self.dmat, i2);
        for k in 0..n {
            if k == i1 || k == i2 {
                continue;
            }
            if self.mins[k].contains_partner(i1, i2) {
                self.mins[k] = RowMins::scan(&self.dmat, k);
            } else {
                self.mins[k].insert(u[k], i1);
                self.mins[k].insert(v[k], i2);
            }
        }
        self.gmin = candidate;
    }
}

/// Build an `n`-point maximin Latin hypercube in the unit cube:
/// `restarts` random centered hypercubes, each improved by `10 n^2`
/// proposed pairwise row swaps, keeping the best final design by minimum
/// pairwise distance. Deterministic given `seed`. Requires `n >= 2` and
/// `d >= 1`.
pub fn maximin_lhd(n: usize, d: usize, seed: u64, restarts: usize) -> DMatrix<f64> {
    assert!(n >= 2, "a Latin hypercube needs at least two points");
    assert!(d >= 1, "dimension must be at least one");
    assert!(restarts >= 1, "at least one restart required");
    let swaps = 10 * n * n;
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for r in 0..restarts {
        let restart_seed = seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha12Rng::seed_from_u64(restart_seed);
        let mut search = SwapSearch::new(random_lhd(n, d, &mut rng));
        for _ in 0..swaps {
            let j = rng.random_range(0..d);
            let i1 = rng.random_range(0..n);
            let mut i2 = rng.random_range(0..n - 1);
            if i2 >= i1 {
                i2 += 1;
            }
            search.try_swap(j, i1, i2);
        }
        if best.as_ref().is_none_or(|(g, _)| search.gmin > *g) {
            best = Some((search.gmin, search.x));
        }
    }
    best.expect("at least one restart").1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_valid_lhd(x: &DMatrix<f64>) {
        let n = x.nrows();
        for j in 0..x.ncols() {
            let mut col: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (k, &v) in col.iter().enumerate() {
                let want = (k as f64 + 0.5) / n as f64;
                assert!((v - want).abs() < 1e-15, "column {j} is not a midpoint permutation");
            }
        }
    }

    #[test]
    fn two_point_one_dim_is_forced() {
        for seed in 0..5 {
            let x = maximin_lhd(2, 1, seed, 3);
            let mut vals = [x[(0, 0)], x[(1, 0)]];
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(vals, [0.25, 0.75]);
        }
    }

    #[test]
    fn columns_are_midpoint_permutations() {
        for &(n, d, seed) in &[(7usize, 3usize, 1u64), (12, 2, 9), (20, 6, 123), (5, 1, 4)] {
            let x = maximin_lhd(n, d, seed, 5);
            assert_eq!((x.nrows(), x.ncols()), (n, d));
            assert_valid_lhd(&x);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = maximin_lhd(15, 3, 777, 10);
        let b = maximin_lhd(15, 3, 777, 10);
        assert_eq!(a, b);
        let c = maximin_lhd(15, 3, 778, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn beats_median_of_random_designs() {
        let n = 4;
        let d = 2;
        let ours = min_pairwise_dist(&maximin_lhd(n, d, 42, LHD_RESTARTS));
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let mut dists: Vec<f64> =
            (0..1000).map(|_| min_pairwise_dist(&random_lhd(n, d, &mut rng))).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (dists[499] + dists[500]);
        assert!(
            ours >= median,
            "maximin design ({ours}) does not beat the random median ({median})"
        );
    }

    #[test]
    fn hill_climb_never_hurts_and_bookkeeping_stays_exact() {
        // The incremental search must agree with a brute-force recompute.
        for seed in [3u64, 17, 56] {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let start = random_lhd(9, 3, &mut rng);
            let start_min = min_pairwise_dist(&start);
            let mut search = SwapSearch::new(start);
            for _ in 0..2000 {
                let j = rng.random_range(0..3);
                let i1 = rng.random_range(0..9);
                let mut i2 = rng.random_range(0..8);
                if i2 >= i1 {
                    i2 += 1;
                }
                search.try_swap(j, i1, i2);
            }
            let end_min = min_pairwise_dist(&search.x);
            assert!(end_min + 1e-15 >= start_min, "hill climb decreased the minimum distance");
            assert!(
                (search.gmin.sqrt() - end_min).abs() < 1e-12,
                "incremental minimum drifted from the true value"
            );
            assert_valid_lhd(&search.x);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn any_seed_and_shape_yields_a_latin_hypercube(
            n in 2usize..32,
            d in 1usize..6,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let x = maximin_lhd(n, d, seed, 2);
            proptest::prop_assert_eq!((x.nrows(), x.ncols()), (n, d));
            assert_valid_lhd(&x);
        }
    }

    #[test]
    fn domain_scaling_round_trips() {
        let dom = Domain::new(vec![-5.0, 0.0, 10.0], vec![5.0, 2.0, 110.0]).unwrap();
        let x = maximin_lhd(8, 3, 5, 3);
        let scaled = dom.from_unit(&x).unwrap();
        let back = dom.to_unit(&scaled).unwrap();
        for i in 0..8 {
            for j in 0..3 {
                assert!((back[(i, j)] - x[(i, j)]).abs() <= 1e-12);
                assert!(scaled[(i, j)] >= dom.lower()[j] && scaled[(i, j)] <= dom.upper()[j]);
            }
        }
    }

    #[test]
    fn domain_corners_and_midpoint() {
        let dom = Domain::new(vec![-1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(dom.from_unit_point(&[0.0, 0.0]).unwrap(), vec![-1.0, 2.0]);
        assert_eq!(dom.from_unit_point(&[1.0, 1.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(dom.from_unit_point(&[0.5, 0.5]).unwrap(), vec![1.0, 3.0]);
        let unit = Domain::unit(2);
        assert_eq!(unit.from_unit_point(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(dom.contains(&[0.0, 3.0]));
        assert!(!dom.contains(&[0.0, 5.0]));
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::new(vec![0.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![f64::NAN], vec![1.0]).is_err());
        let dom = Domain::new(vec![0.0], vec![1.0]).unwrap();
        assert!(dom.from_unit_point(&[0.5, 0.5]).is_err());
    }
}
