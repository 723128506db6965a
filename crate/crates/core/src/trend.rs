//! Polynomial trend bases and BIC order selection.
//!
//! The basis of order `l` contains all monomials of total degree at most
//! `l` (`q = C(d + l, l)` terms). The enumeration order is part of the
//! public contract so coefficient indices are reproducible: monomials are
//! listed degree block by degree block, and within a degree block sorted by
//! descending maximum exponent, then descending lexicographic exponent
//! tuple. For order 2 this yields
//! `[1, x1..xd, x1^2..xd^2, x1 x2, x1 x3, .., x_{d-1} x_d]`,
//! and the order-`l` basis is a prefix of the order-`l+1` basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp;
use crate::kernel::KernelSpec;

/// Number of monomials of total degree <= `order` in `dim` variables,
/// i.e. the binomial coefficient C(dim + order, order).
pub fn basis_count(order: usize, dim: usize) -> usize {
    let mut c: usize = 1;
    for i in 1..=order {
        c = c * (dim + i) / i;
    }
    c
}

/// A fixed polynomial trend basis.
#[derive(Debug, Clone)]
pub struct TrendModel {
    order: usize,
    dim: usize,
    exponents: Vec<Vec<u32>>,
}

impl TrendModel {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("trend dimension must be positive"));
        }
        let mut exponents = Vec::with_capacity(basis_count(order, dim));
        for degree in 0..=order {
            let mut block = monomials_of_degree(degree as u32, dim);
            block.sort_by(|a, b| {
                let ma = a.iter().max().copied().unwrap_or(0);
                let mb = b.iter().max().copied().unwrap_or(0);
                mb.cmp(&ma).then_with(|| b.cmp(a))
            });
            exponents.extend(block);
        }
        Ok(TrendModel { order, dim, exponents })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis functions `q`.
    pub fn basis_count(&self) -> usize {
        self.exponents.len()
    }

    /// Evaluate the basis vector `p(x)`.
    pub fn basis_eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut p = DVector::zeros(self.exponents.len());
        for (idx, exps) in self.exponents.iter().enumerate() {
            let mut v = 1.0;
            for (k, &e) in exps.iter().enumerate() {
                if e > 0 {
                    v *= x[k].powi(e as i32);
                }
            }
            p[idx] = v;
        }
        Ok(p)
    }

    /// Evaluate the design matrix `P` (n x q) for a set of points (rows).
    pub fn basis_matrix(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: data.ncols() });
        }
        let n = data.nrows();
        let q = self.exponents.len();
        let mut p = DMatrix::zeros(n, q);
        let mut row = vec![0.0; self.dim];
        for i in 0..n {
            for k in 0..self.dim {
                row[k] = data[(i, k)];
            }
            let pv = self.basis_eval(&row)?;
            for j in 0..q {
                p[(i, j)] = pv[j];
            }
        }
        Ok(p)
    }

    /// Exponent tuples in enumeration order (for inspection/tests).
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }
}

/// All exponent tuples over `dim` variables of exact total degree `degree`.
fn monomials_of_degree(degree: u32, dim: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fill(&mut out, &mut current, 0, degree);
    out
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(out, current, pos + 1, remaining - e);
        current[pos] = 0;
    }
}

/// One row of the BIC selection table.
#[derive(Debug, Clone)]
pub struct BicRow {
    pub order: usize,
    pub q: usize,
    /// `-2 * profile log-likelihood + q * ln n`; `+inf` when the profile
    /// likelihood is degenerate.
    pub bic: f64,
}

/// Result of BIC-based trend order selection.
#[derive(Debug, Clone)]
pub struct BicSelection {
    pub order: usize,
    pub table: Vec<BicRow>,
}

/// Select a trend order by BIC with the kernel length-scales held fixed.
///
/// Candidates with `q >= n` are skipped as infeasible; ties (within
/// floating-point equality) resolve toward the smaller order because
/// candidates are scanned in increasing order with strict improvement.
pub fn select_order_bic(
    data: &gp::Dataset,
    kernel: &KernelSpec,
    nugget: f64,
    candidates: &[usize],
) -> Result<BicSelection> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let n = data.len();
    let d = data.dim();
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut table = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &order in &sorted {
        let q = basis_count(order, d);
        if q >= n {
            continue;
        }
        let trend = TrendModel::new(order, d)?;
        let fit = gp::fit(data, kernel, &trend, nugget)?;
        let ll = fit.profile_loglik();
        let bic = if ll.is_finite() { -2.0 * ll + q as f64 * (n as f64).ln() } else { f64::INFINITY };
        table.push(BicRow { order, q, bic });
        let better = match best {
            None => true,
            Some((_, b)) => bic < b,
        };
        if better {
            best = Some((order, bic));
        }
    }
    match best {
        Some((order, _)) => Ok(BicSelection { order, table }),
        None => Err(Error::NoFeasibleTrend { candidates: sorted, n }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_count_is_binomial() {
        assert_eq!(basis_count(0, 5), 1);
        assert_eq!(basis_count(1, 5), 6);
        assert_eq!(basis_count(2, 2), 6);
        assert_eq!(basis_count(2, 6), 28);
        assert_eq!(basis_count(2, 10), 66);
        assert_eq!(basis_count(3, 2), 10);
    }

    #[test]
    fn order2_d2_evaluation_matches_hand_values() {
        // x = (2, 3): [1, x1, x2, x1^2, x2^2, x1 x2] = [1, 2, 3, 4, 9, 6]
        let t = TrendModel::new(2, 2).unwrap();
        let p = t.basis_eval(&[2.0, 3.0]).unwrap();
        let got: Vec<f64> = p.iter().copied().collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0, 9.0, 6.0]);
    }

    #[test]
    fn order_one_is_affine() {
        let t = TrendModel::new(1, 3).unwrap();
        let p = t.basis_eval(&[0.5, -1.0, 2.0]).unwrap();
        let got: Vec<f64> = p.iter().copied().collect();
        assert_eq!(got, vec![1.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn lower_order_basis_is_prefix_of_higher() {
        for d in [1usize, 2, 3, 6] {
            let lo = TrendModel::new(1, d).unwrap();
            let hi = TrendModel::new(2, d).unwrap();
            assert_eq!(
                &hi.exponents()[..lo.basis_count()],
                lo.exponents(),
                "prefix property failed for d = {d}"
            );
        }
    }

    #[test]
    fn degree_two_block_lists_squares_before_cross_terms() {
        let t = TrendModel::new(2, 3).unwrap();
        let tail: Vec<Vec<u32>> = t.exponents()[4..].to_vec();
        assert_eq!(
            tail,
            vec![
                vec![2, 0, 0],
                vec![0, 2, 0],
                vec![0, 0, 2],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
            ]
        );
    }

    #[test]
    fn basis_matrix_rows_match_basis_eval() {
        let t = TrendModel::new(2, 2).unwrap();
        let data = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, -1.0, 0.5]);
        let p = t.basis_matrix(&data).unwrap();
        for i in 0..2 {
            let row: Vec<f64> = data.row(i).iter().copied().collect();
            let pv = t.basis_eval(&row).unwrap();
            for j in 0..t.basis_count() {
                assert_eq!(p[(i, j)], pv[j]);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let t = TrendModel::new(1, 2).unwrap();
        assert!(t.basis_eval(&[1.0]).is_err());
        assert!(t.basis_eval(&[1.0, 2.0, 3.0]).is_err());
    }
}
