//! Shared fixtures for the performance benchmarks: deterministic designs
//! and responses so criterion runs measure the same workload every time.

use hei_core::gp::{fit, Dataset, GpFit};
use hei_core::kernel::{KernelFamily, KernelSpec, NUGGET_DEFAULT};
use hei_core::trend::TrendModel;
use nalgebra::DMatrix;

/// Deterministic pseudo-uniform points in the unit cube (xorshift64).
pub fn fixture_points(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.max(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    };
    DMatrix::from_fn(n, d, |_, _| next())
}

/// Smooth synthetic response over the unit cube.
pub fn fixture_response(points: &DMatrix<f64>) -> Vec<f64> {
    (0..points.nrows())
        .map(|i| {
            let row = points.row(i);
            let mut v = (3.0 * row[0]).sin();
            for k in 0..points.ncols() {
                v += 0.2 * (k + 1) as f64 * row[k] * row[k];
            }
            v + 0.7 * (5.0 * row[points.ncols() - 1]).cos()
        })
        .collect()
}

/// A fitted model on `n` fixture points in `d` dimensions.
pub fn fixture_fit(n: usize, d: usize) -> GpFit {
    let points = fixture_points(n, d, 0xF17);
    let y = fixture_response(&points);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().cloned().collect()).collect();
    let data = Dataset::from_rows(&rows, &y).expect("valid fixture data");
    let kernel =
        KernelSpec::new(KernelFamily::Matern52, vec![0.4; d]).expect("valid length-scales");
    let trend = TrendModel::new(1, d).expect("valid trend");
    fit(&data, &kernel, &trend, NUGGET_DEFAULT).expect("fixture fit succeeds")
}
