//! Thin wrapper over rustfft for transforming each grid row of an N x T
//! value matrix along time. Rows are strided in column-major storage, so
//! they are staged through a contiguous scratch buffer.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// `X_k = sum_t x_t e^{-2 pi i k t / T}`
    Forward,
    /// Unnormalized `x_t = sum_k X_k e^{+2 pi i k t / T}`
    InverseUnnormalized,
}

/// Transform every row of `data` along its columns. No normalization is
/// applied in either direction.
pub(crate) fn transform_rows(data: &DMatrix<Complex64>, dir: Direction) -> DMatrix<Complex64> {
    let n = data.nrows();
    let t = data.ncols();
    let mut planner = FftPlanner::<f64>::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(t),
        Direction::InverseUnnormalized => planner.plan_fft_inverse(t),
    };
    let mut out = DMatrix::zeros(n, t);
    let mut scratch = vec![Complex64::new(0.0, 0.0); t];
    for i in 0..n {
        for j in 0..t {
            scratch[j] = data[(i, j)];
        }
        fft.process(&mut scratch);
        for j in 0..t {
            out[(i, j)] = scratch[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_round_trips() {
        let t = 24;
        let data = DMatrix::from_fn(3, t, |i, j| {
            Complex64::new((i * j) as f64 * 0.1, ((i + j) as f64).sin())
        });
        let spec = transform_rows(&data, Direction::Forward);
        let back = transform_rows(&spec, Direction::InverseUnnormalized) / Complex64::new(t as f64, 0.0);
        assert!((&data - &back).norm() < 1e-12 * data.norm());
    }

    #[test]
    fn forward_of_pure_tone_is_a_spike() {
        let t = 32;
        let k0 = 5;
        let data = DMatrix::from_fn(1, t, |_, j| {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k0 * j) as f64 / t as f64)
        });
        let spec = transform_rows(&data, Direction::Forward);
        for j in 0..t {
            let expect = if j == k0 { t as f64 } else { 0.0 };
            assert!((spec[(0, j)].norm() - expect).abs() < 1e-9, "bin {j}");
        }
    }
}
