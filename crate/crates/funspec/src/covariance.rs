//! Lag-covariance operators of a functional time series: the empirical
//! (biased) estimator, the block-kernel non-negative-definiteness check, and
//! the time-domain side of the spectral isometry.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{require_same_grid, FuncSeries, Grid};
use crate::operator::{Op, PSD_REL_TOL};
use crate::rng::{complex_gaussian, stream_rng, StreamDomain};
use crate::spectral::SpectralMeasure;

/// Lag covariance operators `C_h` for `h = 0..=max_lag`. Negative lags are
/// implied: `C_{-h} = adjoint(C_h)` by weak stationarity, and are never
/// stored twice.
#[derive(Debug, Clone)]
pub struct LagCovSequence {
    grid: Arc<Grid>,
    ops: Vec<Op>,
}

impl LagCovSequence {
    /// `ops[h]` is the lag-`h` operator. `C_0` must be Hermitian and PSD
    /// within tolerance.
    pub fn new(grid: Arc<Grid>, ops: Vec<Op>) -> Result<LagCovSequence> {
        if ops.is_empty() {
            return Err(Error::invalid("lag covariance sequence needs at least C_0"));
        }
        for op in &ops {
            require_same_grid(&grid, op.grid())?;
        }
        if !ops[0].is_hermitian() {
            return Err(Error::NotHermitian { max_asymmetry: f64::NAN });
        }
        let c0 = &ops[0];
        let min = c0.min_eigenvalue()?;
        let tol = PSD_REL_TOL * c0.trace_norm();
        if min < -tol {
            return Err(Error::Indefinite { min_eigenvalue: min, tolerance: -tol });
        }
        Ok(LagCovSequence { grid, ops })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn max_lag(&self) -> usize {
        self.ops.len() - 1
    }

    /// Operator at a signed lag; negative lags return the adjoint.
    pub fn op(&self, h: i64) -> Result<Op> {
        let a = h.unsigned_abs() as usize;
        if a > self.max_lag() {
            return Err(Error::LagOutOfRange { lag: h, max: self.max_lag() as i64 });
        }
        Ok(if h >= 0 { self.ops[a].clone() } else { self.ops[a].adjoint() })
    }

    /// Stored (nonnegative-lag) operators.
    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Trace of `C_h`; negative lags conjugate.
    pub fn trace(&self, h: i64) -> Result<Complex64> {
        let a = h.unsigned_abs() as usize;
        if a > self.max_lag() {
            return Err(Error::LagOutOfRange { lag: h, max: self.max_lag() as i64 });
        }
        let t = self.ops[a].trace();
        Ok(if h >= 0 { t } else { t.conj() })
    }
}

/// Biased empirical lag covariances
/// `C_h = (1/T) sum_{t=0}^{T-1-h} X_{t+h} (x) X_t`, optionally after
/// removing the sample mean curve. The divide-by-T form keeps the whole
/// block-Toeplitz kernel nonnegative definite, sample by sample.
pub fn empirical_lag_cov(series: &FuncSeries, max_lag: usize, demean: bool) -> Result<LagCovSequence> {
    let t = series.len();
    if max_lag >= t {
        return Err(Error::invalid(format!("max_lag {max_lag} must be < series length {t}")));
    }
    let owned;
    let data = if demean {
        owned = series.demeaned();
        owned.data()
    } else {
        series.data()
    };
    let n = series.dim();
    let scale = Complex64::new(1.0 / t as f64, 0.0);
    let mut ops = Vec::with_capacity(max_lag + 1);
    for h in 0..=max_lag {
        let lead = data.columns(h, t - h);
        let lag = data.columns(0, t - h);
        let kernel: DMatrix<Complex64> = (lead * lag.adjoint()) * scale;
        let mut op = Op::new(series.grid().clone(), kernel)?;
        if h == 0 {
            op = op.certify_psd()?;
        }
        ops.push(op);
    }
    LagCovSequence::new(series.grid().clone(), ops)
}

/// Outcome of the non-negative-definiteness diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct NonNegDefReport {
    /// Minimum over the probes of `Re sum_{i,j} <C_{i-j} g_j, g_i>`.
    pub min_quadratic_form: f64,
    /// Smallest eigenvalue of the n*N x n*N block Gram matrix
    /// `[C_{i-j}]` in quadrature-orthonormal coordinates.
    pub min_block_eigenvalue: f64,
    /// Largest `|Im Q| / |Q|` seen across probes; must vanish for a valid
    /// Hermitian lag structure.
    pub max_imag_ratio: f64,
}

/// Probe the kernel `c(i,j) = C_{i-j}` for non-negative definiteness, both
/// with random curve tuples and with a dense eigensolve of the block Gram
/// matrix. Probe curves have standard complex Gaussian coordinates in the
/// quadrature-orthonormal basis, drawn from seeded streams.
pub fn check_nonneg_def(
    lagcov: &LagCovSequence,
    n: usize,
    probes: usize,
    seed: u64,
) -> Result<NonNegDefReport> {
    if n == 0 {
        return Err(Error::invalid("kernel order n must be >= 1"));
    }
    if n > lagcov.max_lag() + 1 {
        return Err(Error::invalid(format!(
            "kernel order n = {n} exceeds max_lag + 1 = {}",
            lagcov.max_lag() + 1
        )));
    }
    let dim = lagcov.grid().len();
    // blocks in orthonormal coordinates for h = 0..n-1
    let tilde: Vec<DMatrix<Complex64>> =
        (0..n).map(|h| lagcov.ops()[h].to_orthonormal()).collect();

    let block = |i: usize, j: usize| -> DMatrix<Complex64> {
        if i >= j {
            tilde[i - j].clone()
        } else {
            tilde[j - i].adjoint()
        }
    };

    let mut min_q = f64::INFINITY;
    let mut max_imag = 0.0f64;
    for p in 0..probes {
        let mut rng = stream_rng(seed, StreamDomain::Probe, p as u64);
        let gs: Vec<_> = (0..n).map(|_| complex_gaussian(&mut rng, dim)).collect();
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                // <C_{i-j} g_j, g_i> in orthonormal coordinates
                let v = block(i, j) * &gs[j];
                q += gs[i].dotc(&v);
            }
        }
        let mag = q.norm();
        if mag > 0.0 {
            max_imag = max_imag.max(q.im.abs() / mag);
        }
        min_q = min_q.min(q.re);
    }
    if probes == 0 {
        min_q = 0.0;
    }

    let mut gram = DMatrix::zeros(n * dim, n * dim);
    for i in 0..n {
        for j in 0..n {
            gram.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&block(i, j));
        }
    }
    let sym = (&gram + gram.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(NonNegDefReport {
        min_quadratic_form: min_q,
        min_block_eigenvalue: min_eig,
        max_imag_ratio: max_imag,
    })
}

/// Both sides of the isometry Gram identity for finite linear combinations:
/// `lhs = sum_{i,j} a_i conj(b_j) trace(C_{t_i - t_j})` from the time domain,
/// `rhs = sum_{i,j} a_i conj(b_j) int e^{i (t_i - t_j) w} d mu(w)` from the
/// trace measure of `sm`. The caller asserts their agreement.
pub fn isometry_gram(
    lagcov: &LagCovSequence,
    sm: &SpectralMeasure,
    times: &[i64],
    coeffs_a: &[Complex64],
    coeffs_b: &[Complex64],
) -> Result<(Complex64, Complex64)> {
    require_same_grid(lagcov.grid(), sm.grid())?;
    if times.len() != coeffs_a.len() || times.len() != coeffs_b.len() {
        return Err(Error::invalid("times and coefficient sequences must share a length"));
    }
    let max_lag = lagcov.max_lag() as i64;
    for (&ti, _) in times.iter().zip(times) {
        for &tj in times {
            if (ti - tj).abs() > max_lag {
                return Err(Error::LagOutOfRange { lag: ti - tj, max: max_lag });
            }
        }
    }

    // scalar trace measure Fourier integral, m(h) = int e^{i h w} d mu(w)
    let freqs = sm.freqs();
    let dens_traces: Vec<f64> = (0..sm.num_freqs()).map(|k| sm.density(k).trace().re).collect();
    let dw = sm.delta();
    let m = |h: i64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &tr) in dens_traces.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, h as f64 * freqs[k]);
            acc += phase * tr * dw;
        }
        for atom in sm.atoms() {
            let phase = Complex64::from_polar(1.0, h as f64 * atom.omega);
            acc += phase * atom.jump.trace().re;
        }
        acc
    };

    let mut lhs = Complex64::new(0.0, 0.0);
    let mut rhs = Complex64::new(0.0, 0.0);
    for (i, &ti) in times.iter().enumerate() {
        for (j, &tj) in times.iter().enumerate() {
            let w = coeffs_a[i] * coeffs_b[j].conj();
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            lhs += w * lagcov.trace(ti - tj)?;
            rhs += w * m(ti - tj);
        }
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Func, FuncSeries, Grid};

    fn grid(n: usize) -> Arc<Grid> {
        Grid::uniform_trapezoid(n).unwrap()
    }

    fn constant_series(g: &Arc<Grid>, f: &Func, t: usize) -> FuncSeries {
        FuncSeries::from_frames(&vec![f.clone(); t]).unwrap()
    }

    #[test]
    fn constant_series_lag_cov() {
        let g = grid(16);
        let f = Func::sample(&g, |t| 1.0 + t);
        let t = 10;
        let lc = empirical_lag_cov(&constant_series(&g, &f, t), 1, false).unwrap();
        let ff = Op::tensor(&f, &f).unwrap();
        let c0 = lc.op(0).unwrap();
        assert!(c0.sub(&ff).unwrap().hs_norm() < 1e-12 * ff.hs_norm());
        let c1 = lc.op(1).unwrap();
        let expect = ff.scale_re((t - 1) as f64 / t as f64);
        assert!(c1.sub(&expect).unwrap().hs_norm() < 1e-12 * ff.hs_norm());
    }

    #[test]
    fn alternating_series_flips_sign() {
        let g = grid(16);
        let f = Func::sample(&g, |t| t + 0.5);
        let t = 12;
        let frames: Vec<Func> = (0..t)
            .map(|k| if k % 2 == 0 { f.clone() } else { f.scale(Complex64::new(-1.0, 0.0)) })
            .collect();
        let s = FuncSeries::from_frames(&frames).unwrap();
        let lc = empirical_lag_cov(&s, 1, false).unwrap();
        let expect = Op::tensor(&f, &f).unwrap().scale_re(-((t - 1) as f64) / t as f64);
        let c1 = lc.op(1).unwrap();
        assert!(c1.sub(&expect).unwrap().hs_norm() < 1e-12 * expect.hs_norm());
    }

    #[test]
    fn demeaning_kills_constant_series() {
        let g = grid(8);
        let f = Func::sample(&g, |t| 2.0 - t);
        let lc = empirical_lag_cov(&constant_series(&g, &f, 6), 1, true).unwrap();
        assert!(lc.op(0).unwrap().hs_norm() < 1e-12);
    }

    #[test]
    fn max_lag_must_be_less_than_length() {
        let g = grid(8);
        let f = Func::sample(&g, |t| t);
        let s = constant_series(&g, &f, 4);
        assert!(empirical_lag_cov(&s, 4, false).is_err());
        assert!(empirical_lag_cov(&s, 3, false).is_ok());
    }

    #[test]
    fn negative_lag_is_adjoint_exactly() {
        let g = grid(8);
        let mut rng = stream_rng(3, StreamDomain::Probe, 99);
        let frames: Vec<Func> =
            (0..32).map(|_| crate::rng::standard_complex_curve(&g, &mut rng)).collect();
        let s = FuncSeries::from_frames(&frames).unwrap();
        let lc = empirical_lag_cov(&s, 3, false).unwrap();
        for h in 1..=3i64 {
            let neg = lc.op(-h).unwrap();
            let adj = lc.op(h).unwrap().adjoint();
            assert_eq!(neg.kernel(), adj.kernel());
        }
    }

    #[test]
    fn white_noise_probe_forms_nonnegative() {
        let g = grid(12);
        let sigma = Op::random_psd(&g, 21, 0.6, 1.0).unwrap();
        let zero = Op::zero(&g);
        let lc = LagCovSequence::new(g.clone(), vec![sigma, zero.clone(), zero]).unwrap();
        let rep = check_nonneg_def(&lc, 3, 64, 7).unwrap();
        assert!(rep.min_quadratic_form >= -1e-10);
        assert!(rep.min_block_eigenvalue >= -1e-10);
        assert!(rep.max_imag_ratio <= 1e-8);
    }

    #[test]
    fn negative_c0_fails_probe() {
        let g = grid(12);
        // bypass the constructor check by probing a hand-built sequence
        let c0 = Op::scaled_identity(&g, -1.0);
        let lc = LagCovSequence { grid: g.clone(), ops: vec![c0] };
        let rep = check_nonneg_def(&lc, 1, 16, 5).unwrap();
        assert!(rep.min_quadratic_form < 0.0);
        assert!(rep.min_block_eigenvalue < 0.0);
    }

    #[test]
    fn kernel_order_out_of_range() {
        let g = grid(8);
        let lc = LagCovSequence::new(g.clone(), vec![Op::identity(&g)]).unwrap();
        assert!(check_nonneg_def(&lc, 2, 4, 0).is_err());
    }
}
