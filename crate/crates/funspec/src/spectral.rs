//! The operator-valued spectral measure: a gridded density part plus
//! finitely many atoms, the lag-window estimate from covariances, the exact
//! inverse Fourier sum back to lag operators, the scalar trace measure, and
//! periodogram-based atom detection.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{transform_rows, Direction};
use crate::grid::{require_same_grid, FuncSeries, Grid};
use crate::operator::Op;
use crate::covariance::LagCovSequence;

/// Map a frequency to the principal interval `(-pi, pi]`.
pub fn wrap_frequency(omega: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = (omega + PI).rem_euclid(two_pi);
    if y == 0.0 {
        y = two_pi;
    }
    y - PI
}

/// Lag windows for the smoothed Fourier sum. Fejér is the Cesàro mean and
/// keeps the estimate nonnegative definite before any projection; Bartlett
/// here is the order-(q+1) variant so the two choices differ at every lag;
/// Parzen is the classical cubic taper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagWindow {
    Fejer,
    Bartlett,
    Parzen,
}

impl LagWindow {
    /// Weight for lag `h` at bandwidth `q`; weight at lag 0 is 1.
    pub fn weight(&self, h: usize, q: usize) -> f64 {
        let x = h as f64 / q as f64;
        match self {
            LagWindow::Fejer => (1.0 - x).max(0.0),
            LagWindow::Bartlett => (1.0 - h as f64 / (q as f64 + 1.0)).max(0.0),
            LagWindow::Parzen => {
                if x <= 0.5 {
                    1.0 - 6.0 * x * x + 6.0 * x * x * x
                } else if x <= 1.0 {
                    2.0 * (1.0 - x).powi(3)
                } else {
                    0.0
                }
            }
        }
    }
}

/// A point mass of the spectral measure: frequency and PSD jump operator.
#[derive(Debug, Clone)]
pub struct SpectralAtom {
    pub omega: f64,
    pub jump: Op,
}

/// Discretized operator-valued spectral measure on `(-pi, pi]`: PSD density
/// operators on the uniform grid `omega_k = -pi + 2 pi (k+1)/K` plus a
/// finite sorted list of atoms. Intervals use the right-continuous
/// convention: the cell owned by `omega_k` is `(omega_k - dw, omega_k]`.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    grid: Arc<Grid>,
    densities: Vec<Op>,
    atoms: Vec<SpectralAtom>,
    real_process: bool,
    pole_filled: Option<usize>,
}

impl SpectralMeasure {
    pub fn new(
        grid: Arc<Grid>,
        densities: Vec<Op>,
        mut atoms: Vec<SpectralAtom>,
        real_process: bool,
    ) -> Result<SpectralMeasure> {
        if densities.is_empty() {
            return Err(Error::invalid("spectral measure needs at least one frequency cell"));
        }
        for d in &densities {
            require_same_grid(&grid, d.grid())?;
            if !d.is_hermitian() {
                return Err(Error::NotHermitian { max_asymmetry: f64::NAN });
            }
        }
        atoms.sort_by(|a, b| a.omega.partial_cmp(&b.omega).expect("finite atom frequency"));
        for (i, a) in atoms.iter().enumerate() {
            if !(a.omega > -PI && a.omega <= PI) {
                return Err(Error::invalid(format!("atom frequency {} outside (-pi, pi]", a.omega)));
            }
            require_same_grid(&grid, a.jump.grid())?;
            if !a.jump.is_hermitian() {
                return Err(Error::NotHermitian { max_asymmetry: f64::NAN });
            }
            if i > 0 && a.omega == atoms[i - 1].omega {
                return Err(Error::invalid(format!("duplicate atom frequency {}", a.omega)));
            }
        }
        let sm = SpectralMeasure { grid, densities, atoms, real_process, pole_filled: None };
        if real_process {
            sm.check_real_symmetry()?;
        }
        Ok(sm)
    }

    pub(crate) fn with_pole_filled(mut self, k: Option<usize>) -> SpectralMeasure {
        self.pole_filled = k;
        self
    }

    fn check_real_symmetry(&self) -> Result<()> {
        let k = self.num_freqs();
        if k % 2 != 0 {
            return Err(Error::invalid(
                "real-process symmetry requires an even number of frequency cells",
            ));
        }
        let scale = self
            .densities
            .iter()
            .flat_map(|d| d.kernel().iter())
            .fold(0.0f64, |m, v| m.max(v.norm()))
            .max(1e-300);
        for idx in 0..k - 1 {
            let partner = k - idx - 2;
            if partner < idx {
                break;
            }
            let a = self.densities[idx].kernel();
            let b = self.densities[partner].kernel();
            let mut worst = 0.0f64;
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x.conj() - y).norm());
            }
            if worst > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "density symmetry F(-w) = conj F(w) violated at cell {idx} (defect {worst:.3e})"
                )));
            }
        }
        for atom in &self.atoms {
            if atom.omega == PI || atom.omega == 0.0 {
                continue;
            }
            let partner = self
                .atoms
                .iter()
                .find(|a| (a.omega + atom.omega).abs() <= 1e-12)
                .ok_or_else(|| {
                    Error::invalid(format!("atom at {} lacks a mirror at {}", atom.omega, -atom.omega))
                })?;
            let defect = atom
                .jump
                .kernel()
                .iter()
                .zip(partner.jump.kernel().iter())
                .fold(0.0f64, |m, (x, y)| m.max((x.conj() - y).norm()));
            let s = atom.jump.kernel().iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
            if defect > 1e-10 * s {
                return Err(Error::invalid(format!(
                    "atom pair at ±{} must carry conjugate jumps",
                    atom.omega.abs()
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of frequency cells K.
    pub fn num_freqs(&self) -> usize {
        self.densities.len()
    }

    /// Cell width `2 pi / K`.
    pub fn delta(&self) -> f64 {
        2.0 * PI / self.num_freqs() as f64
    }

    /// Frequency owned by cell `k`.
    pub fn omega(&self, k: usize) -> f64 {
        -PI + 2.0 * PI * (k as f64 + 1.0) / self.num_freqs() as f64
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.num_freqs()).map(|k| self.omega(k)).collect()
    }

    pub fn density(&self, k: usize) -> &Op {
        &self.densities[k]
    }

    pub fn densities(&self) -> &[Op] {
        &self.densities
    }

    pub fn atoms(&self) -> &[SpectralAtom] {
        &self.atoms
    }

    pub fn is_real_process(&self) -> bool {
        self.real_process
    }

    /// Index of the cell whose density was interpolated over a pole, if any.
    pub fn pole_filled(&self) -> Option<usize> {
        self.pole_filled
    }

    /// Index of the grid frequency nearest to `omega` (wrapped).
    pub fn nearest_index(&self, omega: f64) -> usize {
        let k = self.num_freqs();
        let u = (wrap_frequency(omega) + PI) / self.delta();
        let r = u.round() as i64 - 1;
        if r < 0 {
            k - 1
        } else {
            (r as usize).min(k - 1)
        }
    }

    /// Total trace mass `trace F((-pi, pi])`.
    pub fn total_mass(&self) -> f64 {
        let dw = self.delta();
        let dens: f64 = self.densities.iter().map(|d| d.trace().re).sum::<f64>() * dw;
        let atoms: f64 = self.atoms.iter().map(|a| a.jump.trace().re).sum();
        dens + atoms
    }

    /// Verify every density and atom is PSD within tolerance. O(K N^3); used
    /// by tests and the file reader rather than on every construction.
    pub fn validate_psd(&self) -> Result<()> {
        for (k, d) in self.densities.iter().enumerate() {
            d.clone().certify_psd().map_err(|e| {
                Error::invalid(format!("density at cell {k} is not PSD: {e}"))
            })?;
        }
        for a in &self.atoms {
            a.jump.clone().certify_psd().map_err(|e| {
                Error::invalid(format!("atom at {} is not PSD: {e}", a.omega))
            })?;
        }
        Ok(())
    }
}

/// Smoothed lag-window estimate of the spectral density part:
/// `F_k = (1/2pi) sum_{|h| <= q} kappa(h/q) C_h e^{-i h omega_k}`, each cell
/// projected onto the PSD cone afterwards. Atoms are never produced here.
pub fn herglotz_forward(
    lagcov: &LagCovSequence,
    num_freqs: usize,
    bandwidth: usize,
    window: LagWindow,
) -> Result<SpectralMeasure> {
    if bandwidth == 0 {
        return Err(Error::invalid("bandwidth q must be >= 1"));
    }
    if bandwidth > lagcov.max_lag() {
        return Err(Error::invalid(format!(
            "bandwidth q = {bandwidth} exceeds max_lag = {}",
            lagcov.max_lag()
        )));
    }
    if num_freqs < 2 * bandwidth + 2 {
        return Err(Error::invalid(format!(
            "frequency grid K = {num_freqs} too small; need K >= 2q+2 = {} to avoid aliasing",
            2 * bandwidth + 2
        )));
    }
    let grid = lagcov.grid().clone();
    let weighted: Vec<DMatrix<Complex64>> = (0..=bandwidth)
        .map(|h| lagcov.ops()[h].kernel() * Complex64::new(window.weight(h, bandwidth), 0.0))
        .collect();
    let real_input = lagcov.ops().iter().all(|op| op.kernel().iter().all(|v| v.im == 0.0));

    let k_total = num_freqs;
    let densities: Result<Vec<Op>> = (0..k_total)
        .into_par_iter()
        .map(|k| {
            let omega = -PI + 2.0 * PI * (k as f64 + 1.0) / k_total as f64;
            let mut acc = weighted[0].clone();
            for (h, mat) in weighted.iter().enumerate().skip(1) {
                let phase = Complex64::from_polar(1.0, -(h as f64) * omega);
                // C_h e^{-ih w} + C_h^H e^{+ih w}
                acc += mat * phase + (mat * phase).adjoint();
            }
            acc /= Complex64::new(2.0 * PI, 0.0);
            Op::new(grid.clone(), acc)?.psd_project()
        })
        .collect();
    let densities = densities?;

    SpectralMeasure::new(grid, densities, Vec::new(), real_input && k_total % 2 == 0)
}

/// Inverse transform `C_h = sum_k e^{i h omega_k} F_k dw + sum_l e^{i h
/// omega_l} J_l`. Exact for band-limited densities thanks to discrete
/// Fourier orthogonality on the uniform grid.
pub fn herglotz_inverse(sm: &SpectralMeasure, h: i64) -> Result<Op> {
    let k_total = sm.num_freqs() as i64;
    if 2 * h.abs() > k_total {
        return Err(Error::LagOutOfRange { lag: h, max: k_total / 2 });
    }
    let n = sm.grid().len();
    let dw = sm.delta();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(n, n);
    for k in 0..sm.num_freqs() {
        let phase = Complex64::from_polar(dw, h as f64 * sm.omega(k));
        acc += sm.density(k).kernel() * phase;
    }
    for atom in sm.atoms() {
        let phase = Complex64::from_polar(1.0, h as f64 * atom.omega);
        acc += atom.jump.kernel() * phase;
    }
    let mut op = Op::new(sm.grid().clone(), acc)?;
    if h == 0 {
        // sum of PSD terms with positive weights
        op = op.certify_psd()?;
    }
    Ok(op)
}

/// Scalar trace measure of the interval `(a, b]`:
/// `sum_{omega_k in (a,b]} trace(F_k) dw + sum_{omega_l in (a,b]} trace(J_l)`.
pub fn trace_measure(sm: &SpectralMeasure, a: f64, b: f64) -> Result<f64> {
    if !(a >= -PI && b <= PI) {
        return Err(Error::invalid("interval must lie inside [-pi, pi]"));
    }
    if a > b {
        return Err(Error::invalid("interval endpoints out of order"));
    }
    let dw = sm.delta();
    let mut acc = 0.0;
    for k in 0..sm.num_freqs() {
        let w = sm.omega(k);
        if w > a && w <= b {
            acc += sm.density(k).trace().re * dw;
        }
    }
    for atom in sm.atoms() {
        if atom.omega > a && atom.omega <= b {
            acc += atom.jump.trace().re;
        }
    }
    Ok(acc)
}

/// An atom flagged by the periodogram scan.
#[derive(Debug, Clone)]
pub struct DetectedAtom {
    pub omega: f64,
    /// Rank-one jump estimate: the periodogram operator scaled by `1/T`.
    pub jump: Op,
    /// Periodogram trace over the flagging threshold, for reporting.
    pub excess_ratio: f64,
}

/// Scan the functional periodogram for spectral atoms.
///
/// The trace of the periodogram at each Fourier frequency is compared with
/// the median over its `2m` neighbors scaled by `-ln(2 alpha / T)`, the
/// union-bound threshold for level `alpha` under an exponential null. The
/// null model is a pragmatic heuristic: periodogram traces of multi-mode
/// functional white noise are lighter-tailed than exponential, so the bound
/// is conservative there.
pub fn detect_atoms(
    series: &FuncSeries,
    alpha: f64,
    neighborhood: usize,
) -> Result<Vec<DetectedAtom>> {
    let t = series.len();
    if t < 64 {
        return Err(Error::invalid(format!("series length {t} too short; need T >= 64")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0,1)"));
    }
    if neighborhood == 0 || 2 * neighborhood + 1 > t {
        return Err(Error::invalid("neighborhood m out of range"));
    }
    let spec = transform_rows(series.data(), Direction::Forward);
    let w = series.grid().weights();
    let n = series.dim();
    let t_f = t as f64;
    // trace of (1/T) (Xhat (x) Xhat) at each Fourier frequency
    let traces: Vec<f64> = (0..t)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += w[i] * spec[(i, j)].norm_sqr();
            }
            acc / t_f
        })
        .collect();

    let factor = -(alpha * 2.0 / t_f).ln();
    let mut flagged = Vec::new();
    let mut neigh = vec![0.0f64; 2 * neighborhood];
    for j in 0..t {
        for (idx, off) in (1..=neighborhood).flat_map(|d| [d as i64, -(d as i64)]).enumerate() {
            let jj = (j as i64 + off).rem_euclid(t as i64) as usize;
            neigh[idx] = traces[jj];
        }
        neigh.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = 0.5 * (neigh[neighborhood - 1] + neigh[neighborhood]);
        if traces[j] > factor * med {
            let omega = wrap_frequency(2.0 * PI * j as f64 / t_f);
            let col = spec.column(j);
            let kernel =
                DMatrix::from_fn(n, n, |a, b| col[a] * col[b].conj() / Complex64::new(t_f * t_f, 0.0));
            let jump = Op::new(series.grid().clone(), kernel)?.mark_psd();
            let excess_ratio = if med > 0.0 { traces[j] / (factor * med) } else { f64::INFINITY };
            flagged.push(DetectedAtom { omega, jump, excess_ratio });
        }
    }
    flagged.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    Ok(flagged)
}
