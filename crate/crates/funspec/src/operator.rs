//! Discretized linear operators on the grid and their spectral calculus.
//!
//! An `Op` stores a kernel matrix K with the quadrature-aware action
//! `(A f)(tau_i) = sum_j K_ij w_j f(tau_j)`. All eigen- and singular-value
//! computations conjugate the kernel into quadrature-orthonormal coordinates
//! `K~ = W^{1/2} K W^{1/2}` first, so self-adjointness with respect to the
//! weighted inner product becomes plain matrix Hermitian-ness.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{require_same_grid, Func, Grid};
use crate::rng::{stream_rng, StreamDomain};

/// Relative tolerance for certifying a kernel Hermitian.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;
/// A Hermitian operator counts as PSD when its smallest eigenvalue is above
/// `-PSD_REL_TOL * trace_norm`.
pub const PSD_REL_TOL: f64 = 1e-10;
/// `psd_sqrt` clips eigenvalues above `-SQRT_CLIP_REL_TOL * trace_norm` and
/// rejects anything more negative as genuinely indefinite.
pub const SQRT_CLIP_REL_TOL: f64 = 1e-8;

/// Trace, Hilbert-Schmidt and operator norms of the weighted representative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNorms {
    pub trace: f64,
    pub hs: f64,
    pub op: f64,
}

/// A bounded linear operator on the discretized space.
#[derive(Debug, Clone)]
pub struct Op {
    grid: Arc<Grid>,
    kernel: DMatrix<Complex64>,
    hermitian: bool,
    psd: bool,
}

impl Op {
    /// Wrap a kernel matrix. Hermitian-ness is detected within
    /// [`HERMITIAN_REL_TOL`]; the PSD flag is left unset (use
    /// [`Op::certify_psd`] or a PSD-producing constructor).
    pub fn new(grid: Arc<Grid>, kernel: DMatrix<Complex64>) -> Result<Op> {
        let n = grid.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: kernel.nrows().max(kernel.ncols()) });
        }
        if kernel.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("operator kernel"));
        }
        let hermitian = hermitian_defect(&kernel) <= HERMITIAN_REL_TOL;
        Ok(Op { grid, kernel, hermitian, psd: false })
    }

    /// Build from a matrix expressed in quadrature-orthonormal coordinates.
    pub fn from_orthonormal(grid: Arc<Grid>, tilde: DMatrix<Complex64>) -> Result<Op> {
        let inv = grid.inv_sqrt_weights().to_vec();
        let n = tilde.nrows();
        let kernel = DMatrix::from_fn(n, n, |i, j| tilde[(i, j)] * inv[i] * inv[j]);
        Op::new(grid, kernel)
    }

    pub fn zero(grid: &Arc<Grid>) -> Op {
        Op {
            grid: grid.clone(),
            kernel: DMatrix::zeros(grid.len(), grid.len()),
            hermitian: true,
            psd: true,
        }
    }

    /// The identity operator. Its kernel is `diag(1/w_i)`: the discrete
    /// counterpart of the Dirac kernel under the quadrature action.
    pub fn identity(grid: &Arc<Grid>) -> Op {
        Op::scaled_identity(grid, 1.0)
    }

    pub fn scaled_identity(grid: &Arc<Grid>, scale: f64) -> Op {
        let w = grid.weights();
        let n = grid.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(scale / w[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        Op { grid: grid.clone(), kernel, hermitian: true, psd: scale >= 0.0 }
    }

    /// Rank-one operator `f (x) g`, acting as `h -> <h,g> f`.
    pub fn tensor(f: &Func, g: &Func) -> Result<Op> {
        require_same_grid(f.grid(), g.grid())?;
        let n = f.grid().len();
        let kernel = DMatrix::from_fn(n, n, |i, j| f.values()[i] * g.values()[j].conj());
        let mut op = Op::new(f.grid().clone(), kernel)?;
        // f (x) f is PSD by construction
        if std::ptr::eq(f, g) || f.values() == g.values() {
            op.psd = op.hermitian;
        }
        Ok(op)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<Complex64> {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub(crate) fn mark_psd(mut self) -> Op {
        self.psd = true;
        self
    }

    /// Kernel in quadrature-orthonormal coordinates, `W^{1/2} K W^{1/2}`.
    pub fn to_orthonormal(&self) -> DMatrix<Complex64> {
        let s = self.grid.sqrt_weights();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.kernel[(i, j)] * s[i] * s[j])
    }

    /// Apply the operator to a curve.
    pub fn apply(&self, f: &Func) -> Result<Func> {
        require_same_grid(&self.grid, f.grid())?;
        let w = self.grid.weights();
        let weighted = DVector::from_fn(f.values().len(), |i, _| f.values()[i] * w[i]);
        Func::new(self.grid.clone(), &self.kernel * weighted)
    }

    /// Adjoint with respect to the weighted inner product; at the kernel
    /// level this is the conjugate transpose.
    pub fn adjoint(&self) -> Op {
        Op {
            grid: self.grid.clone(),
            kernel: self.kernel.adjoint(),
            hermitian: self.hermitian,
            psd: self.psd,
        }
    }

    /// Operator composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &Op) -> Result<Op> {
        require_same_grid(&self.grid, &other.grid)?;
        let w = self.grid.weights();
        let n = self.dim();
        let mut weighted = other.kernel.clone();
        for i in 0..n {
            for j in 0..n {
                weighted[(i, j)] *= w[i];
            }
        }
        Op::new(self.grid.clone(), &self.kernel * weighted)
    }

    pub fn add(&self, other: &Op) -> Result<Op> {
        require_same_grid(&self.grid, &other.grid)?;
        let mut op = Op::new(self.grid.clone(), &self.kernel + &other.kernel)?;
        op.psd = self.psd && other.psd && op.hermitian;
        Ok(op)
    }

    pub fn sub(&self, other: &Op) -> Result<Op> {
        require_same_grid(&self.grid, &other.grid)?;
        Op::new(self.grid.clone(), &self.kernel - &other.kernel)
    }

    pub fn scale(&self, c: Complex64) -> Op {
        let mut op = Op {
            grid: self.grid.clone(),
            kernel: &self.kernel * c,
            hermitian: self.hermitian && c.im == 0.0,
            psd: false,
        };
        op.psd = self.psd && c.im == 0.0 && c.re >= 0.0;
        op
    }

    pub fn scale_re(&self, c: f64) -> Op {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Trace `sum_i K_ii w_i` (equals the trace of the weighted representative).
    pub fn trace(&self) -> Complex64 {
        let w = self.grid.weights();
        (0..self.dim()).map(|i| self.kernel[(i, i)] * w[i]).sum()
    }

    /// Trace, Hilbert-Schmidt and operator norms via the singular values of
    /// the weighted representative. Always satisfies `op <= hs <= trace`.
    pub fn norms(&self) -> OpNorms {
        let sv = self.to_orthonormal().singular_values();
        let trace: f64 = sv.iter().sum();
        let hs: f64 = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
        let op = sv.iter().cloned().fold(0.0, f64::max);
        OpNorms { trace, hs, op }
    }

    pub fn trace_norm(&self) -> f64 {
        self.norms().trace
    }

    pub fn hs_norm(&self) -> f64 {
        // Frobenius norm of the weighted representative; cheaper than a full SVD.
        let s = self.grid.sqrt_weights();
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.kernel[(i, j)] * s[i] * s[j]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Hermitian eigendecomposition sorted descending, with a deterministic
    /// phase convention: the largest-modulus value of each eigenfunction is
    /// made real and positive (ties broken by lowest index).
    pub fn eigh(&self) -> Result<EigenSystem> {
        if !self.hermitian {
            return Err(Error::NotHermitian { max_asymmetry: hermitian_defect(&self.kernel) });
        }
        let tilde = self.to_orthonormal();
        // symmetrize away certification-level dust before the eigensolve
        let sym = (&tilde + tilde.adjoint()).scale(0.5);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("eigenvalues are finite")
        });
        let inv_s = self.grid.inv_sqrt_weights();
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenfunctions = Vec::with_capacity(n);
        for &idx in &order {
            eigenvalues.push(eig.eigenvalues[idx]);
            let col = eig.eigenvectors.column(idx);
            let mut values = DVector::from_fn(n, |i, _| col[i] * inv_s[i]);
            fix_phase(&mut values);
            eigenfunctions.push(Func::new(self.grid.clone(), values)?);
        }
        let source_trace = self.trace().re;
        Ok(EigenSystem { eigenvalues, eigenfunctions, source_trace })
    }

    /// Clip negative eigenvalues at zero. Idempotent; PSD inputs are
    /// reproduced within reconstruction accuracy.
    pub fn psd_project(&self) -> Result<Op> {
        let eig = self.eigh()?;
        if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
            let mut op = self.clone();
            op.psd = true;
            return Ok(op);
        }
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        Ok(eig.rebuild(&self.grid, &clipped)?.mark_psd())
    }

    /// PSD square root. Eigenvalues above `-SQRT_CLIP_REL_TOL * trace_norm`
    /// are clipped at zero first; anything lower is rejected as indefinite.
    pub fn psd_sqrt(&self) -> Result<Op> {
        let eig = self.eigh()?;
        let scale = eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>();
        let tol = SQRT_CLIP_REL_TOL * scale;
        if let Some(&min) = eig
            .eigenvalues
            .iter()
            .filter(|&&v| v < -tol)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
        {
            return Err(Error::Indefinite { min_eigenvalue: min, tolerance: -tol });
        }
        // truncate eigenvalue dust before the root; sqrt would amplify
        // machine-epsilon noise to the 1e-8 scale otherwise
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let cut = self.dim() as f64 * f64::EPSILON * top;
        let roots: Vec<f64> =
            eig.eigenvalues.iter().map(|&v| if v > cut { v.sqrt() } else { 0.0 }).collect();
        Ok(eig.rebuild(&self.grid, &roots)?.mark_psd())
    }

    /// Smallest eigenvalue of a Hermitian operator.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = self.eigh()?;
        Ok(*eig.eigenvalues.last().expect("nonempty grid"))
    }

    /// Eigendecompose and certify the PSD flag within [`PSD_REL_TOL`].
    pub fn certify_psd(mut self) -> Result<Op> {
        let eig = self.eigh()?;
        let tol = PSD_REL_TOL * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>();
        let min = *eig.eigenvalues.last().expect("nonempty grid");
        if min < -tol {
            return Err(Error::Indefinite { min_eigenvalue: min, tolerance: -tol });
        }
        self.psd = true;
        Ok(self)
    }

    // ---- deterministic generators used by configs and tests ----

    /// Brownian-motion covariance kernel `min(s,t)`.
    pub fn brownian(grid: &Arc<Grid>, scale: f64) -> Op {
        let p = grid.points();
        let n = grid.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| Complex64::new(scale * p[i].min(p[j]), 0.0));
        Op { grid: grid.clone(), kernel, hermitian: true, psd: scale >= 0.0 }
    }

    /// Exponential covariance kernel `scale * exp(-|s-t|/length_scale)`.
    pub fn exp_kernel(grid: &Arc<Grid>, length_scale: f64, scale: f64) -> Result<Op> {
        if length_scale <= 0.0 {
            return Err(Error::invalid("length_scale must be positive"));
        }
        let p = grid.points();
        let n = grid.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(scale * (-(p[i] - p[j]).abs() / length_scale).exp(), 0.0)
        });
        let mut op = Op::new(grid.clone(), kernel)?;
        op.psd = scale >= 0.0;
        Ok(op)
    }

    /// Squared-exponential covariance kernel.
    pub fn gaussian_kernel(grid: &Arc<Grid>, length_scale: f64, scale: f64) -> Result<Op> {
        if length_scale <= 0.0 {
            return Err(Error::invalid("length_scale must be positive"));
        }
        let p = grid.points();
        let n = grid.len();
        let kernel = DMatrix::from_fn(n, n, |i, j| {
            let d = p[i] - p[j];
            Complex64::new(scale * (-d * d / (2.0 * length_scale * length_scale)).exp(), 0.0)
        });
        let mut op = Op::new(grid.clone(), kernel)?;
        op.psd = scale >= 0.0;
        Ok(op)
    }

    /// Random real PSD operator with geometrically decaying eigenvalues
    /// `scale * decay^j` and a seeded random orthonormal eigenbasis.
    pub fn random_psd(grid: &Arc<Grid>, seed: u64, decay: f64, scale: f64) -> Result<Op> {
        if !(0.0 < decay && decay <= 1.0) {
            return Err(Error::invalid("decay must lie in (0,1]"));
        }
        if scale < 0.0 {
            return Err(Error::invalid("scale must be nonnegative"));
        }
        let n = grid.len();
        let mut rng = stream_rng(seed, StreamDomain::OpGen, 0);
        let gauss = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0)
        });
        let q = gauss.qr().q();
        let lambda: Vec<f64> = (0..n).map(|j| scale * decay.powi(j as i32)).collect();
        let mut tilde = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = q.column(j);
            for a in 0..n {
                for b in 0..n {
                    tilde[(a, b)] += lambda[j] * col[a] * col[b].conj();
                }
            }
        }
        Ok(Op::from_orthonormal(grid.clone(), tilde)?.mark_psd())
    }

    /// Random real operator rescaled to the requested operator norm; handy
    /// as a moving-average coefficient.
    pub fn random_contraction(grid: &Arc<Grid>, seed: u64, norm: f64) -> Result<Op> {
        if norm < 0.0 {
            return Err(Error::invalid("norm must be nonnegative"));
        }
        let n = grid.len();
        let mut rng = stream_rng(seed, StreamDomain::OpGen, 1);
        let gauss = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0)
        });
        let top = gauss.clone().singular_values()[0];
        let tilde = gauss * Complex64::new(norm / top, 0.0);
        Op::from_orthonormal(grid.clone(), tilde)
    }
}

/// Maximum relative deviation of a kernel from its conjugate transpose.
fn hermitian_defect(kernel: &DMatrix<Complex64>) -> f64 {
    let n = kernel.nrows();
    let mut scale = 0.0f64;
    for v in kernel.iter() {
        scale = scale.max(v.norm());
    }
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (kernel[(i, j)] - kernel[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst / scale
}

/// Rotate so the largest-modulus entry is real positive; ties go to the
/// lowest index (strict `>` keeps the first maximum).
fn fix_phase(values: &mut DVector<Complex64>) {
    let mut best = 0usize;
    let mut best_mod = values[0].norm();
    for i in 1..values.len() {
        let m = values[i].norm();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod == 0.0 {
        return;
    }
    let phase = values[best].conj() / Complex64::new(best_mod, 0.0);
    for v in values.iter_mut() {
        *v *= phase;
    }
}

/// Eigenvalues (descending) and orthonormal eigenfunctions of a Hermitian
/// operator, plus the trace of the source for bookkeeping.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Func>,
    pub source_trace: f64,
}

impl EigenSystem {
    /// Count of eigenvalues above `max(n * eps * nu_1, 0)`.
    pub fn numerical_rank(&self) -> usize {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        if top == 0.0 {
            return 0;
        }
        let tol = self.eigenvalues.len() as f64 * f64::EPSILON * top;
        self.eigenvalues.iter().filter(|&&v| v > tol).count()
    }

    pub fn total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Sum of eigenvalues past index `p` (the omitted tail).
    pub fn tail(&self, p: usize) -> f64 {
        self.eigenvalues.iter().skip(p).sum()
    }

    /// Sum of the leading `p` eigenvalues.
    pub fn head(&self, p: usize) -> f64 {
        self.eigenvalues.iter().take(p).sum()
    }

    /// Reassemble `sum_j nu_j phi_j (x) phi_j`.
    pub fn reconstruct(&self, grid: &Arc<Grid>) -> Result<Op> {
        self.rebuild(grid, &self.eigenvalues)
    }

    /// Reassemble with substituted eigenvalues (clipping, square roots).
    fn rebuild(&self, grid: &Arc<Grid>, values: &[f64]) -> Result<Op> {
        let n = grid.len();
        let mut kernel = DMatrix::zeros(n, n);
        for (v, phi) in values.iter().zip(&self.eigenfunctions) {
            if *v == 0.0 {
                continue;
            }
            let f = phi.values();
            for i in 0..n {
                for j in 0..n {
                    kernel[(i, j)] += Complex64::new(*v, 0.0) * f[i] * f[j].conj();
                }
            }
        }
        Op::new(grid.clone(), kernel)
    }

    /// Projection onto the span of the leading `p` eigenfunctions, applied
    /// to a value vector; returns the projected values.
    pub(crate) fn project_values(
        &self,
        grid: &Grid,
        values: &DVector<Complex64>,
        p: usize,
    ) -> DVector<Complex64> {
        let n = values.len();
        let w = grid.weights();
        let mut out = DVector::zeros(n);
        for phi in self.eigenfunctions.iter().take(p) {
            let pv = phi.values();
            let mut coef = Complex64::new(0.0, 0.0);
            for i in 0..n {
                coef += w[i] * values[i] * pv[i].conj();
            }
            for i in 0..n {
                out[i] += coef * pv[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::uniform_trapezoid(n).unwrap()
    }

    fn unit_sine(g: &Arc<Grid>, k: usize) -> Func {
        let f = Func::sample(g, |t| (std::f64::consts::PI * k as f64 * t).sin());
        f.normalized().unwrap()
    }

    #[test]
    fn tensor_of_unit_curve_is_projection() {
        let g = grid(64);
        let f = unit_sine(&g, 1);
        let p = Op::tensor(&f, &f).unwrap();
        let out = p.apply(&f).unwrap();
        assert!(out.sub(&f).unwrap().norm() < 1e-12);
    }

    #[test]
    fn tensor_kills_orthogonal_complement() {
        let g = grid(128);
        let f = unit_sine(&g, 1);
        let h = unit_sine(&g, 2);
        let p = Op::tensor(&f, &f).unwrap();
        assert!(p.apply(&h).unwrap().norm() < 1e-8);
    }

    #[test]
    fn trace_of_tensor_is_inner_product() {
        let g = grid(64);
        let f = Func::sample(&g, |t| t);
        let h = Func::sample(&g, |t| (1.0 - t) * (1.0 - t));
        let tr = Op::tensor(&f, &h).unwrap().trace();
        let ip = inner(&f, &h).unwrap();
        assert!((tr - ip).norm() < 1e-10 * ip.norm().max(1.0));
    }

    #[test]
    fn adjoint_involution_and_tensor_swap() {
        let g = grid(32);
        let f = Func::sample(&g, |t| t);
        let h = Func::sample(&g, |t| t * t);
        let a = Op::tensor(&f, &h).unwrap();
        let double = a.adjoint().adjoint();
        assert_eq!(a.kernel(), double.kernel());
        let swapped = Op::tensor(&h, &f).unwrap();
        assert!((a.adjoint().kernel() - swapped.kernel()).norm() < 1e-14);
    }

    #[test]
    fn adjoint_of_identity_is_identity() {
        let g = grid(16);
        let id = Op::identity(&g);
        assert_eq!(id.adjoint().kernel(), id.kernel());
    }

    #[test]
    fn adjoint_matches_weighted_inner_product() {
        let g = grid(24);
        let a = Op::random_contraction(&g, 3, 1.3).unwrap();
        let f = Func::sample(&g, |t| (3.0 * t).sin());
        let h = Func::sample(&g, |t| (2.0 * t).cos());
        let lhs = inner(&a.apply(&f).unwrap(), &h).unwrap();
        let rhs = inner(&f, &a.adjoint().apply(&h).unwrap()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn norms_of_rank_one() {
        let g = grid(64);
        let f = Func::sample(&g, |t| 1.0 + t);
        let n2 = f.norm() * f.norm();
        let norms = Op::tensor(&f, &f).unwrap().norms();
        assert!((norms.trace - n2).abs() < 1e-10 * n2);
        assert!((norms.hs - n2).abs() < 1e-10 * n2);
        assert!((norms.op - n2).abs() < 1e-10 * n2);
    }

    #[test]
    fn norms_of_zero() {
        let g = grid(8);
        let n = Op::zero(&g).norms();
        assert_eq!((n.trace, n.hs, n.op), (0.0, 0.0, 0.0));
    }

    #[test]
    fn norms_of_two_point_spectrum() {
        let g = grid(64);
        let f = unit_sine(&g, 1);
        let h = unit_sine(&g, 2);
        let a = Op::tensor(&f, &f)
            .unwrap()
            .scale_re(2.0)
            .add(&Op::tensor(&h, &h).unwrap().scale_re(-1.0))
            .unwrap();
        let n = a.norms();
        assert!((n.trace - 3.0).abs() < 1e-8);
        assert!((n.hs - 5.0f64.sqrt()).abs() < 1e-8);
        assert!((n.op - 2.0).abs() < 1e-8);
    }

    #[test]
    fn eigh_identity_all_ones() {
        let g = grid(16);
        let eig = Op::identity(&g).eigh().unwrap();
        for v in &eig.eigenvalues {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((eig.total() - eig.source_trace).abs() < 1e-8 * eig.source_trace.abs());
    }

    #[test]
    fn eigh_rank_one() {
        let g = grid(64);
        let f = unit_sine(&g, 3);
        let eig = Op::tensor(&f, &f).unwrap().eigh().unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-10);
        for v in &eig.eigenvalues[1..] {
            assert!(v.abs() < 1e-10);
        }
        let overlap = inner(&eig.eigenfunctions[0], &f).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigh_brownian_matches_closed_form() {
        // Karhunen-Loeve of Brownian motion: nu_j = 1/((j-1/2)^2 pi^2)
        let g = grid(256);
        let eig = Op::brownian(&g, 1.0).eigh().unwrap();
        for j in 1..=3 {
            let expect = 1.0 / ((j as f64 - 0.5) * std::f64::consts::PI).powi(2);
            let got = eig.eigenvalues[j - 1];
            assert!((got - expect).abs() < 0.01 * expect, "j={j} got={got} expect={expect}");
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let g = grid(8);
        let f = Func::sample(&g, |t| t);
        let h = Func::sample(&g, |t| 1.0 - t);
        let a = Op::tensor(&f, &h).unwrap();
        assert!(matches!(a.eigh(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_reconstruction_and_orthonormality() {
        let g = grid(24);
        let a = Op::random_psd(&g, 9, 0.6, 1.0).unwrap();
        let eig = a.eigh().unwrap();
        let rec = eig.reconstruct(&g).unwrap();
        let err = a.sub(&rec).unwrap().hs_norm();
        assert!(err < 1e-8 * a.hs_norm());
        for j in 0..eig.eigenfunctions.len() {
            for k in j..eig.eigenfunctions.len() {
                let ip = inner(&eig.eigenfunctions[j], &eig.eigenfunctions[k]).unwrap();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn eigh_deterministic_bitwise() {
        let g = grid(24);
        let a = Op::random_psd(&g, 4, 0.8, 2.0).unwrap();
        let e1 = a.eigh().unwrap();
        let e2 = a.eigh().unwrap();
        assert_eq!(e1.eigenvalues, e2.eigenvalues);
        for (f1, f2) in e1.eigenfunctions.iter().zip(&e2.eigenfunctions) {
            assert_eq!(f1.values(), f2.values());
        }
    }

    #[test]
    fn psd_project_clips_negative_part() {
        let g = grid(64);
        let f = unit_sine(&g, 1);
        let h = unit_sine(&g, 2);
        let a = Op::tensor(&f, &f)
            .unwrap()
            .add(&Op::tensor(&h, &h).unwrap().scale_re(-0.2))
            .unwrap();
        let p = a.psd_project().unwrap();
        let eig = p.eigh().unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-9);
        for v in &eig.eigenvalues[1..] {
            assert!(v.abs() < 1e-9);
        }
        // idempotent
        let pp = p.psd_project().unwrap();
        assert!(p.sub(&pp).unwrap().hs_norm() < 1e-10 * p.hs_norm().max(1.0));
    }

    #[test]
    fn psd_project_keeps_psd_input() {
        let g = grid(16);
        let a = Op::random_psd(&g, 5, 0.5, 1.0).unwrap();
        let p = a.psd_project().unwrap();
        assert!(a.sub(&p).unwrap().hs_norm() <= 1e-10 * a.hs_norm());
        let z = Op::zero(&g).psd_project().unwrap();
        assert_eq!(z.hs_norm(), 0.0);
    }

    #[test]
    fn psd_sqrt_identity_and_projection() {
        let g = grid(16);
        let id = Op::identity(&g);
        let r = id.psd_sqrt().unwrap();
        assert!(id.sub(&r).unwrap().hs_norm() < 1e-10 * id.hs_norm());
        let f = unit_sine(&g, 1);
        let p = Op::tensor(&f, &f).unwrap();
        let rp = p.psd_sqrt().unwrap();
        assert!(p.sub(&rp).unwrap().hs_norm() < 1e-9 * p.hs_norm());
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let g = grid(24);
        let a = Op::random_psd(&g, 11, 0.7, 3.0).unwrap();
        let r = a.psd_sqrt().unwrap();
        let sq = r.compose(&r).unwrap();
        assert!(a.sub(&sq).unwrap().hs_norm() < 1e-9 * a.hs_norm());
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let g = grid(16);
        let a = Op::scaled_identity(&g, -1.0);
        assert!(matches!(a.psd_sqrt(), Err(Error::Indefinite { .. })));
    }

    #[test]
    fn quadrature_consistency_trace_vs_inner() {
        let g = grid(48);
        let f = Func::sample(&g, |t| (5.0 * t).sin() + 0.3);
        let h = Func::sample(&g, |t| t * t - 0.5);
        let tr = Op::tensor(&f, &h).unwrap().trace();
        let ip = inner(&f, &h).unwrap();
        assert!((tr - ip).norm() <= 1e-10 * ip.norm());
    }
}
