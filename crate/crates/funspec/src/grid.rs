//! Discretized model of the function space L2([0,1]): a quadrature grid,
//! single curves, and time-indexed families of curves.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Quadrature rule used to build uniform grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Trapezoid,
    Midpoint,
}

/// Discretization of [0,1] with positive quadrature weights.
///
/// The weights define the inner product `<f,g> = sum_i w_i f_i conj(g_i)`,
/// the discrete stand-in for the L2 integral; they must sum to one because
/// the Lebesgue measure of [0,1] does.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
    inv_sqrt_w: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.weights == other.weights
    }
}

impl Grid {
    /// Build a grid from explicit points and weights, validating the
    /// invariants: points strictly increasing in [0,1], weights positive,
    /// weights summing to 1 within 1e-12.
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Arc<Grid>> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid must contain at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                actual: weights.len(),
            });
        }
        for (i, &p) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidGrid(format!("point {i} = {p} outside [0,1]")));
            }
            if i > 0 && p <= points[i - 1] {
                return Err(Error::InvalidGrid(format!(
                    "points not strictly increasing at index {i}"
                )));
            }
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidGrid(format!("weight {i} = {w} not positive")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let inv_sqrt_w: Vec<f64> = sqrt_w.iter().map(|s| 1.0 / s).collect();
        Ok(Arc::new(Grid { points, weights, sqrt_w, inv_sqrt_w }))
    }

    /// Uniform grid on [0,1] with composite-trapezoid weights (the default
    /// quadrature). Requires `n >= 2`.
    pub fn uniform_trapezoid(n: usize) -> Result<Arc<Grid>> {
        if n < 2 {
            return Err(Error::InvalidGrid("trapezoid grid needs n >= 2".into()));
        }
        let h = 1.0 / (n - 1) as f64;
        let points: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
            .collect();
        Grid::new(points, weights)
    }

    /// Uniform midpoint grid: points (i + 1/2)/n, equal weights 1/n.
    pub fn midpoint(n: usize) -> Result<Arc<Grid>> {
        if n == 0 {
            return Err(Error::InvalidGrid("midpoint grid needs n >= 1".into()));
        }
        let points: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let weights = vec![1.0 / n as f64; n];
        Grid::new(points, weights)
    }

    pub fn uniform(n: usize, rule: Quadrature) -> Result<Arc<Grid>> {
        match rule {
            Quadrature::Trapezoid => Grid::uniform_trapezoid(n),
            Quadrature::Midpoint => Grid::midpoint(n),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    pub(crate) fn inv_sqrt_weights(&self) -> &[f64] {
        &self.inv_sqrt_w
    }
}

/// True when two grid handles refer to the same discretization.
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn require_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// A single curve sampled on a grid; values may be complex.
#[derive(Debug, Clone)]
pub struct Func {
    grid: Arc<Grid>,
    values: DVector<Complex64>,
}

impl Func {
    pub fn new(grid: Arc<Grid>, values: DVector<Complex64>) -> Result<Func> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("curve values"));
        }
        Ok(Func { grid, values })
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Func> {
        let v = DVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)));
        Func::new(grid, v)
    }

    /// Sample a real-valued function of tau on the grid.
    pub fn sample(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Func {
        let v = DVector::from_iterator(grid.len(), grid.points().iter().map(|&t| Complex64::new(f(t), 0.0)));
        Func { grid: grid.clone(), values: v }
    }

    pub fn zero(grid: &Arc<Grid>) -> Func {
        Func { grid: grid.clone(), values: DVector::zeros(grid.len()) }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &DVector<Complex64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.values
    }

    /// Weighted inner product `sum_i w_i f_i conj(g_i)`; conjugate-linear in `g`.
    pub fn inner(&self, other: &Func) -> Result<Complex64> {
        require_same_grid(&self.grid, &other.grid)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.values.len() {
            acc += self.grid.weights[i] * self.values[i] * other.values[i].conj();
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            acc += self.grid.weights[i] * self.values[i].norm_sqr();
        }
        acc.sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Func {
        Func { grid: self.grid.clone(), values: &self.values * c }
    }

    pub fn add(&self, other: &Func) -> Result<Func> {
        require_same_grid(&self.grid, &other.grid)?;
        Ok(Func { grid: self.grid.clone(), values: &self.values + &other.values })
    }

    pub fn sub(&self, other: &Func) -> Result<Func> {
        require_same_grid(&self.grid, &other.grid)?;
        Ok(Func { grid: self.grid.clone(), values: &self.values - &other.values })
    }

    /// Rescale to unit norm; errors on the zero curve.
    pub fn normalized(&self) -> Result<Func> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero curve"));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }
}

/// Convenience free function mirroring `Func::inner`.
pub fn inner(f: &Func, g: &Func) -> Result<Complex64> {
    f.inner(g)
}

/// A finite observed stretch of a functional time series: T curves on a
/// shared grid, stored as the columns of an N x T matrix.
#[derive(Debug, Clone)]
pub struct FuncSeries {
    grid: Arc<Grid>,
    data: DMatrix<Complex64>,
    real: bool,
}

impl FuncSeries {
    /// `data` has one column per time index. The real flag is detected: it
    /// is set exactly when every imaginary part is exactly zero.
    pub fn new(grid: Arc<Grid>, data: DMatrix<Complex64>) -> Result<FuncSeries> {
        if data.nrows() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: data.nrows() });
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("series values"));
        }
        let real = data.iter().all(|v| v.im == 0.0);
        Ok(FuncSeries { grid, data, real })
    }

    pub fn from_frames(frames: &[Func]) -> Result<FuncSeries> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("series needs at least one frame"))?;
        let grid = first.grid().clone();
        let n = grid.len();
        let mut data = DMatrix::zeros(n, frames.len());
        for (t, f) in frames.iter().enumerate() {
            require_same_grid(&grid, f.grid())?;
            data.set_column(t, f.values());
        }
        FuncSeries::new(grid, data)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of frames T.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn frame(&self, t: usize) -> Func {
        Func { grid: self.grid.clone(), values: self.data.column(t).into_owned() }
    }

    /// Sample mean curve over the frames.
    pub fn mean_curve(&self) -> Func {
        let t = self.len().max(1) as f64;
        let mut acc = DVector::zeros(self.dim());
        for c in self.data.column_iter() {
            acc += c;
        }
        Func { grid: self.grid.clone(), values: acc / Complex64::new(t, 0.0) }
    }

    /// Subtract the sample mean curve from every frame.
    pub fn demeaned(&self) -> FuncSeries {
        let mean = self.mean_curve();
        let mut data = self.data.clone();
        for mut c in data.column_iter_mut() {
            c -= mean.values();
        }
        let real = self.real;
        FuncSeries { grid: self.grid.clone(), data, real }
    }

    /// Time-averaged squared norm `(1/T) sum_t ||X_t||^2`.
    pub fn mean_square_norm(&self) -> f64 {
        let mut acc = 0.0;
        for c in self.data.column_iter() {
            for i in 0..self.dim() {
                acc += self.grid.weights[i] * c[i].norm_sqr();
            }
        }
        acc / self.len().max(1) as f64
    }
}
