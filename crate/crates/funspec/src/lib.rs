//! Frequency-domain analysis of weakly stationary functional time series on
//! a discretized L2([0,1]): lag-covariance operators, operator-valued
//! spectral measures with densities and atoms, Cramér spectral synthesis
//! (including long-memory and periodic-jump components), and harmonic
//! functional PCA with the optimal rank-reduced filter and its closed-form
//! error.

pub mod covariance;
pub mod error;
mod fft;
pub mod grid;
pub mod operator;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{inner, same_grid, Func, FuncSeries, Grid, Quadrature};
pub use operator::{EigenSystem, Op, OpNorms};
pub use spectral::{
    detect_atoms, herglotz_forward, herglotz_inverse, trace_measure, wrap_frequency, DetectedAtom,
    LagWindow, SpectralAtom, SpectralMeasure,
};
pub use covariance::{
    check_nonneg_def, empirical_lag_cov, isometry_gram, LagCovSequence, NonNegDefReport,
};
