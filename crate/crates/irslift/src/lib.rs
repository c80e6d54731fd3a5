//! Estimation of the cascaded-channel autocorrelation matrix of an
//! IRS-assisted wireless link using only received-signal-power measurements,
//! plus the discrete-phase reflection design built on top of the estimate.
//!
//! The crate is organized around the measurement pipeline:
//!
//! * [`channel`] — synthetic Rician channel generation and the equivalent
//!   channel vector/autocorrelation pair.
//! * [`measurement`] — discrete-phase training reflections, exact/noisy power
//!   computation, report quantization, and the linear design matrix.
//! * [`hermitian`] / [`eigen`] — the real coordinate space of Hermitian
//!   matrices and the small eigen toolbox the estimators are built from.
//! * [`conic`] — the embedded interior-point solver for the semidefinite
//!   subproblems.
//! * [`estimators`] — the rank-approaching estimators (`lra`, `alra`) and
//!   their noise/quantization-robust variants, plus the trace-minimization
//!   baseline.
//! * [`reflection`] — reflection design from an estimated matrix and the
//!   power-only benchmark designers.
//! * [`experiment`] — reproducible Monte Carlo sweeps and CSV emission.

pub mod channel;
pub mod conic;
pub mod eigen;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod hermitian;
pub mod measurement;
pub mod reflection;
pub mod rngutil;
pub mod units;
pub mod verify;

pub use error::Error;
pub use hermitian::HermitianMatrix;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix/vector aliases.
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
pub type RMat = nalgebra::DMatrix<f64>;
pub type RVec = nalgebra::DVector<f64>;
