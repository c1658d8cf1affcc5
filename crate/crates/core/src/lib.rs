//! Quantifying how well a sub-step tone can be recovered from quantized
//! received-signal-strength (RSS) measurements.
//!
//! * [`vibration`] maps a vibrating reflector to a received-power change.
//! * [`signal`] synthesizes tone-plus-interference power traces and
//!   quantizes them the way a transceiver reports RSS.
//! * [`bounds`] computes Fisher information and Cramér–Rao bounds for the
//!   one-bit quantized tone, averaged over phase and DC offset, and sweeps
//!   them over interference level, step size and sample rate.
//! * [`estimators`] fits the tone by maximum likelihood or periodogram and
//!   measures estimator RMSE by Monte Carlo.
//!
//! The physical model and the bound engine are generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the usual double-precision types.

// `!(x > 0)` deliberately rejects NaN; index loops read better on 4×4 matrices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod scalar;
pub mod signal;
pub mod special;
pub mod vibration;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

pub type Scene = vibration::VibrationScene<f64>;
pub type Sine = signal::SineParams<f64>;
pub type Acquisition = signal::AcquisitionSpec<f64>;
pub type Fisher = bounds::FisherMatrix<f64>;
pub type Crb = bounds::CrbResult<f64>;
pub type AveragedBound = bounds::AveragedCrb<f64>;
