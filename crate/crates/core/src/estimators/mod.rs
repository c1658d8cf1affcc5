//! Tone estimation from RSS traces and Monte Carlo error measurement.

mod lsq;
mod mc;
mod mle;
mod periodogram;
mod simplex;

pub use lsq::lsq_fit;
pub use mc::{monte_carlo_rmse, McConfig, McRow};
pub use mle::{mle_fit, mle_fit_with, reduce_to_one_bit, MleOptions};
pub use periodogram::{periodogram, periodogram_estimate, Spectrum};

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{AcquisitionSpec, RssTrace, SineParams, TraceKind};
use crate::special::ln_half_erfc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// One-bit maximum likelihood.
    Mle,
    /// Peak of the zero-padded periodogram.
    Periodogram,
    /// Unquantized least squares, for continuous traces.
    LeastSquares,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Periodogram => "periodogram",
            Method::LeastSquares => "lsq",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Method::Mle),
            "periodogram" => Ok(Method::Periodogram),
            "lsq" => Ok(Method::LeastSquares),
            other => Err(Error::domain(format!(
                "unknown method '{other}' (mle|periodogram|lsq)"
            ))),
        }
    }
}

/// Frequency search interval, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Self { lo_hz, hi_hz }
    }

    /// `[f_s/N, f_s/2 − f_s/N]`.
    pub fn full(sample_rate_hz: f64, n: usize) -> Self {
        let bin = sample_rate_hz / n as f64;
        Self::new(bin, sample_rate_hz / 2.0 - bin)
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.lo_hz > 0.0 && self.hi_hz < sample_rate_hz / 2.0 && self.lo_hz <= self.hi_hz) {
            return Err(Error::EmptyBand {
                lo_hz: self.lo_hz,
                hi_hz: self.hi_hz,
            });
        }
        Ok(())
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_hz && f <= self.hi_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// `dc_offset_db` is relative to `threshold_db` for one-bit fits.
    pub estimate: SineParams,
    /// Level the one-bit samples were taken against; 0 for continuous and
    /// periodogram fits.
    pub threshold_db: f64,
    /// One-bit log-likelihood at the estimate (NaN when not applicable).
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub method: Method,
}

/// Folds a negative amplitude into the phase.
pub(crate) fn fold(a: f64, b: f64, f: f64, phase: f64) -> Result<SineParams> {
    let (a, phase) = if a < 0.0 {
        (-a, phase + std::f64::consts::PI)
    } else {
        (a, phase)
    };
    SineParams::new(a, b, f, phase)
}

/// `Σ_k ln P(y[k])` for a one-bit trace, with `B` measured from the
/// threshold.
pub fn log_likelihood(trace: &RssTrace, params: &SineParams, acq: &AcquisitionSpec) -> Result<f64> {
    trace.require_kind(TraceKind::OneBit)?;
    let sigma = acq.noise_std_db;
    if !(sigma > 0.0) {
        return Err(Error::Unidentifiable(
            "one-bit likelihood needs sigma > 0".into(),
        ));
    }
    let ts = trace.sample_period_s();
    let w = params.omega();
    let scale = std::f64::consts::SQRT_2 * sigma;
    let mut total = 0.0;
    for (k, &y) in trace.values.iter().enumerate() {
        let s = params.amplitude_db * (w * ts * k as f64 + params.phase_rad).cos()
            + params.dc_offset_db;
        total += ln_half_erfc(-y * s / scale);
    }
    Ok(total)
}
