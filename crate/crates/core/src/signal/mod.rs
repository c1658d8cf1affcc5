//! Sampled received-power signals: a tone riding on a DC level plus
//! Gaussian interference, and the quantizers a transceiver applies to it.

mod io;
mod quantize;
mod synth;

pub use io::{export_csv_rss, ingest_trace, read_trace, write_csv_rss, TraceFormat};
pub use quantize::{quantize_one_bit, quantize_uniform, to_one_bit};
pub use synth::{synthesize, synthesize_with_rng, trial_rng};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unknown tone parameters `[A, B, ω, φ]`, with `ω` stored as a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineParams<T = f64> {
    /// Tone amplitude `A`, dB.
    pub amplitude_db: T,
    /// DC level `B`, dB. In the one-bit model this is the distance from the
    /// quantization threshold.
    pub dc_offset_db: T,
    /// Tone frequency `f`, Hz (`ω = 2πf`).
    pub frequency_hz: T,
    /// Initial phase `φ` in `[0, 2π)`.
    pub phase_rad: T,
}

impl<T: Real> SineParams<T> {
    pub fn new(amplitude_db: T, dc_offset_db: T, frequency_hz: T, phase_rad: T) -> Result<Self> {
        if [amplitude_db, dc_offset_db, frequency_hz, phase_rad]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::domain("sine parameters must be finite"));
        }
        if amplitude_db < T::zero() {
            return Err(Error::domain("amplitude must be >= 0"));
        }
        if frequency_hz <= T::zero() {
            return Err(Error::domain("frequency must be > 0"));
        }
        Ok(Self {
            amplitude_db,
            dc_offset_db,
            frequency_hz,
            phase_rad: normalize_phase(phase_rad),
        })
    }

    /// Angular frequency `ω = 2πf`, rad/s.
    pub fn omega(&self) -> T {
        T::TAU() * self.frequency_hz
    }

    pub fn with_phase(mut self, phase_rad: T) -> Self {
        self.phase_rad = normalize_phase(phase_rad);
        self
    }

    pub fn with_offset(mut self, dc_offset_db: T) -> Self {
        self.dc_offset_db = dc_offset_db;
        self
    }

    pub fn with_amplitude(mut self, amplitude_db: T) -> Self {
        self.amplitude_db = amplitude_db;
        self
    }

    pub fn with_frequency(mut self, frequency_hz: T) -> Self {
        self.frequency_hz = frequency_hz;
        self
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_phase<T: Real>(phase: T) -> T {
    let tau = T::TAU();
    let r = phase % tau;
    let r = if r < T::zero() { r + tau } else { r };
    // `r + tau` can round up to exactly tau
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Sampling setup and the pre-quantization noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSpec<T = f64> {
    /// `f_s`, Hz. The sample period is `T_s = 1/f_s`.
    pub sample_rate_hz: T,
    /// `N`, number of samples.
    pub num_samples: usize,
    /// Standard deviation `σ` of the additive white Gaussian noise, dB.
    pub noise_std_db: T,
    pub rng_seed: u64,
}

impl<T: Real> AcquisitionSpec<T> {
    pub fn new(
        sample_rate_hz: T,
        num_samples: usize,
        noise_std_db: T,
        rng_seed: u64,
    ) -> Result<Self> {
        let acq = Self {
            sample_rate_hz,
            num_samples,
            noise_std_db,
            rng_seed,
        };
        acq.validate()?;
        Ok(acq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > T::zero()) {
            return Err(Error::domain("sample rate must be finite and > 0"));
        }
        if self.num_samples < 2 {
            return Err(Error::domain("need at least 2 samples"));
        }
        if !(self.noise_std_db.is_finite() && self.noise_std_db >= T::zero()) {
            return Err(Error::domain("noise std must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn sample_period_s(&self) -> T {
        T::one() / self.sample_rate_hz
    }

    pub fn with_noise(mut self, noise_std_db: T) -> Self {
        self.noise_std_db = noise_std_db;
        self
    }

    pub fn with_samples(mut self, num_samples: usize) -> Self {
        self.num_samples = num_samples;
        self
    }

    /// Errors unless `0 < f < f_s/2`.
    pub fn check_nyquist(&self, frequency_hz: T) -> Result<()> {
        if frequency_hz <= T::zero() || frequency_hz >= self.sample_rate_hz / T::lit(2.0) {
            return Err(Error::Aliasing {
                f_hz: frequency_hz.as_f64(),
                fs_hz: self.sample_rate_hz.as_f64(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerMode {
    OneBit,
    Uniform,
}

impl QuantizerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuantizerMode::OneBit => "one-bit",
            QuantizerMode::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for QuantizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-bit" => Ok(QuantizerMode::OneBit),
            "uniform" => Ok(QuantizerMode::Uniform),
            other => Err(Error::domain(format!(
                "unknown quantizer mode '{other}' (expected one-bit or uniform)"
            ))),
        }
    }
}

/// RSS quantizer. One-bit mode compares against `threshold_db` only;
/// uniform mode rounds to multiples of `step_db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub step_db: f64,
    pub threshold_db: f64,
    pub mode: QuantizerMode,
}

impl QuantizerSpec {
    pub fn one_bit(threshold_db: f64) -> Self {
        Self {
            step_db: 1.0,
            threshold_db,
            mode: QuantizerMode::OneBit,
        }
    }

    pub fn uniform(step_db: f64) -> Result<Self> {
        let q = Self {
            step_db,
            threshold_db: 0.0,
            mode: QuantizerMode::Uniform,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_db.is_finite() && self.step_db > 0.0) {
            return Err(Error::domain("step_db must be > 0"));
        }
        if !self.threshold_db.is_finite() {
            return Err(Error::domain("threshold_db must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Continuous,
    OneBit,
    UniformQuantized,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Continuous => "continuous",
            TraceKind::OneBit => "one-bit",
            TraceKind::UniformQuantized => "uniform-quantized",
        }
    }
}

impl std::str::FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(TraceKind::Continuous),
            "one-bit" => Ok(TraceKind::OneBit),
            "uniform-quantized" | "uniform" => Ok(TraceKind::UniformQuantized),
            other => Err(Error::domain(format!("unknown trace kind '{other}'"))),
        }
    }
}

/// Where a trace came from.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    Synthetic {
        params: SineParams,
        acq: AcquisitionSpec,
        quantizer: Option<QuantizerSpec>,
    },
    Ingested {
        path: String,
        format: TraceFormat,
        /// Timestamps were snapped onto the uniform grid.
        resampled: bool,
    },
}

/// Uniformly sampled sequence of received-power values.
#[derive(Debug, Clone, PartialEq)]
pub struct RssTrace {
    pub times_s: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    pub sample_rate_hz: f64,
    pub source: TraceSource,
}

impl RssTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Distinct values in ascending order.
    pub fn levels(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    pub(crate) fn require_kind(&self, kind: TraceKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.as_str(),
                found: self.kind.as_str(),
            });
        }
        Ok(())
    }
}
