use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{fold, Band, EstimationResult, Method};
use crate::error::{Error, Result};
use crate::signal::{RssTrace, TraceKind};

/// One-sided magnitude spectrum of the mean-removed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Phase of each bin, rad.
    pub phase_rad: Vec<f64>,
    pub mean: f64,
    pub num_samples: usize,
}

/// `|Σ_k (x_k − x̄)·e^{−2πi·jk/M}|` for `M = pad·N`, bins `0..=M/2`.
pub fn periodogram(trace: &RssTrace, pad: usize) -> Result<Spectrum> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    let m = n * pad.max(1);
    let mean = trace.values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = trace
        .values
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let half = m / 2 + 1;
    let df = trace.sample_rate_hz / m as f64;
    Ok(Spectrum {
        freqs_hz: (0..half).map(|j| j as f64 * df).collect(),
        magnitude: buf[..half].iter().map(|c| c.norm()).collect(),
        phase_rad: buf[..half].iter().map(|c| c.arg()).collect(),
        mean,
        num_samples: n,
    })
}

/// Frequency and amplitude from the peak of the 8× zero-padded periodogram.
///
/// The amplitude is `2·|X|/N`. One-bit traces measure the tone through the
/// hard limiter, so with `sigma` given it is rescaled by `σ·√(π/2)` (the
/// small-signal gain of the limiter), as is the offset.
pub fn periodogram_estimate(
    trace: &RssTrace,
    band: Option<Band>,
    sigma: Option<f64>,
) -> Result<EstimationResult> {
    let n = trace.len();
    if n < 16 {
        return Err(Error::domain("periodogram needs at least 16 samples"));
    }
    let fs = trace.sample_rate_hz;
    let band = band.unwrap_or_else(|| Band::full(fs, n));
    band.validate(fs)?;
    let spec = periodogram(trace, 8)?;
    let bins: Vec<usize> = (0..spec.freqs_hz.len())
        .filter(|&j| band.contains(spec.freqs_hz[j]))
        .collect();
    let Some(&p) = bins
        .iter()
        .max_by(|&&a, &&b| spec.magnitude[a].total_cmp(&spec.magnitude[b]))
    else {
        return Err(Error::EmptyBand {
            lo_hz: band.lo_hz,
            hi_hz: band.hi_hz,
        });
    };
    let peak = spec.magnitude[p];
    if peak == 0.0 || peak <= 1e-12 * n as f64 * spec.mean.abs() {
        return Err(Error::Unidentifiable(
            "trace has no spectral peak (constant?)".into(),
        ));
    }
    let (mut delta, mut mag) = (0.0, peak);
    if p > 0 && p + 1 < spec.magnitude.len() {
        let (l, r) = (spec.magnitude[p - 1], spec.magnitude[p + 1]);
        let denom = l - 2.0 * peak + r;
        if denom < 0.0 {
            delta = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
            mag = peak - 0.25 * (l - r) * delta;
        }
    }
    let df = fs / (8 * n) as f64;
    let f = spec.freqs_hz[p] + delta * df;
    let gain = match (trace.kind, sigma) {
        (TraceKind::OneBit, Some(s)) => s * (std::f64::consts::PI / 2.0).sqrt(),
        _ => 1.0,
    };
    Ok(EstimationResult {
        estimate: fold(
            gain * 2.0 * mag / n as f64,
            gain * spec.mean,
            f,
            spec.phase_rad[p],
        )?,
        threshold_db: 0.0,
        log_likelihood: f64::NAN,
        converged: true,
        iterations: 0,
        method: Method::Periodogram,
    })
}
