use super::{QuantizerMode, QuantizerSpec, RssTrace, TraceKind, TraceSource};
use crate::error::{Error, Result};

fn with_quantizer(source: &TraceSource, quant: &QuantizerSpec) -> TraceSource {
    match source {
        TraceSource::Synthetic { params, acq, .. } => TraceSource::Synthetic {
            params: *params,
            acq: *acq,
            quantizer: Some(*quant),
        },
        other => other.clone(),
    }
}

/// Hard limiter: `+1` where `x[k] ≥ ζ`, `−1` otherwise.
pub fn quantize_one_bit(trace: &RssTrace, quant: &QuantizerSpec) -> Result<RssTrace> {
    trace.require_kind(TraceKind::Continuous)?;
    if !quant.threshold_db.is_finite() {
        return Err(Error::domain("threshold_db must be finite"));
    }
    let zeta = quant.threshold_db;
    let values = trace
        .values
        .iter()
        .map(|&x| if x >= zeta { 1.0 } else { -1.0 })
        .collect();
    let quant = QuantizerSpec {
        mode: QuantizerMode::OneBit,
        ..*quant
    };
    Ok(RssTrace {
        times_s: trace.times_s.clone(),
        values,
        kind: TraceKind::OneBit,
        sample_rate_hz: trace.sample_rate_hz,
        source: with_quantizer(&trace.source, &quant),
    })
}

/// Mid-tread uniform quantizer, `Δ·round(x/Δ)` with ties away from zero.
pub fn quantize_uniform(trace: &RssTrace, quant: &QuantizerSpec) -> Result<RssTrace> {
    trace.require_kind(TraceKind::Continuous)?;
    quant.validate()?;
    let step = quant.step_db;
    let values = trace
        .values
        .iter()
        .map(|&x| step * (x / step).round())
        .collect();
    let quant = QuantizerSpec {
        mode: QuantizerMode::Uniform,
        ..*quant
    };
    Ok(RssTrace {
        times_s: trace.times_s.clone(),
        values,
        kind: TraceKind::UniformQuantized,
        sample_rate_hz: trace.sample_rate_hz,
        source: with_quantizer(&trace.source, &quant),
    })
}

/// Reduces a trace to `±1` samples for the one-bit likelihood.
///
/// One-bit traces pass through. A uniform-quantized trace may occupy at most
/// two adjacent levels; the upper one maps to `+1`. Returns the trace and
/// the threshold between the levels (the midpoint, or the single level when
/// only one is present).
pub fn to_one_bit(trace: &RssTrace) -> Result<(RssTrace, f64)> {
    match trace.kind {
        TraceKind::OneBit => Ok((trace.clone(), 0.0)),
        TraceKind::Continuous => Err(Error::KindMismatch {
            expected: "one-bit or uniform-quantized",
            found: trace.kind.as_str(),
        }),
        TraceKind::UniformQuantized => {
            let levels = trace.levels();
            let (lo, hi) = match levels.as_slice() {
                [] => return Err(Error::EmptyTrace),
                [only] => (*only, *only),
                [lo, hi] => (*lo, *hi),
                more => return Err(Error::domain(format!(
                    "uniform-quantized trace occupies {} levels; one-bit reduction needs at most 2",
                    more.len()
                ))),
            };
            let zeta = if lo == hi { lo } else { 0.5 * (lo + hi) };
            let values = trace
                .values
                .iter()
                .map(|&v| if v >= hi { 1.0 } else { -1.0 })
                .collect();
            Ok((
                RssTrace {
                    times_s: trace.times_s.clone(),
                    values,
                    kind: TraceKind::OneBit,
                    sample_rate_hz: trace.sample_rate_hz,
                    source: trace.source.clone(),
                },
                zeta,
            ))
        }
    }
}
