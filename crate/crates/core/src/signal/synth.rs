use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AcquisitionSpec, RssTrace, SineParams, TraceKind, TraceSource};
use crate::error::Result;

/// Independent random stream for `(seed, index)`.
///
/// Streams with different indices never overlap, so trials can run in any
/// order or in parallel and still reproduce bit-for-bit.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `x[k] = A·cos(ω·k·T_s + φ) + B + v[k]` with `v[k] ~ N(0, σ²)` i.i.d.,
/// drawn from stream 0 of `acq.rng_seed`.
pub fn synthesize(params: &SineParams, acq: &AcquisitionSpec) -> Result<RssTrace> {
    let mut rng = trial_rng(acq.rng_seed, 0);
    synthesize_with_rng(params, acq, &mut rng)
}

/// As [`synthesize`], drawing the noise from a caller-supplied generator.
pub fn synthesize_with_rng<R: Rng + ?Sized>(
    params: &SineParams,
    acq: &AcquisitionSpec,
    rng: &mut R,
) -> Result<RssTrace> {
    acq.validate()?;
    acq.check_nyquist(params.frequency_hz)?;
    let ts = acq.sample_period_s();
    let w = params.omega();
    let n = acq.num_samples;
    let mut times_s = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * ts;
        let noise = if acq.noise_std_db > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            acq.noise_std_db * z
        } else {
            0.0
        };
        times_s.push(t);
        values.push(
            params.amplitude_db * (w * ts * k as f64 + params.phase_rad).cos()
                + params.dc_offset_db
                + noise,
        );
    }
    Ok(RssTrace {
        times_s,
        values,
        kind: TraceKind::Continuous,
        sample_rate_hz: acq.sample_rate_hz,
        source: TraceSource::Synthetic {
            params: *params,
            acq: *acq,
            quantizer: None,
        },
    })
}
