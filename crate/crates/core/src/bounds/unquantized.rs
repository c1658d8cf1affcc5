use super::fim::require_noise;
use super::CrbResult;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AcquisitionSpec, SineParams};

/// Large-`N` bounds for the unquantized real tone in white Gaussian noise.
///
/// `var(Â) ≥ 2σ²/N`, `var(B̂) ≥ σ²/N`,
/// `var(ω̂) ≥ 24σ²/(A²·T_s²·N(N²−1))` and
/// `var(φ̂) ≥ 4σ²(2N−1)/(A²·N(N+1))` with the phase referenced to `k = 0`.
/// `condition` is NaN since nothing is inverted.
pub fn unquantized_crb<T: Real>(
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
) -> Result<CrbResult<T>> {
    let sigma = require_noise(acq)?;
    let a = params.amplitude_db;
    if !(a > T::zero()) {
        return Err(Error::Unidentifiable(
            "frequency and phase need A > 0".into(),
        ));
    }
    if acq.num_samples < 3 {
        return Err(Error::domain("unquantized bounds need at least 3 samples"));
    }
    let n = T::from_usize_exact(acq.num_samples);
    let var = sigma * sigma;
    let ts = acq.sample_period_s();
    let two = T::lit(2.0);
    Ok(CrbResult::from_diagonal(
        [
            two * var / n,
            var / n,
            T::lit(24.0) * var / (a * a * ts * ts * n * (n * n - T::one())),
            T::lit(4.0) * var * (two * n - T::one()) / (a * a * n * (n + T::one())),
        ],
        T::nan(),
    ))
}
