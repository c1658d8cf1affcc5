//! Fisher information and Cramér–Rao bounds for the one-bit quantized tone
//! `y[k] = sign(A·C_k + B + v[k])`, `C_k = cos(ω·k·T_s + φ)`.
//!
//! Parameters are always ordered `(A, B, ω, φ)`. Bounds on `ω` are in
//! rad²/s²; the `std_f_hz` fields convert to Hz.

mod average;
mod fim;
pub(crate) mod linalg;
mod sweep;
mod unquantized;

pub use average::{crb_averaged, AveragedCrb, AveragingGrid, AvgMode};
pub use fim::{crb_point, fim, fim_from_scores, pmf_one_bit, score};
pub use linalg::Mat4;
pub use sweep::{
    default_sigma_grid, optimal_noise, sweep_contour, sweep_noise, sweep_sample_rate,
    sweep_step_size, ContourTable, NoiseRow, OperatingPoint, OptimalNoise, RateRow, RateSweep,
    SigmaSearch, StepRow, SweepConfig,
};
pub use unquantized::unquantized_crb;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AcquisitionSpec, SineParams};

/// Largest accepted condition number of the unit-diagonal-scaled FIM.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Averaged results with more failed cells than this are flagged.
pub const FLAG_FAILURE_FRACTION: f64 = 0.05;

/// The guard for type `T`: [`CONDITION_LIMIT`], tightened for `f32`.
pub fn condition_limit<T: Real>() -> T {
    T::lit(CONDITION_LIMIT).min(T::lit(1e-2) / T::epsilon())
}

/// 4×4 Fisher information matrix and the point it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T = f64> {
    pub entries: Mat4<T>,
    pub params: SineParams<T>,
    pub acq: AcquisitionSpec<T>,
}

impl<T: Real> FisherMatrix<T> {
    pub fn trace(&self) -> T {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    pub fn eigenvalues(&self) -> [T; 4] {
        linalg::sym_eigen(&self.entries).values
    }

    /// Inverts and extracts the bounds, failing with
    /// [`Error::SingularFim`] above [`condition_limit`].
    pub fn crb(&self) -> Result<CrbResult<T>> {
        let (inv, condition) = linalg::equilibrated_inverse(&self.entries);
        match inv {
            Some(inv) if condition <= condition_limit::<T>() => Ok(CrbResult::from_diagonal(
                [inv[0][0], inv[1][1], inv[2][2], inv[3][3]],
                condition,
            )),
            _ => Err(Error::SingularFim {
                condition: condition.as_f64(),
            }),
        }
    }
}

/// Variance bounds, diagonal of the inverse FIM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbResult<T = f64> {
    /// dB².
    pub crb_a: T,
    /// dB².
    pub crb_b: T,
    /// rad²/s².
    pub crb_omega: T,
    /// rad².
    pub crb_phi: T,
    /// `√crb_a`, dB.
    pub std_a_db: T,
    /// `√crb_omega/(2π)`, Hz.
    pub std_f_hz: T,
    /// Condition number of the scaled FIM; NaN for closed-form bounds.
    pub condition: T,
}

impl<T: Real> CrbResult<T> {
    pub(crate) fn from_diagonal(d: [T; 4], condition: T) -> Self {
        Self {
            crb_a: d[0],
            crb_b: d[1],
            crb_omega: d[2],
            crb_phi: d[3],
            std_a_db: d[0].sqrt(),
            std_f_hz: d[2].sqrt() / T::TAU(),
            condition,
        }
    }
}
