//! Received-power change caused by a vibrating reflector.
//!
//! The channel is split into an unaffected phasor of amplitude `a` and an
//! affected phasor `b = β·a` at relative phase `θ`. A surface displacement
//! of `Δz` (peak to peak) rotates the affected phasor by `4πΔz/λ`, and the
//! first-order change of the dB power follows from the law of cosines.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// `β` values at or above `1 − BETA_EPS` are rejected by the formulas that
/// diverge as `β → 1`.
pub const BETA_EPS: f64 = 1e-9;

/// RF wavelength for a carrier frequency.
pub fn wavelength_from_carrier<T: Real>(carrier_hz: T) -> Result<T> {
    if !(carrier_hz.is_finite() && carrier_hz > T::zero()) {
        return Err(Error::domain("carrier frequency must be finite and > 0"));
    }
    Ok(T::lit(SPEED_OF_LIGHT_M_S) / carrier_hz)
}

/// Phasor geometry of a two-group multipath channel with one vibrating
/// reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationScene<T> {
    /// Amplitude of the unaffected phasor sum.
    pub a: T,
    /// Relative amplitude of the affected component, `b/a`.
    pub beta: T,
    /// Relative phase of the affected component, radians.
    pub theta: T,
    /// Peak-to-peak surface displacement, meters.
    pub delta_z_m: T,
    /// RF wavelength, meters.
    pub wavelength_m: T,
}

impl<T: Real> VibrationScene<T> {
    pub fn new(a: T, beta: T, theta: T, delta_z_m: T, wavelength_m: T) -> Result<Self> {
        let scene = Self {
            a,
            beta,
            theta,
            delta_z_m,
            wavelength_m,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Unit unaffected amplitude at a given carrier.
    pub fn at_carrier(beta: T, theta: T, delta_z_m: T, carrier_hz: T) -> Result<Self> {
        Self::new(
            T::one(),
            beta,
            theta,
            delta_z_m,
            wavelength_from_carrier(carrier_hz)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.a,
            self.beta,
            self.theta,
            self.delta_z_m,
            self.wavelength_m,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("vibration scene has non-finite fields"));
        }
        if self.a <= T::zero() {
            return Err(Error::domain("a must be > 0"));
        }
        if self.beta < T::zero() {
            return Err(Error::domain("beta must be >= 0"));
        }
        if self.delta_z_m < T::zero() {
            return Err(Error::domain("delta_z must be >= 0"));
        }
        if self.wavelength_m <= T::zero() {
            return Err(Error::domain("wavelength must be > 0"));
        }
        Ok(())
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_delta_z(mut self, delta_z_m: T) -> Self {
        self.delta_z_m = delta_z_m;
        self
    }

    /// `80πΔz/(ln 10·λ)`, the dB-per-radian scale shared by the ΔP formulas.
    fn gain(&self) -> T {
        T::lit(80.0) * T::PI() * self.delta_z_m / (T::LN_10() * self.wavelength_m)
    }
}

fn require_beta_below_one<T: Real>(beta: T) -> Result<()> {
    if beta >= T::one() - T::lit(BETA_EPS) {
        return Err(Error::domain(format!(
            "beta = {beta} must be < 1 (the power change diverges as beta -> 1)"
        )));
    }
    Ok(())
}

/// Received power in dB of the combined phasor,
/// `10·log10(a² + b² + 2ab·cos θ)`.
///
/// Perfect cancellation (`β = 1`, `θ = π`) has no finite dB value and is
/// reported as a domain error.
pub fn baseline_power_db<T: Real>(scene: &VibrationScene<T>) -> Result<T> {
    scene.validate()?;
    let a = scene.a;
    let b = scene.beta * a;
    let power = a * a + b * b + T::lit(2.0) * a * b * scene.theta.cos();
    // Tolerate rounding around an exact null.
    if power <= T::epsilon() * (a * a + b * b) {
        return Err(Error::domain("phasors cancel: received power is zero"));
    }
    Ok(T::lit(10.0) * power.log10())
}

/// Signed first-order power change in dB caused by the displacement.
///
/// `ΔP = 80πΔz/(ln 10·λ) · β sin θ / (1 + β² + 2β cos θ)`. Callers needing
/// the magnitude take `abs()`.
pub fn delta_p_db<T: Real>(scene: &VibrationScene<T>) -> Result<T> {
    scene.validate()?;
    let beta = scene.beta;
    let denom = T::one() + beta * beta + T::lit(2.0) * beta * scene.theta.cos();
    if denom <= T::epsilon() {
        return Err(Error::domain(
            "degenerate geometry: 1 + beta^2 + 2 beta cos(theta) = 0",
        ));
    }
    Ok(scene.gain() * beta * scene.theta.sin() / denom)
}

/// Relative phase that maximises [`delta_p_db`], `arccos(−2β/(1 + β²))`.
pub fn theta_max<T: Real>(beta: T) -> Result<T> {
    if !beta.is_finite() || beta < T::zero() {
        return Err(Error::domain("beta must be finite and >= 0"));
    }
    require_beta_below_one(beta)?;
    Ok((-T::lit(2.0) * beta / (T::one() + beta * beta)).acos())
}

/// Largest power change over all phases, `80πΔz/(ln 10·λ) · β/(1 − β²)`.
/// The scene's `theta` is ignored.
pub fn delta_p_max_db<T: Real>(scene: &VibrationScene<T>) -> Result<T> {
    scene.validate()?;
    if scene.beta <= T::zero() {
        return Err(Error::domain("beta must be in (0, 1) for the maximum"));
    }
    require_beta_below_one(scene.beta)?;
    let beta = scene.beta;
    Ok(scene.gain() * beta / (T::one() - beta * beta))
}

/// Mean magnitude of the power change for a phase uniform on `[0, 2π)`,
/// `(8Δz/λ)·10·log10((1 + β)/(1 − β))`.
///
/// The signed change averages to zero over a full turn; this closed form is
/// the average of `|ΔP|`. The scene's `theta` is ignored.
pub fn expected_delta_p_db<T: Real>(scene: &VibrationScene<T>) -> Result<T> {
    scene.validate()?;
    require_beta_below_one(scene.beta)?;
    let beta = scene.beta;
    Ok(T::lit(8.0) * scene.delta_z_m / scene.wavelength_m
        * T::lit(10.0)
        * ((T::one() + beta) / (T::one() - beta)).log10())
}
