//! Error-function family evaluated without cancellation or overflow.
//!
//! The one-bit likelihood and its Fisher weight both involve ratios of
//! Gaussian densities to tail probabilities. Written naively these become
//! `0/0` once the signal sits a few noise deviations away from the
//! threshold, so everything here goes through the scaled complementary
//! error function `erfcx(x) = exp(x²)·erfc(x)`.

use crate::scalar::Real;

/// Above this argument `erfcx` switches from `exp(x²)·erfc(x)` to a
/// continued fraction.
const CF_SWITCH: f64 = 5.0;
const CF_TERMS: usize = 60;

/// Beyond this `|u|` the Fisher weight is evaluated in the log domain.
const LOG_DOMAIN_U: f64 = 26.0;

/// `exp(x²)` with the square split so that `hi²` is exact.
#[inline]
fn exp_sq<T: Real>(x: T) -> T {
    let scale = T::lit(4096.0);
    let hi = (x * scale).trunc() / scale;
    let lo = x - hi;
    (hi * hi).exp() * (lo * (hi + hi + lo)).exp()
}

/// Continued fraction for `erfcx(x)`, `x` large and positive.
///
/// erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
fn erfcx_cf<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let mut tail = x;
    for n in (1..=CF_TERMS).rev() {
        tail = x + T::from_usize_exact(n) * half / tail;
    }
    T::FRAC_2_SQRT_PI() * half / tail
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Finite for every `x ≥ 0`; overflows to `+∞` for `x ≲ −26.6` in `f64`.
/// Use [`ln_erfcx`] when the logarithm is what is needed.
pub fn erfcx<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        // erfc(x) ∈ (1, 2] here, no cancellation.
        exp_sq(x) * x.erfc()
    } else if x < T::lit(CF_SWITCH) {
        exp_sq(x) * x.erfc()
    } else if x.is_infinite() {
        T::zero()
    } else {
        erfcx_cf(x)
    }
}

/// `ln erfcx(x)`, finite for all finite `x`.
pub fn ln_erfcx<T: Real>(x: T) -> T {
    if x < T::zero() {
        // erfcx(x) = exp(x²)·erfc(x) with erfc(x) ∈ (1, 2]; for very negative
        // x this tends to x² + ln 2.
        x * x + x.erfc().ln()
    } else {
        erfcx(x).ln()
    }
}

/// `ln(½·erfc(x))`, the log of a Gaussian upper-tail probability `Q(√2·x)`.
pub fn ln_half_erfc<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::lit(0.5).ln() + ln_erfcx(x) - x * x
    } else {
        // ½erfc(x) = 1 − ½erfc(−x)
        (-T::lit(0.5) * (-x).erfc()).ln_1p()
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf<T: Real>(t: T) -> T {
    T::lit(0.5) * (-t / T::SQRT_2()).erfc()
}

/// `exp(−u²)/(1 − erf²(u/√2))`, the per-sample one-bit Fisher weight in
/// noise-normalised units `u = s/σ`.
///
/// Equal to `1/(erfcx(z)·erfcx(−z))` with `z = u/√2`. Decays to zero (as
/// roughly `√(π/2)·|u|·exp(−u²/2)`) instead of producing NaN.
pub fn fisher_weight<T: Real>(u: T) -> T {
    let z = u.abs() / T::SQRT_2();
    if u.abs() > T::lit(LOG_DOMAIN_U) {
        (-(ln_erfcx(z) + ln_erfcx(-z))).exp()
    } else {
        T::one() / (erfcx(z) * erfcx(-z))
    }
}

/// Derivative of `ln(½·erfc(−q·s/(√2σ)))` with respect to `s`.
///
/// Equals `q·√(2/π)/(σ·erfcx(−q·s/(√2σ)))`; bounded by `|s|/σ² + O(1/σ)`.
#[inline]
pub fn one_bit_log_pmf_slope<T: Real>(q: T, s: T, sigma: T) -> T {
    let x = -q * s / (T::SQRT_2() * sigma);
    q * T::FRAC_2_SQRT_PI() / (T::SQRT_2() * sigma * erfcx(x))
}
