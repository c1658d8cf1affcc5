use super::linalg::{zeros, Mat4};
use super::{CrbResult, FisherMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AcquisitionSpec, SineParams};
use crate::special::{fisher_weight, normal_cdf, one_bit_log_pmf_slope};

pub(crate) fn require_noise<T: Real>(acq: &AcquisitionSpec<T>) -> Result<T> {
    let sigma = acq.noise_std_db;
    if !(sigma > T::zero()) {
        return Err(Error::Unidentifiable(
            "one-bit likelihood is degenerate without noise (sigma = 0)".into(),
        ));
    }
    Ok(sigma)
}

fn check_bit<T: Real>(q: T) -> Result<()> {
    if q == T::one() || q == -T::one() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "one-bit sample must be +1 or -1, got {q}"
        )))
    }
}

/// Per-sample regressors `(C_k, t_k·S_k, S_k)` with `t_k = k·T_s`.
pub(crate) fn basis<T: Real>(omega: T, phase: T, ts: T, n: usize) -> Vec<(T, T, T)> {
    (0..n)
        .map(|k| {
            let t = T::from_usize_exact(k) * ts;
            let (s, c) = (omega * t + phase).sin_cos();
            (c, t * s, s)
        })
        .collect()
}

/// `P(y[k] = q) = ½·erfc(−q·(A·C_k + B)/(√2σ))`.
///
/// The less likely outcome is evaluated directly and the other as its
/// complement, so the two probabilities sum to exactly 1.
pub fn pmf_one_bit<T: Real>(
    q: T,
    k: usize,
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
) -> Result<T> {
    check_bit(q)?;
    let sigma = require_noise(acq)?;
    let t = T::from_usize_exact(k) * acq.sample_period_s();
    let s =
        params.amplitude_db * (params.omega() * t + params.phase_rad).cos() + params.dc_offset_db;
    let small = normal_cdf(-(s / sigma).abs());
    let agrees = (q > T::zero()) == (s >= T::zero());
    Ok(if agrees { T::one() - small } else { small })
}

/// Gradient of `ln P(y[k] = q)` with respect to `(A, B, ω, φ)`.
pub fn score<T: Real>(
    q: T,
    k: usize,
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
) -> Result<[T; 4]> {
    check_bit(q)?;
    let sigma = require_noise(acq)?;
    let a = params.amplitude_db;
    let t = T::from_usize_exact(k) * acq.sample_period_s();
    let (sn, cs) = (params.omega() * t + params.phase_rad).sin_cos();
    let slope = one_bit_log_pmf_slope(q, a * cs + params.dc_offset_db, sigma);
    Ok([slope * cs, slope, -slope * a * t * sn, -slope * a * sn])
}

/// `Σ_k w(u_k)·g_k·g_kᵀ` scaled by `2/(πσ²)`.
pub(crate) fn accumulate<T: Real>(a: T, b: T, sigma: T, regs: &[(T, T, T)]) -> Result<Mat4<T>> {
    let mut m = zeros::<T>();
    for (k, &(c, ts, s)) in regs.iter().enumerate() {
        let w = fisher_weight((a * c + b) / sigma);
        if !w.is_finite() {
            return Err(Error::NonFinite { k });
        }
        let g = [c, T::one(), -a * ts, -a * s];
        for i in 0..4 {
            let wg = w * g[i];
            for j in i..4 {
                m[i][j] += wg * g[j];
            }
        }
    }
    let scale = T::lit(2.0) / (T::PI() * sigma * sigma);
    for i in 0..4 {
        for j in i..4 {
            m[i][j] *= scale;
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// Fisher information from the closed-form per-sample weight.
pub fn fim<T: Real>(params: &SineParams<T>, acq: &AcquisitionSpec<T>) -> Result<FisherMatrix<T>> {
    let sigma = require_noise(acq)?;
    if acq.num_samples < 4 {
        return Err(Error::domain("Fisher information needs at least 4 samples"));
    }
    acq.check_nyquist(params.frequency_hz)?;
    let regs = basis(
        params.omega(),
        params.phase_rad,
        acq.sample_period_s(),
        acq.num_samples,
    );
    Ok(FisherMatrix {
        entries: accumulate(params.amplitude_db, params.dc_offset_db, sigma, &regs)?,
        params: *params,
        acq: *acq,
    })
}

/// Fisher information as `Σ_k Σ_q P(q)·score·scoreᵀ`, the defining
/// expectation. Slower than [`fim`] and less robust in saturation.
pub fn fim_from_scores<T: Real>(
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
) -> Result<FisherMatrix<T>> {
    require_noise(acq)?;
    let mut m = zeros::<T>();
    for k in 0..acq.num_samples {
        for q in [T::one(), -T::one()] {
            let p = pmf_one_bit(q, k, params, acq)?;
            let g = score(q, k, params, acq)?;
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += p * g[i] * g[j];
                }
            }
        }
    }
    Ok(FisherMatrix {
        entries: m,
        params: *params,
        acq: *acq,
    })
}

/// Bounds at a single `(φ, B)`.
pub fn crb_point<T: Real>(
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
) -> Result<CrbResult<T>> {
    fim(params, acq)?.crb()
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::signal::{quantize_one_bit, synthesize_with_rng, trial_rng, QuantizerSpec};
    use crate::special::ln_half_erfc;
    use proptest::prelude::*;

    fn paper(b: f64, phase: f64, sigma: f64) -> (SineParams, AcquisitionSpec) {
        (
            SineParams::new(0.025, b, 100.0, phase).unwrap(),
            AcquisitionSpec::new(400.0, 400, sigma, 1).unwrap(),
        )
    }

    #[test]
    fn pmf_examples() {
        let (p, acq) = paper(0.0, 0.3, 0.25);
        let p0 = p.with_amplitude(0.0);
        for k in [0, 7, 399] {
            assert_eq!(pmf_one_bit(1.0, k, &p0, &acq).unwrap(), 0.5);
        }
        // A·C_0 + B = σ at k = 0, φ = 0
        let p1 = SineParams::new(0.1, 0.15, 100.0, 0.0).unwrap();
        let v = pmf_one_bit(1.0, 0, &p1, &acq).unwrap();
        assert!((v - 0.841344746068542948585).abs() < 1e-15);
        let sat = p.with_offset(2.5);
        assert!((pmf_one_bit(1.0, 3, &sat, &acq).unwrap() - 1.0).abs() < 1e-15);
        let low = pmf_one_bit(-1.0, 3, &sat, &acq).unwrap();
        assert!(low > 0.0 && low < 1e-20);
        assert!(matches!(
            pmf_one_bit(1.0, 0, &p, &acq.with_noise(0.0)),
            Err(Error::Unidentifiable(_))
        ));
        assert!(pmf_one_bit(0.5, 0, &p, &acq).is_err());
    }

    #[test]
    fn score_structure() {
        let (p, acq) = paper(0.0, 1.0, 0.25);
        let p0 = p.with_amplitude(0.0);
        for k in 0..20 {
            let up = score(1.0, k, &p0, &acq).unwrap();
            let dn = score(-1.0, k, &p0, &acq).unwrap();
            assert_eq!(up[2], 0.0);
            assert_eq!(up[3], 0.0);
            for i in 0..4 {
                assert_eq!(up[i], -dn[i]);
            }
        }
    }

    fn log_pmf(q: f64, k: usize, th: [f64; 4], acq: &AcquisitionSpec) -> f64 {
        let p = SineParams {
            amplitude_db: th[0],
            dc_offset_db: th[1],
            frequency_hz: th[2] / std::f64::consts::TAU,
            phase_rad: th[3],
        };
        // accurate in both tails, unlike ln(pmf)
        let t = k as f64 * acq.sample_period_s();
        let s = p.amplitude_db * (p.omega() * t + p.phase_rad).cos() + p.dc_offset_db;
        ln_half_erfc(-q * s / (std::f64::consts::SQRT_2 * acq.noise_std_db))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn score_matches_central_differences(
            a in 0.005f64..0.2,
            b in -0.5f64..0.5,
            f in 20.0f64..180.0,
            phase in 0.0f64..std::f64::consts::TAU,
            sigma in 0.05f64..2.0,
            k in 0usize..400,
            up in any::<bool>(),
        ) {
            let q = if up { 1.0 } else { -1.0 };
            let p = SineParams::new(a, b, f, phase).unwrap();
            let acq = AcquisitionSpec::new(400.0, 400, sigma, 0).unwrap();
            let g = score(q, k, &p, &acq).unwrap();
            let th = [a, b, p.omega(), p.phase_rad];
            for i in 0..4 {
                let h = 1e-6 * th[i].abs().max(1e-2);
                let mut hi = th;
                let mut lo = th;
                hi[i] += h;
                lo[i] -= h;
                let fd = (log_pmf(q, k, hi, &acq) - log_pmf(q, k, lo, &acq)) / (2.0 * h);
                let scale = g[i].abs().max(1e-3 * g.iter().map(|v| v.abs()).fold(0.0, f64::max));
                prop_assert!((fd - g[i]).abs() <= 1e-5 * scale, "i={} fd={} g={}", i, fd, g[i]);
            }
        }

        #[test]
        fn fim_symmetric_psd(
            a in 0.005f64..0.2,
            b in -0.5f64..0.5,
            phase in 0.0f64..std::f64::consts::TAU,
            sigma in 0.05f64..2.0,
        ) {
            let p = SineParams::new(a, b, 100.0, phase).unwrap();
            let acq = AcquisitionSpec::new(400.0, 400, sigma, 0).unwrap();
            let m = fim(&p, &acq).unwrap();
            let tr = m.trace();
            for i in 0..4 {
                for j in 0..4 {
                    let x = m.entries[i][j];
                    let y = m.entries[j][i];
                    prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()));
                }
            }
            for e in m.eigenvalues() {
                prop_assert!(e >= -1e-10 * tr);
            }
        }

        #[test]
        fn pmf_sums_to_one(s in -40.0f64..40.0, sigma in 0.01f64..3.0) {
            let p = SineParams::new(0.0, s * sigma, 100.0, 0.0).unwrap();
            let acq = AcquisitionSpec::new(400.0, 8, sigma, 0).unwrap();
            let up = pmf_one_bit(1.0, 0, &p, &acq).unwrap();
            let dn = pmf_one_bit(-1.0, 0, &p, &acq).unwrap();
            prop_assert_eq!(up + dn, 1.0);
            prop_assert!(up >= 0.0 && dn >= 0.0);
        }
    }

    #[test]
    fn closed_form_matches_score_products() {
        for (b, phase, sigma) in [
            (0.1, 0.2, 0.25),
            (-0.4, 2.0, 0.1),
            (0.0, 4.0, 1.5),
            (0.3, 5.5, 0.05),
        ] {
            let (p, acq) = paper(b, phase, sigma);
            let closed = fim(&p, &acq).unwrap();
            let direct = fim_from_scores(&p, &acq).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let d = (closed.entries[i][j] - direct.entries[i][j]).abs();
                    let scale = (closed.entries[i][i] * closed.entries[j][j]).sqrt();
                    assert!(
                        d <= 1e-10 * scale,
                        "({i},{j}) {} vs {}",
                        closed.entries[i][j],
                        direct.entries[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_amplitude_is_singular() {
        let (p, acq) = paper(0.1, 0.0, 0.25);
        let m = fim(&p.with_amplitude(0.0), &acq).unwrap();
        for i in 0..4 {
            assert_eq!(m.entries[2][i], 0.0);
            assert_eq!(m.entries[i][3], 0.0);
        }
        assert!(matches!(
            crb_point(&p.with_amplitude(0.0), &acq),
            Err(Error::SingularFim { .. })
        ));
    }

    #[test]
    fn saturation_is_finite_then_singular() {
        let sigma = 0.25;
        for ratio in [5.0, 10.0, 26.5, 30.0] {
            let (p, acq) = paper(ratio * sigma, 0.4, sigma);
            let m = fim(&p, &acq).unwrap();
            assert!(
                m.entries.iter().flatten().all(|v| v.is_finite()),
                "ratio {ratio}"
            );
        }
        let (p, acq) = paper(5.0 * sigma + 0.025, 0.4, sigma);
        match crb_point(&p, &acq) {
            Err(Error::SingularFim { .. }) => {}
            Ok(r) => assert!(r.std_a_db > 1.0, "{r:?}"),
            Err(e) => panic!("{e}"),
        }
        let (p, acq) = paper(30.0 * sigma, 0.4, sigma);
        assert!(fim(&p, &acq).unwrap().entries[0][0] < 1e-150);
    }

    #[test]
    fn doubling_n_at_least_doubles_aa() {
        let (p, acq) = paper(0.0, 0.9, 0.3);
        let one = fim(&p, &acq).unwrap().entries[0][0];
        let two = fim(&p, &acq.with_samples(800)).unwrap().entries[0][0];
        assert!(two >= 2.0 * one * (1.0 - 1e-12));
    }

    #[test]
    fn f32_agrees_with_f64() {
        let (p, acq) = paper(0.1, 0.7, 0.25);
        let p32 = SineParams::<f32>::new(0.025, 0.1, 100.0, 0.7).unwrap();
        let acq32 = AcquisitionSpec::<f32>::new(400.0, 400, 0.25, 1).unwrap();
        let r64 = crb_point(&p, &acq).unwrap();
        let r32 = crb_point(&p32, &acq32).unwrap();
        assert!(((r32.std_f_hz as f64 - r64.std_f_hz) / r64.std_f_hz).abs() < 1e-3);
        assert!(((r32.std_a_db as f64 - r64.std_a_db) / r64.std_a_db).abs() < 1e-3);
    }

    /// Empirical covariance of the summed score over simulated one-bit
    /// vectors against the closed form.
    fn score_covariance(a: f64, b: f64, f: f64, phase: f64, sigma: f64, trials: u64) {
        let p = SineParams::new(a, b, f, phase).unwrap();
        let acq = AcquisitionSpec::new(400.0, 400, sigma, 0).unwrap();
        let model = fim(&p, &acq).unwrap();
        let mut sum = [0.0; 4];
        let mut prod = [[0.0; 4]; 4];
        // scores depend on y only through its sign, so precompute both
        let up: Vec<[f64; 4]> = (0..400).map(|k| score(1.0, k, &p, &acq).unwrap()).collect();
        let dn: Vec<[f64; 4]> = (0..400)
            .map(|k| score(-1.0, k, &p, &acq).unwrap())
            .collect();
        for t in 0..trials {
            let mut rng = trial_rng(99, t);
            let x = synthesize_with_rng(&p, &acq, &mut rng).unwrap();
            let y = quantize_one_bit(&x, &QuantizerSpec::one_bit(0.0)).unwrap();
            let mut g = [0.0; 4];
            for (k, v) in y.values.iter().enumerate() {
                let s = if *v > 0.0 { &up[k] } else { &dn[k] };
                for i in 0..4 {
                    g[i] += s[i];
                }
            }
            for i in 0..4 {
                sum[i] += g[i];
                for j in 0..4 {
                    prod[i][j] += g[i] * g[j];
                }
            }
        }
        let n = trials as f64;
        for i in 0..4 {
            for j in 0..4 {
                let cov = prod[i][j] / n - sum[i] * sum[j] / (n * n);
                let want = model.entries[i][j];
                let scale = (model.entries[i][i] * model.entries[j][j]).sqrt();
                let tol = if i == j { 0.03 * want } else { 0.05 * scale };
                assert!(
                    (cov - want).abs() <= tol,
                    "({i},{j}) cov {cov} vs {want} at a={a} b={b} sigma={sigma}"
                );
            }
        }
    }

    #[test]
    fn score_covariance_identity_paper_point() {
        score_covariance(0.025, 0.1, 100.0, 0.0, 0.25, 100_000);
    }

    #[test]
    #[ignore = "slow; run by the acceptance suite"]
    fn score_covariance_identity_more_points() {
        for (a, b, f, ph, s) in [
            (0.1, -0.2, 60.0, 1.0, 0.5),
            (0.2, 0.3, 140.0, 3.0, 0.15),
            (0.05, 0.0, 100.0, 5.0, 1.0),
            (0.01, -0.45, 37.0, 2.0, 0.3),
        ] {
            score_covariance(a, b, f, ph, s, 100_000);
        }
    }
}
