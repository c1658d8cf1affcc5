use super::simplex::minimize;
use super::{fold, Band, EstimationResult, Method};
use crate::error::{Error, Result};
use crate::signal::{to_one_bit, AcquisitionSpec, RssTrace, TraceKind};
use crate::special::{fisher_weight, ln_half_erfc, normal_cdf, one_bit_log_pmf_slope};

use std::f64::consts::{FRAC_2_PI, SQRT_2, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Defaults to [`Band::full`].
    pub band: Option<Band>,
    /// Defaults to `f_s/(4N)`.
    pub grid_spacing_hz: Option<f64>,
    /// Grid maxima refined in full.
    pub candidates: usize,
    /// Fisher-scoring steps per grid frequency.
    pub coarse_iters: usize,
    /// Simplex stopping rule on the log-likelihood.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            band: None,
            grid_spacing_hz: None,
            candidates: 3,
            coarse_iters: 2,
            rel_tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// One-bit view of a quantized trace and the threshold it was cut at.
///
/// Traces occupying more than two levels are cut at the level boundary that
/// splits the samples most evenly.
pub fn reduce_to_one_bit(trace: &RssTrace) -> Result<(RssTrace, f64)> {
    if trace.kind != TraceKind::UniformQuantized || trace.levels().len() <= 2 {
        return to_one_bit(trace);
    }
    let levels = trace.levels();
    let n = trace.len();
    let mut best = (usize::MAX, 0);
    for i in 0..levels.len() - 1 {
        let above = trace.values.iter().filter(|&&v| v >= levels[i + 1]).count();
        let imbalance = (2 * above).abs_diff(n);
        if imbalance < best.0 {
            best = (imbalance, i);
        }
    }
    let hi = levels[best.1 + 1];
    let zeta = 0.5 * (levels[best.1] + hi);
    let values = trace
        .values
        .iter()
        .map(|&v| if v >= hi { 1.0 } else { -1.0 })
        .collect();
    Ok((
        RssTrace {
            values,
            kind: TraceKind::OneBit,
            ..trace.clone()
        },
        zeta,
    ))
}

/// `σ·Φ⁻¹(p)` by bisection.
fn probit(p: f64, sigma: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sigma * 0.5 * (lo + hi)
}

/// Samples and regressors at one trial frequency. The model is
/// `s[k] = a·cos(ωt_k) + b·sin(ωt_k) + B`.
struct Linear<'a> {
    y: &'a [f64],
    c: Vec<f64>,
    s: Vec<f64>,
    sigma: f64,
}

impl<'a> Linear<'a> {
    fn new(y: &'a [f64], f: f64, ts: f64, sigma: f64) -> Self {
        let w = TAU * f * ts;
        let (s, c) = (0..y.len()).map(|k| (w * k as f64).sin_cos()).unzip();
        Self { y, c, s, sigma }
    }

    fn log_lik(&self, th: &[f64; 3]) -> f64 {
        let scale = SQRT_2 * self.sigma;
        (0..self.y.len())
            .map(|k| {
                ln_half_erfc(-self.y[k] * (th[0] * self.c[k] + th[1] * self.s[k] + th[2]) / scale)
            })
            .sum()
    }

    /// Fisher-scoring step `I⁻¹·∇ℓ`.
    fn step(&self, th: &[f64; 3]) -> Option<[f64; 3]> {
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        let info = FRAC_2_PI / (self.sigma * self.sigma);
        for k in 0..self.y.len() {
            let x = [self.c[k], self.s[k], 1.0];
            let s = th[0] * x[0] + th[1] * x[1] + th[2];
            let slope = one_bit_log_pmf_slope(self.y[k], s, self.sigma);
            let w = info * fisher_weight(s / self.sigma);
            for i in 0..3 {
                g[i] += slope * x[i];
                for j in 0..3 {
                    h[i][j] += w * x[i] * x[j];
                }
            }
        }
        solve3(&h, &g)
    }

    /// Fisher scoring from `th`, with step halving when `line_search`.
    fn fit(&self, mut th: [f64; 3], iters: usize, line_search: bool) -> ([f64; 3], f64) {
        let mut ll = if line_search {
            self.log_lik(&th)
        } else {
            f64::NAN
        };
        let radius = 5.0 * self.sigma;
        for _ in 0..iters {
            let Some(mut d) = self.step(&th) else { break };
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                break;
            }
            if norm > radius {
                d = d.map(|v| v * radius / norm);
            }
            if !line_search {
                for i in 0..3 {
                    th[i] += d[i];
                }
                continue;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let cand = [th[0] + t * d[0], th[1] + t * d[1], th[2] + t * d[2]];
                let lc = self.log_lik(&cand);
                if lc >= ll {
                    let gain = lc - ll;
                    th = cand;
                    ll = lc;
                    accepted = gain > 1e-12 * ll.abs();
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if !line_search {
            ll = self.log_lik(&th);
        }
        (th, ll)
    }
}

pub(crate) fn solve3(m: &[[f64; 3]; 3], g: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let mut mi = *m;
        for r in 0..3 {
            mi[r][i] = g[r];
        }
        *o = det(&mi) / d;
    }
    Some(out)
}

pub(crate) fn frequency_grid(band: &Band, spacing: f64) -> Vec<f64> {
    let n = ((band.hi_hz - band.lo_hz) / spacing).floor() as usize;
    (0..=n).map(|j| band.lo_hz + j as f64 * spacing).collect()
}

/// Indices of the `count` largest local maxima of `v`.
pub(crate) fn top_peaks(v: &[f64], count: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = (0..v.len())
        .filter(|&j| (j == 0 || v[j] >= v[j - 1]) && (j + 1 == v.len() || v[j] >= v[j + 1]))
        .collect();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    peaks.truncate(count.max(1));
    peaks
}

/// One-bit maximum-likelihood fit with the default options.
pub fn mle_fit(
    trace: &RssTrace,
    band: Option<Band>,
    acq: &AcquisitionSpec,
) -> Result<EstimationResult> {
    mle_fit_with(
        trace,
        acq,
        &MleOptions {
            band,
            ..MleOptions::default()
        },
    )
}

/// One-bit maximum-likelihood fit of `(A, B, f, φ)` with `σ =
/// acq.noise_std_db` known.
///
/// Every frequency of a grid gets a few Fisher-scoring steps on the linear
/// parameters `(A cos φ, −A sin φ, B)`, whose likelihood is concave. The
/// best grid maxima are then fitted fully and polished by a simplex over
/// all four parameters.
pub fn mle_fit_with(
    trace: &RssTrace,
    acq: &AcquisitionSpec,
    opts: &MleOptions,
) -> Result<EstimationResult> {
    let (bits, zeta) = reduce_to_one_bit(trace)?;
    let sigma = acq.noise_std_db;
    if !(sigma > 0.0) {
        return Err(Error::Unidentifiable(
            "one-bit likelihood needs sigma > 0".into(),
        ));
    }
    let n = bits.len();
    if n < 4 {
        return Err(Error::domain("need at least 4 samples"));
    }
    let fs = bits.sample_rate_hz;
    let band = opts.band.unwrap_or_else(|| Band::full(fs, n));
    band.validate(fs)?;
    let ups = bits.values.iter().filter(|&&v| v > 0.0).count();
    if ups == 0 || ups == n {
        return Err(Error::Unidentifiable(
            "constant one-bit trace carries no tone information".into(),
        ));
    }
    let ts = bits.sample_period_s();
    let y = &bits.values;
    let b0 = probit(ups as f64 / n as f64, sigma);
    let spacing = opts.grid_spacing_hz.unwrap_or(fs / (4.0 * n as f64));
    if !(spacing > 0.0) {
        return Err(Error::domain("grid spacing must be > 0"));
    }

    let grid = frequency_grid(&band, spacing);
    let coarse: Vec<([f64; 3], f64)> = grid
        .iter()
        .map(|&f| Linear::new(y, f, ts, sigma).fit([0.0, 0.0, b0], opts.coarse_iters, false))
        .collect();
    let ll: Vec<f64> = coarse.iter().map(|c| c.1).collect();

    let objective = |x: &[f64; 4]| -> f64 {
        if !band.contains(x[3]) {
            return f64::INFINITY;
        }
        -Linear::new(y, x[3], ts, sigma).log_lik(&[x[0], x[1], x[2]])
    };

    let mut best: Option<(f64, [f64; 4], usize, bool)> = None;
    for j in top_peaks(&ll, opts.candidates) {
        let (th, _) = Linear::new(y, grid[j], ts, sigma).fit(coarse[j].0, 50, true);
        let amp = th[0].hypot(th[1]);
        let step = [
            (0.25 * amp).max(0.05 * sigma),
            (0.25 * amp).max(0.05 * sigma),
            0.1 * sigma,
            0.5 * spacing,
        ];
        let r = minimize(
            objective,
            [th[0], th[1], th[2], grid[j]],
            step,
            opts.rel_tol,
            opts.max_iter,
        );
        if best.as_ref().is_none_or(|b| r.fx < b.0) {
            best = Some((r.fx, r.x, r.iterations, r.converged));
        }
    }
    let (nll, x, iterations, converged) = best.expect("at least one candidate");
    let amp = x[0].hypot(x[1]);
    let phase = (-x[1]).atan2(x[0]);
    Ok(EstimationResult {
        estimate: fold(amp, x[2], x[3], phase)?,
        threshold_db: zeta,
        log_likelihood: -nll,
        converged,
        iterations,
        method: Method::Mle,
    })
}
