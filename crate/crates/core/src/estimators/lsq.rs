use super::mle::{frequency_grid, solve3, top_peaks};
use super::simplex::minimize;
use super::{fold, Band, EstimationResult, Method};
use crate::error::{Error, Result};
use crate::signal::{RssTrace, TraceKind};

use std::f64::consts::TAU;

fn rss(y: &[f64], ts: f64, x: &[f64; 4]) -> f64 {
    let w = TAU * x[3] * ts;
    y.iter()
        .enumerate()
        .map(|(k, v)| {
            let (s, c) = (w * k as f64).sin_cos();
            (v - x[0] * c - x[1] * s - x[2]).powi(2)
        })
        .sum()
}

/// Linear least-squares coefficients `(a, b, B)` at frequency `f`.
fn linear_fit(y: &[f64], ts: f64, f: f64) -> Option<[f64; 3]> {
    let w = TAU * f * ts;
    let mut m = [[0.0; 3]; 3];
    let mut g = [0.0; 3];
    for (k, v) in y.iter().enumerate() {
        let (s, c) = (w * k as f64).sin_cos();
        let x = [c, s, 1.0];
        for i in 0..3 {
            g[i] += x[i] * v;
            for j in 0..3 {
                m[i][j] += x[i] * x[j];
            }
        }
    }
    solve3(&m, &g)
}

/// Least-squares tone fit to a continuous trace: grid search over
/// frequency, then a simplex over all four parameters.
pub fn lsq_fit(trace: &RssTrace, band: Option<Band>) -> Result<EstimationResult> {
    trace.require_kind(TraceKind::Continuous)?;
    let n = trace.len();
    if n < 4 {
        return Err(Error::domain("need at least 4 samples"));
    }
    let fs = trace.sample_rate_hz;
    let band = band.unwrap_or_else(|| Band::full(fs, n));
    band.validate(fs)?;
    let ts = trace.sample_period_s();
    let y = &trace.values;
    let spacing = fs / (4.0 * n as f64);
    let grid = frequency_grid(&band, spacing);
    let fits: Vec<Option<[f64; 3]>> = grid.iter().map(|&f| linear_fit(y, ts, f)).collect();
    let score: Vec<f64> = grid
        .iter()
        .zip(&fits)
        .map(|(&f, th)| th.map_or(f64::NEG_INFINITY, |t| -rss(y, ts, &[t[0], t[1], t[2], f])))
        .collect();
    let j = top_peaks(&score, 1)[0];
    let th =
        fits[j].ok_or_else(|| Error::Unidentifiable("least-squares design is singular".into()))?;
    let amp = th[0].hypot(th[1]);
    let r = minimize(
        |x: &[f64; 4]| {
            if band.contains(x[3]) {
                rss(y, ts, x)
            } else {
                f64::INFINITY
            }
        },
        [th[0], th[1], th[2], grid[j]],
        [
            0.1 * amp.max(1e-6),
            0.1 * amp.max(1e-6),
            0.1 * amp.max(1e-6),
            0.5 * spacing,
        ],
        1e-12,
        400,
    );
    let x = r.x;
    Ok(EstimationResult {
        estimate: fold(x[0].hypot(x[1]), x[2], x[3], (-x[1]).atan2(x[0]))?,
        threshold_db: 0.0,
        log_likelihood: f64::NAN,
        converged: r.converged,
        iterations: r.iterations,
        method: Method::LeastSquares,
    })
}
