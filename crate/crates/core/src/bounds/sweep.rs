use super::average::{crb_averaged, AveragingGrid, AvgMode};
use super::unquantized::unquantized_crb;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AcquisitionSpec, SineParams};

/// Tone and sampling setup shared by the sweeps; phase and offset are
/// averaged over and `σ` is the swept variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T = f64> {
    pub amplitude_db: T,
    pub frequency_hz: T,
    pub sample_rate_hz: T,
    pub num_samples: usize,
}

impl<T: Real> OperatingPoint<T> {
    pub fn new(
        amplitude_db: T,
        frequency_hz: T,
        sample_rate_hz: T,
        num_samples: usize,
    ) -> Result<Self> {
        let op = Self {
            amplitude_db,
            frequency_hz,
            sample_rate_hz,
            num_samples,
        };
        op.validate()?;
        Ok(op)
    }

    /// `A = 0.025` dB, `f = 100` Hz, `f_s = 400` Hz, `N = 400`.
    pub fn reference() -> Self {
        Self {
            amplitude_db: T::lit(0.025),
            frequency_hz: T::lit(100.0),
            sample_rate_hz: T::lit(400.0),
            num_samples: 400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if !(self.amplitude_db > T::zero()) {
            return Err(Error::Unidentifiable(
                "bounds need a nonzero amplitude".into(),
            ));
        }
        self.acq(T::one())?.check_nyquist(self.frequency_hz)
    }

    pub fn params(&self) -> Result<SineParams<T>> {
        SineParams::new(self.amplitude_db, T::zero(), self.frequency_hz, T::zero())
    }

    pub fn acq(&self, sigma: T) -> Result<AcquisitionSpec<T>> {
        AcquisitionSpec::new(self.sample_rate_hz, self.num_samples, sigma, 0)
    }

    /// Same tone observed for `observation_s` at rate `fs`: `N = round(fs·T)`.
    /// A tone at or above the new Nyquist frequency is moved to `fs/4`;
    /// the second value reports whether that happened.
    pub fn at_sample_rate(&self, fs: T, observation_s: T) -> (Self, bool) {
        let n = (fs * observation_s).round().to_usize().unwrap_or(0);
        let scaled = self.frequency_hz >= fs / T::lit(2.0);
        let frequency_hz = if scaled {
            fs / T::lit(4.0)
        } else {
            self.frequency_hz
        };
        (
            Self {
                frequency_hz,
                sample_rate_hz: fs,
                num_samples: n,
                ..*self
            },
            scaled,
        )
    }
}

/// Log-spaced `σ` search grid `[lo·Δ, hi·Δ]` and golden-section tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSearch {
    pub points: usize,
    pub lo_ratio: f64,
    pub hi_ratio: f64,
    /// Final bracket width in `ln σ`.
    pub log_tol: f64,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        Self {
            points: 60,
            lo_ratio: 0.01,
            hi_ratio: 3.0,
            log_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub grid: AveragingGrid,
    pub mode: AvgMode,
    pub search: SigmaSearch,
    /// Observation time used when the sample rate is swept, s.
    pub observation_s: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: AveragingGrid::default(),
            mode: AvgMode::Crb,
            search: SigmaSearch::default(),
            observation_s: 1.0,
        }
    }
}

pub fn default_sigma_grid<T: Real>(step_db: T, search: &SigmaSearch) -> Vec<T> {
    let lo = (step_db * T::lit(search.lo_ratio)).ln();
    let hi = (step_db * T::lit(search.hi_ratio)).ln();
    let n = search.points.max(2);
    (0..n)
        .map(|i| (lo + (hi - lo) * T::from_usize_exact(i) / T::from_usize_exact(n - 1)).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow<T = f64> {
    pub sigma_db: T,
    pub std_a_db: T,
    pub std_f_hz: T,
    /// Unquantized reference at the same `σ`.
    pub unquantized_std_a_db: T,
    pub unquantized_std_f_hz: T,
    pub failure_fraction: T,
    pub flagged: bool,
    /// Set when the whole point failed; the bounds are then NaN.
    pub error: Option<String>,
}

impl<T: Real> NoiseRow<T> {
    fn usable(&self) -> bool {
        !self.flagged && self.std_f_hz.is_finite() && self.std_a_db.is_finite()
    }
}

fn check_increasing<T: Real>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > T::zero() && v.is_finite())) {
        return Err(Error::domain(format!("{what} grid must be finite and > 0")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!(
            "{what} grid must be strictly increasing"
        )));
    }
    Ok(())
}

fn noise_row<T: Real>(
    op: &OperatingPoint<T>,
    sigma: T,
    step_db: T,
    cfg: &SweepConfig,
) -> Result<NoiseRow<T>> {
    let params = op.params()?;
    let acq = op.acq(sigma)?;
    let unq = unquantized_crb(&params, &acq)?;
    let row = match crb_averaged(&params, &acq, step_db, &cfg.grid, cfg.mode) {
        Ok(r) => NoiseRow {
            sigma_db: sigma,
            std_a_db: r.std_a_db,
            std_f_hz: r.std_f_hz,
            unquantized_std_a_db: unq.std_a_db,
            unquantized_std_f_hz: unq.std_f_hz,
            failure_fraction: r.failure_fraction,
            flagged: r.flagged,
            error: None,
        },
        Err(
            e @ (Error::AllCellsSingular | Error::SingularFim { .. } | Error::NonFinite { .. }),
        ) => NoiseRow {
            sigma_db: sigma,
            std_a_db: T::nan(),
            std_f_hz: T::nan(),
            unquantized_std_a_db: unq.std_a_db,
            unquantized_std_f_hz: unq.std_f_hz,
            failure_fraction: if matches!(e, Error::AllCellsSingular) {
                T::one()
            } else {
                T::nan()
            },
            flagged: true,
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };
    Ok(row)
}

/// Averaged bounds along a `σ` grid.
pub fn sweep_noise<T: Real>(
    op: &OperatingPoint<T>,
    sigmas: &[T],
    step_db: T,
    cfg: &SweepConfig,
) -> Result<Vec<NoiseRow<T>>> {
    op.validate()?;
    check_increasing(sigmas, "sigma")?;
    if !(step_db > T::zero() && step_db.is_finite()) {
        return Err(Error::domain("step size must be finite and > 0"));
    }
    sigmas
        .iter()
        .map(|&s| noise_row(op, s, step_db, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalNoise<T = f64> {
    pub step_db: T,
    /// Minimizer of the averaged frequency bound.
    pub sigma_opt_omega: T,
    /// Minimizer of the averaged amplitude bound.
    pub sigma_opt_a: T,
    /// `sigma_opt_a / sigma_opt_omega`.
    pub ratio: T,
    pub min_std_f_hz: T,
    pub min_std_a_db: T,
    /// False when either curve is not unimodal over the usable grid points;
    /// the grid argmin is then returned without refinement.
    pub unimodal: bool,
    pub warnings: Vec<String>,
    pub curve: Vec<NoiseRow<T>>,
}

fn is_unimodal<T: Real>(v: &[T], m: usize) -> bool {
    let slack = T::one() - T::lit(1e-9);
    v[..=m].windows(2).all(|w| w[0] >= w[1] * slack)
        && v[m..].windows(2).all(|w| w[1] >= w[0] * slack)
}

/// Golden-section search for the minimum of `f(ln σ)` on `[lo, hi]`.
fn golden<T: Real, F: FnMut(T) -> T>(mut lo: T, mut hi: T, tol: T, mut f: F) -> (T, T) {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `σ` minimizing the averaged bounds for step `Δ`: grid search on
/// [`default_sigma_grid`] then golden-section refinement between the
/// neighbours of the grid minimum. Points whose failure fraction is flagged
/// are not eligible.
pub fn optimal_noise<T: Real>(
    op: &OperatingPoint<T>,
    step_db: T,
    cfg: &SweepConfig,
) -> Result<OptimalNoise<T>> {
    let sigmas = default_sigma_grid(step_db, &cfg.search);
    let curve = sweep_noise(op, &sigmas, step_db, cfg)?;
    let usable: Vec<&NoiseRow<T>> = curve.iter().filter(|r| r.usable()).collect();
    if usable.is_empty() {
        return Err(Error::AllCellsSingular);
    }
    let mut warnings = Vec::new();
    let mut unimodal = true;
    let params = op.params()?;
    let tol = T::lit(cfg.search.log_tol);

    let mut solve = |key: fn(&NoiseRow<T>) -> T, name: &str| -> Result<(T, T)> {
        let v: Vec<T> = usable.iter().map(|r| key(r)).collect();
        let m = (0..v.len()).fold(0, |m, i| if v[i] < v[m] { i } else { m });
        if !is_unimodal(&v, m) {
            unimodal = false;
            warnings.push(format!(
                "{name} curve is not unimodal; returning grid argmin"
            ));
            return Ok((usable[m].sigma_db, v[m]));
        }
        if m == 0 || m + 1 == v.len() {
            warnings.push(format!("{name} minimum at edge of the usable sigma grid"));
            return Ok((usable[m].sigma_db, v[m]));
        }
        let lo = usable[m - 1].sigma_db.ln();
        let hi = usable[m + 1].sigma_db.ln();
        let mut failure = None;
        let (x, fx) = golden(lo, hi, tol, |x| {
            let acq = match op.acq(x.exp()) {
                Ok(a) => a,
                Err(e) => {
                    failure.get_or_insert(e);
                    return T::infinity();
                }
            };
            match crb_averaged(&params, &acq, step_db, &cfg.grid, cfg.mode) {
                Ok(r) if !r.flagged => {
                    let row = NoiseRow {
                        sigma_db: acq.noise_std_db,
                        std_a_db: r.std_a_db,
                        std_f_hz: r.std_f_hz,
                        unquantized_std_a_db: T::nan(),
                        unquantized_std_f_hz: T::nan(),
                        failure_fraction: r.failure_fraction,
                        flagged: false,
                        error: None,
                    };
                    key(&row)
                }
                _ => T::infinity(),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if fx <= v[m] {
            Ok((x.exp(), fx))
        } else {
            Ok((usable[m].sigma_db, v[m]))
        }
    };

    let (sigma_opt_omega, min_std_f_hz) = solve(|r| r.std_f_hz, "frequency")?;
    let (sigma_opt_a, min_std_a_db) = solve(|r| r.std_a_db, "amplitude")?;
    Ok(OptimalNoise {
        step_db,
        sigma_opt_omega,
        sigma_opt_a,
        ratio: sigma_opt_a / sigma_opt_omega,
        min_std_f_hz,
        min_std_a_db,
        unimodal,
        warnings,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow<T = f64> {
    pub step_db: T,
    pub min_std_a_db: T,
    pub min_std_f_hz: T,
    pub sigma_opt_omega: T,
    pub sigma_opt_a: T,
    pub unimodal: bool,
}

/// Minimum-over-`σ` bounds along a step-size grid.
pub fn sweep_step_size<T: Real>(
    op: &OperatingPoint<T>,
    steps_db: &[T],
    cfg: &SweepConfig,
) -> Result<Vec<StepRow<T>>> {
    op.validate()?;
    check_increasing(steps_db, "step size")?;
    steps_db
        .iter()
        .map(|&d| {
            let o = optimal_noise(op, d, cfg)?;
            Ok(StepRow {
                step_db: d,
                min_std_a_db: o.min_std_a_db,
                min_std_f_hz: o.min_std_f_hz,
                sigma_opt_omega: o.sigma_opt_omega,
                sigma_opt_a: o.sigma_opt_a,
                unimodal: o.unimodal,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow<T = f64> {
    pub sample_rate_hz: T,
    pub num_samples: usize,
    /// Tone frequency actually used (moved to `fs/4` below Nyquist).
    pub frequency_hz: T,
    pub std_a_db: T,
    pub std_f_hz: T,
    pub failure_fraction: T,
    pub flagged: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweep<T = f64> {
    pub rows: Vec<RateRow<T>>,
    pub sigma_db: T,
    pub step_db: T,
    /// Both bounds strictly decrease along the grid (NaN rows break it).
    pub std_a_decreasing: bool,
    pub std_f_decreasing: bool,
}

fn strictly_decreasing<T: Real>(v: impl Iterator<Item = T>) -> bool {
    let v: Vec<T> = v.collect();
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] < w[0])
}

/// Averaged bounds at fixed `σ` as the sample rate varies over a fixed
/// observation time.
pub fn sweep_sample_rate<T: Real>(
    op: &OperatingPoint<T>,
    rates_hz: &[T],
    sigma_db: T,
    step_db: T,
    cfg: &SweepConfig,
) -> Result<RateSweep<T>> {
    op.validate()?;
    check_increasing(rates_hz, "sample rate")?;
    if !(sigma_db > T::zero()) {
        return Err(Error::Unidentifiable("sigma must be > 0".into()));
    }
    let t_obs = T::lit(cfg.observation_s);
    let mut rows = Vec::with_capacity(rates_hz.len());
    for &fs in rates_hz {
        let (at, scaled) = op.at_sample_rate(fs, t_obs);
        let mut note = scaled.then(|| format!("tone moved to fs/4 = {} Hz", at.frequency_hz));
        let nan_row = |note: Option<String>| RateRow {
            sample_rate_hz: fs,
            num_samples: at.num_samples,
            frequency_hz: at.frequency_hz,
            std_a_db: T::nan(),
            std_f_hz: T::nan(),
            failure_fraction: T::nan(),
            flagged: true,
            note,
        };
        if at.num_samples < 4 {
            let msg = format!(
                "N = {} samples cannot identify 4 parameters",
                at.num_samples
            );
            rows.push(nan_row(Some(
                note.map_or(msg.clone(), |n| format!("{n}; {msg}")),
            )));
            continue;
        }
        let r = noise_row(&at, sigma_db, step_db, cfg)?;
        if let Some(e) = &r.error {
            note = Some(note.map_or(e.clone(), |n| format!("{n}; {e}")));
        }
        rows.push(RateRow {
            sample_rate_hz: fs,
            num_samples: at.num_samples,
            frequency_hz: at.frequency_hz,
            std_a_db: r.std_a_db,
            std_f_hz: r.std_f_hz,
            failure_fraction: r.failure_fraction,
            flagged: r.flagged,
            note,
        });
    }
    Ok(RateSweep {
        std_a_decreasing: strictly_decreasing(rows.iter().map(|r| r.std_a_db)),
        std_f_decreasing: strictly_decreasing(rows.iter().map(|r| r.std_f_hz)),
        rows,
        sigma_db,
        step_db,
    })
}

/// Minimum-over-`σ` bounds on a sample-rate × step-size grid; entries are
/// indexed `[rate][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourTable<T = f64> {
    pub rates_hz: Vec<T>,
    pub steps_db: Vec<T>,
    pub std_a_db: Vec<Vec<T>>,
    pub std_f_hz: Vec<Vec<T>>,
    pub sigma_opt_omega: Vec<Vec<T>>,
}

pub fn sweep_contour<T: Real>(
    rates_hz: &[T],
    steps_db: &[T],
    op: &OperatingPoint<T>,
    cfg: &SweepConfig,
) -> Result<ContourTable<T>> {
    op.validate()?;
    check_increasing(rates_hz, "sample rate")?;
    check_increasing(steps_db, "step size")?;
    let t_obs = T::lit(cfg.observation_s);
    let mut table = ContourTable {
        rates_hz: rates_hz.to_vec(),
        steps_db: steps_db.to_vec(),
        std_a_db: Vec::new(),
        std_f_hz: Vec::new(),
        sigma_opt_omega: Vec::new(),
    };
    for &fs in rates_hz {
        let (at, _) = op.at_sample_rate(fs, t_obs);
        let (mut a, mut f, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for &d in steps_db {
            let o = if at.num_samples < 4 {
                None
            } else {
                match optimal_noise(&at, d, cfg) {
                    Ok(o) => Some(o),
                    Err(Error::AllCellsSingular) => None,
                    Err(e) => return Err(e),
                }
            };
            a.push(o.as_ref().map_or(T::nan(), |o| o.min_std_a_db));
            f.push(o.as_ref().map_or(T::nan(), |o| o.min_std_f_hz));
            s.push(o.as_ref().map_or(T::nan(), |o| o.sigma_opt_omega));
        }
        table.std_a_db.push(a);
        table.std_f_hz.push(f);
        table.sigma_opt_omega.push(s);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> SweepConfig {
        SweepConfig {
            grid: AveragingGrid::new(12, 13).unwrap(),
            search: SigmaSearch {
                points: 30,
                ..SigmaSearch::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden(-3.0f64, 5.0, 1e-8, |x| (x - 1.3).powi(2) + 2.0);
        assert!((x - 1.3).abs() < 1e-6 && (fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_grid_endpoints() {
        let g = default_sigma_grid(2.0f64, &SigmaSearch::default());
        assert_eq!(g.len(), 60);
        assert!((g[0] - 0.02).abs() < 1e-14 && (g[59] - 6.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unimodality_check() {
        assert!(is_unimodal(&[5.0, 3.0, 1.0, 2.0, 4.0], 2));
        assert!(!is_unimodal(&[5.0, 3.0, 4.0, 1.0, 2.0], 3));
        assert!(is_unimodal(&[1.0, 2.0, 3.0], 0));
    }

    #[test]
    fn noise_curve_is_u_shaped() {
        let op = OperatingPoint::<f64>::reference();
        let sigmas = default_sigma_grid(
            1.0,
            &SigmaSearch {
                points: 20,
                lo_ratio: 0.01,
                hi_ratio: 2.0,
                ..SigmaSearch::default()
            },
        );
        let rows = sweep_noise(&op, &sigmas, 1.0, &coarse()).unwrap();
        let f: Vec<f64> = rows
            .iter()
            .map(|r| {
                if r.std_f_hz.is_finite() {
                    r.std_f_hz
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < f[0] && min < f[f.len() - 1]);
        let unq: Vec<f64> = rows.iter().map(|r| r.unquantized_std_a_db).collect();
        assert!(unq.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn sweep_input_validation() {
        let op = OperatingPoint::<f64>::reference();
        let cfg = coarse();
        assert!(sweep_noise(&op, &[0.2, 0.1], 1.0, &cfg).is_err());
        assert!(sweep_noise(&op, &[0.0, 0.1], 1.0, &cfg).is_err());
        assert!(sweep_step_size(&op, &[], &cfg).is_err());
        let bad = OperatingPoint {
            frequency_hz: 250.0,
            ..op
        };
        assert!(matches!(
            sweep_noise(&bad, &[0.1], 1.0, &cfg),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn optimum_near_quarter_step() {
        let o = optimal_noise(&OperatingPoint::<f64>::reference(), 1.0, &coarse()).unwrap();
        assert!((o.sigma_opt_omega - 0.25).abs() < 0.05, "{o:?}");
        assert!(o.unimodal, "{:?}", o.warnings);
        assert!(o.sigma_opt_omega < 1.0 / 12f64.sqrt());
    }

    #[test]
    fn rate_sweep_reports_underdetermined_rows() {
        let op = OperatingPoint::<f64>::reference();
        let s = sweep_sample_rate(&op, &[1.0, 16.0, 64.0, 400.0], 0.25, 1.0, &coarse()).unwrap();
        assert!(s.rows[0].std_f_hz.is_nan() && s.rows[0].note.is_some());
        assert_eq!(s.rows[1].num_samples, 16);
        assert_eq!(s.rows[1].frequency_hz, 4.0);
        assert!(!s.std_f_decreasing);
        let tail = sweep_sample_rate(&op, &[16.0, 64.0, 400.0], 0.25, 1.0, &coarse()).unwrap();
        assert!(
            tail.std_a_decreasing && tail.std_f_decreasing,
            "{:?}",
            tail.rows
        );
    }
}
