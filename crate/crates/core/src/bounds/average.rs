use std::str::FromStr;

use rayon::prelude::*;

use super::fim::{accumulate, basis, require_noise};
use super::linalg::{zeros, Mat4};
use super::{CrbResult, FisherMatrix, FLAG_FAILURE_FRACTION};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{AcquisitionSpec, SineParams};

/// What is averaged over the `(φ, B)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AvgMode {
    /// Invert per cell and average the bounds.
    #[default]
    Crb,
    /// Average the information matrices, then invert once.
    Fim,
}

impl AvgMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AvgMode::Crb => "crb",
            AvgMode::Fim => "fim",
        }
    }
}

impl FromStr for AvgMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crb" => Ok(AvgMode::Crb),
            "fim" => Ok(AvgMode::Fim),
            other => Err(Error::domain(format!(
                "unknown averaging mode '{other}' (crb|fim)"
            ))),
        }
    }
}

/// Phases `origin + 2πj/P`, `j < P`, crossed with offsets spread uniformly
/// over `[−Δ/2, Δ/2]` inclusive (a single offset sits at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingGrid {
    pub phases: usize,
    pub offsets: usize,
    pub phase_origin_rad: f64,
}

impl Default for AveragingGrid {
    fn default() -> Self {
        Self {
            phases: 32,
            offsets: 33,
            phase_origin_rad: 0.0,
        }
    }
}

impl AveragingGrid {
    pub fn new(phases: usize, offsets: usize) -> Result<Self> {
        let g = Self {
            phases,
            offsets,
            ..Self::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_origin(mut self, phase_origin_rad: f64) -> Self {
        self.phase_origin_rad = phase_origin_rad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 || self.offsets == 0 {
            return Err(Error::domain(
                "averaging grid needs at least one phase and one offset",
            ));
        }
        if !self.phase_origin_rad.is_finite() {
            return Err(Error::domain("phase origin must be finite"));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.phases * self.offsets
    }

    pub fn phase<T: Real>(&self, j: usize) -> T {
        T::lit(self.phase_origin_rad)
            + T::TAU() * T::from_usize_exact(j) / T::from_usize_exact(self.phases)
    }

    pub fn offset<T: Real>(&self, i: usize, step_db: T) -> T {
        if self.offsets == 1 {
            return T::zero();
        }
        let half = step_db / T::lit(2.0);
        -half + step_db * T::from_usize_exact(i) / T::from_usize_exact(self.offsets - 1)
    }
}

/// Bounds averaged over phase and DC offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCrb<T = f64> {
    pub crb_a: T,
    pub crb_b: T,
    pub crb_omega: T,
    pub crb_phi: T,
    /// `√crb_a`, dB.
    pub std_a_db: T,
    /// `√crb_omega/(2π)`, Hz.
    pub std_f_hz: T,
    pub grid: AveragingGrid,
    pub mode: AvgMode,
    pub step_db: T,
    /// Cells whose FIM failed the condition guard. Always zero in
    /// [`AvgMode::Fim`], where only the averaged matrix is inverted.
    pub failed_cells: usize,
    pub failure_fraction: T,
    /// Failure fraction above [`FLAG_FAILURE_FRACTION`].
    pub flagged: bool,
}

enum PhaseSum<T> {
    Crb {
        sum: [T; 4],
        ok: usize,
        failed: usize,
    },
    Fim(Mat4<T>),
}

/// Averages the bounds over the grid. The phase and offset of `params` are
/// ignored. Cells are computed in parallel and summed in grid order.
pub fn crb_averaged<T: Real>(
    params: &SineParams<T>,
    acq: &AcquisitionSpec<T>,
    step_db: T,
    grid: &AveragingGrid,
    mode: AvgMode,
) -> Result<AveragedCrb<T>> {
    grid.validate()?;
    if !(step_db > T::zero() && step_db.is_finite()) {
        return Err(Error::domain("step size must be finite and > 0"));
    }
    let sigma = require_noise(acq)?;
    if acq.num_samples < 4 {
        return Err(Error::domain("Fisher information needs at least 4 samples"));
    }
    acq.check_nyquist(params.frequency_hz)?;
    let a = params.amplitude_db;
    let omega = params.omega();
    let ts = acq.sample_period_s();

    let per_phase: Vec<Result<PhaseSum<T>>> = (0..grid.phases)
        .into_par_iter()
        .map(|j| {
            let regs = basis(omega, grid.phase::<T>(j), ts, acq.num_samples);
            match mode {
                AvgMode::Crb => {
                    let mut sum = [T::zero(); 4];
                    let (mut ok, mut failed) = (0, 0);
                    for i in 0..grid.offsets {
                        let b = grid.offset(i, step_db);
                        let m = FisherMatrix {
                            entries: accumulate(a, b, sigma, &regs)?,
                            params: *params,
                            acq: *acq,
                        };
                        match m.crb() {
                            Ok(r) => {
                                for (s, v) in
                                    sum.iter_mut()
                                        .zip([r.crb_a, r.crb_b, r.crb_omega, r.crb_phi])
                                {
                                    *s += v;
                                }
                                ok += 1;
                            }
                            Err(Error::SingularFim { .. }) => failed += 1,
                            Err(e) => return Err(e),
                        }
                    }
                    Ok(PhaseSum::Crb { sum, ok, failed })
                }
                AvgMode::Fim => {
                    let mut total = zeros::<T>();
                    for i in 0..grid.offsets {
                        let m = accumulate(a, grid.offset(i, step_db), sigma, &regs)?;
                        for r in 0..4 {
                            for c in 0..4 {
                                total[r][c] += m[r][c];
                            }
                        }
                    }
                    Ok(PhaseSum::Fim(total))
                }
            }
        })
        .collect();

    let cells = T::from_usize_exact(grid.cells());
    let (diag, failed) = match mode {
        AvgMode::Crb => {
            let mut sum = [T::zero(); 4];
            let (mut ok, mut failed) = (0usize, 0usize);
            for r in per_phase {
                if let PhaseSum::Crb {
                    sum: s,
                    ok: o,
                    failed: f,
                } = r?
                {
                    for (acc, v) in sum.iter_mut().zip(s) {
                        *acc += v;
                    }
                    ok += o;
                    failed += f;
                }
            }
            if ok == 0 {
                return Err(Error::AllCellsSingular);
            }
            let n = T::from_usize_exact(ok);
            (sum.map(|v| v / n), failed)
        }
        AvgMode::Fim => {
            let mut total = zeros::<T>();
            for r in per_phase {
                if let PhaseSum::Fim(m) = r? {
                    for i in 0..4 {
                        for j in 0..4 {
                            total[i][j] += m[i][j] / cells;
                        }
                    }
                }
            }
            let m = FisherMatrix {
                entries: total,
                params: *params,
                acq: *acq,
            };
            let r = m.crb()?;
            ([r.crb_a, r.crb_b, r.crb_omega, r.crb_phi], 0)
        }
    };
    let r = CrbResult::from_diagonal(diag, T::nan());
    let failure_fraction = T::from_usize_exact(failed) / cells;
    Ok(AveragedCrb {
        crb_a: r.crb_a,
        crb_b: r.crb_b,
        crb_omega: r.crb_omega,
        crb_phi: r.crb_phi,
        std_a_db: r.std_a_db,
        std_f_hz: r.std_f_hz,
        grid: *grid,
        mode,
        step_db,
        failed_cells: failed,
        failure_fraction,
        flagged: failure_fraction > T::lit(FLAG_FAILURE_FRACTION),
    })
}
