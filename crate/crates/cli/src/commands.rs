use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use rss_sentry::bounds::{
    crb_averaged, crb_point, default_sigma_grid, sweep_contour, sweep_noise, sweep_sample_rate,
    sweep_step_size, unquantized_crb, AveragingGrid, AvgMode, OperatingPoint, SigmaSearch,
    SweepConfig,
};
use rss_sentry::estimators::{
    lsq_fit, mle_fit, monte_carlo_rmse, periodogram, periodogram_estimate, Band, Method,
};
use rss_sentry::signal::{
    export_csv_rss, ingest_trace, quantize_one_bit, quantize_uniform, synthesize, AcquisitionSpec,
    QuantizerMode, QuantizerSpec, RssTrace, SineParams, TraceFormat, TraceKind,
};
use rss_sentry::vibration::{delta_p_db, expected_delta_p_db, VibrationScene};

use crate::config::{self, QuantizerChoice};
use crate::manifest::RunManifest;
use crate::table::{num, Table};
use crate::{write_atomic, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "rss-sentry",
    version,
    about = "Bounds, simulation and estimation for tones seen through one-bit RSS readings"
)]
pub struct Cli {
    /// Worker threads for sweeps and Monte Carlo runs [env: RSS_SENTRY_THREADS].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Power variation caused by a vibrating reflector.
    #[command(allow_negative_numbers = true)]
    Deltap(DeltapArgs),
    /// Synthesize a noisy tone trace, optionally quantized.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Quantize a continuous trace file.
    #[command(allow_negative_numbers = true)]
    Quantize(QuantizeArgs),
    /// Fit a tone to a trace file.
    #[command(allow_negative_numbers = true)]
    Estimate(EstimateArgs),
    /// Monte Carlo RMSE of an estimator along a noise grid.
    #[command(allow_negative_numbers = true)]
    Mc(McArgs),
    /// Cramér–Rao bound at one operating point.
    #[command(allow_negative_numbers = true)]
    Crb(CrbArgs),
    /// Averaged bounds along a noise grid.
    SweepNoise(SweepNoiseArgs),
    /// Optimal noise and minimum bounds per quantizer step.
    SweepStep(SweepStepArgs),
    /// Averaged bounds as the sample rate varies over a fixed observation time.
    SweepRate(SweepRateArgs),
    /// Minimum-over-noise bounds on a sample rate × step grid.
    Contour(ContourArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

/// Resolved flag values, in command-line order.
#[derive(Default)]
struct Rec(Vec<(String, String)>);

impl Rec {
    fn put(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }

    fn list(&mut self, k: &str, v: &[f64]) {
        self.put(
            k,
            v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
    }

    fn opt(&mut self, k: &str, v: Option<impl ToString>) {
        if let Some(v) = v {
            self.put(k, v);
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output CSV; a `.manifest` sidecar is written next to it. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OpArgs {
    /// Tone amplitude A, dB.
    #[arg(long, default_value_t = 0.025)]
    a_db: f64,
    /// Tone frequency, Hz.
    #[arg(long, default_value_t = 100.0)]
    f_hz: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 400.0)]
    fs_hz: f64,
    /// Samples per trace.
    #[arg(long, default_value_t = 400)]
    n: usize,
}

impl OpArgs {
    fn record(&self, r: &mut Rec) {
        r.put("a-db", self.a_db);
        r.put("f-hz", self.f_hz);
        r.put("fs-hz", self.fs_hz);
        r.put("n", self.n);
    }

    fn op(&self) -> CliResult<OperatingPoint> {
        Ok(OperatingPoint::new(
            self.a_db, self.f_hz, self.fs_hz, self.n,
        )?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Phase samples in the averaging grid.
    #[arg(long, default_value_t = 32)]
    grid_phases: usize,
    /// Offset samples in the averaging grid, spanning [-step/2, step/2].
    #[arg(long, default_value_t = 33)]
    grid_offsets: usize,
    /// Average the CRB over the grid (crb) or invert the averaged FIM (fim).
    #[arg(long, default_value = "crb")]
    avg_mode: AvgMode,
}

impl GridArgs {
    fn record(&self, r: &mut Rec) {
        r.put("grid-phases", self.grid_phases);
        r.put("grid-offsets", self.grid_offsets);
        r.put("avg-mode", self.avg_mode.as_str());
    }

    fn grid(&self) -> CliResult<AveragingGrid> {
        Ok(AveragingGrid::new(self.grid_phases, self.grid_offsets)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Points in the log-spaced noise grid.
    #[arg(long, default_value_t = 60)]
    sigma_points: usize,
    /// Lowest noise std as a fraction of the step.
    #[arg(long, default_value_t = 0.01)]
    sigma_lo_ratio: f64,
    /// Highest noise std as a fraction of the step.
    #[arg(long, default_value_t = 3.0)]
    sigma_hi_ratio: f64,
    /// Golden-section tolerance on ln σ.
    #[arg(long, default_value_t = 1e-3)]
    log_tol: f64,
}

impl SearchArgs {
    fn record(&self, r: &mut Rec) {
        r.put("sigma-points", self.sigma_points);
        r.put("sigma-lo-ratio", self.sigma_lo_ratio);
        r.put("sigma-hi-ratio", self.sigma_hi_ratio);
        r.put("log-tol", self.log_tol);
    }

    fn search(&self) -> CliResult<SigmaSearch> {
        let s = SigmaSearch {
            points: self.sigma_points,
            lo_ratio: self.sigma_lo_ratio,
            hi_ratio: self.sigma_hi_ratio,
            log_tol: self.log_tol,
        };
        if s.points < 3 || !(s.lo_ratio > 0.0 && s.lo_ratio < s.hi_ratio && s.hi_ratio.is_finite())
        {
            return Err(rss_sentry::Error::domain(
                "noise grid needs >= 3 points and 0 < lo ratio < hi ratio",
            )
            .into());
        }
        if s.log_tol.is_nan() || s.log_tol <= 0.0 {
            return Err(rss_sentry::Error::domain("log-tol must be > 0").into());
        }
        Ok(s)
    }
}

fn sweep_config(
    grid: &GridArgs,
    search: Option<&SearchArgs>,
    observation_s: f64,
) -> CliResult<SweepConfig> {
    Ok(SweepConfig {
        grid: grid.grid()?,
        mode: grid.avg_mode,
        search: search
            .map(SearchArgs::search)
            .transpose()?
            .unwrap_or_default(),
        observation_s,
    })
}

#[derive(Args, Debug)]
pub struct DeltapArgs {
    /// Relative amplitude β of the vibrating path; comma-separated list.
    #[arg(long, value_delimiter = ',', required = true)]
    beta: Vec<f64>,
    /// Peak-to-peak surface displacement, m.
    #[arg(long, default_value_t = 1e-4)]
    dz_m: f64,
    /// RF carrier frequency, Hz.
    #[arg(long, default_value_t = 915e6)]
    carrier_hz: f64,
    /// Emit the expected magnitude per β instead of ΔP over θ.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    expected: bool,
    /// θ samples over [0, 2π].
    #[arg(long, default_value_t = 361)]
    theta_points: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Tone amplitude A, dB.
    #[arg(long, default_value_t = 0.025)]
    a_db: f64,
    /// Offset B, dB.
    #[arg(long, default_value_t = 0.0)]
    b_db: f64,
    /// Tone frequency, Hz.
    #[arg(long, default_value_t = 100.0)]
    f_hz: f64,
    /// Phase, rad.
    #[arg(long, default_value_t = 0.0)]
    phase_rad: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 400.0)]
    fs_hz: f64,
    /// Samples.
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Noise std σ, dB.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none, one-bit or uniform.
    #[arg(long, default_value = "none")]
    quantizer: QuantizerChoice,
    /// One-bit threshold ζ, dB.
    #[arg(long, default_value_t = 0.0)]
    threshold_db: f64,
    /// Uniform quantizer step Δ, dB.
    #[arg(long, default_value_t = 1.0)]
    step_db: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct QuantizeArgs {
    /// Continuous trace file.
    #[arg(long)]
    input: PathBuf,
    /// csv-rss or csv-kv.
    #[arg(long, default_value = "csv-rss")]
    format: TraceFormat,
    /// one-bit or uniform.
    #[arg(long, default_value = "one-bit")]
    mode: QuantizerMode,
    /// One-bit threshold ζ, dB.
    #[arg(long, default_value_t = 0.0)]
    threshold_db: f64,
    /// Uniform step Δ, dB.
    #[arg(long, default_value_t = 1.0)]
    step_db: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Trace file.
    #[arg(long)]
    input: PathBuf,
    /// csv-rss or csv-kv.
    #[arg(long, default_value = "csv-rss")]
    format: TraceFormat,
    /// continuous, one-bit or uniform-quantized; detected when absent.
    #[arg(long)]
    kind: Option<TraceKind>,
    /// mle, periodogram or lsq.
    #[arg(long, default_value = "mle")]
    method: Method,
    /// Noise std σ, dB. Required by mle; rescales one-bit periodogram amplitudes.
    #[arg(long)]
    sigma: Option<f64>,
    /// Lower edge of the frequency search band, Hz.
    #[arg(long, requires = "band_hi_hz")]
    band_lo_hz: Option<f64>,
    /// Upper edge of the frequency search band, Hz.
    #[arg(long, requires = "band_lo_hz")]
    band_hi_hz: Option<f64>,
    /// Also write the 8× zero-padded periodogram to this CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct McArgs {
    /// key=value config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    f_hz: Option<String>,
    #[arg(long)]
    fs_hz: Option<String>,
    #[arg(long)]
    a_db: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    step_db: Option<String>,
    /// Comma-separated noise std values, dB.
    #[arg(long)]
    sigma_grid: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    quantizer: Option<String>,
    #[arg(long)]
    threshold_db: Option<String>,
    #[arg(long)]
    band_lo_hz: Option<String>,
    #[arg(long)]
    band_hi_hz: Option<String>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct CrbArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Noise std σ, dB.
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Quantizer step Δ, dB; offsets are averaged over [-Δ/2, Δ/2].
    #[arg(long, default_value_t = 1.0)]
    step_db: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Bound at one offset and phase instead of the grid average.
    #[arg(long, action = ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    point: bool,
    /// Offset from the threshold for --point, dB.
    #[arg(long, default_value_t = 0.0)]
    b_db: f64,
    /// Phase for --point, rad.
    #[arg(long, default_value_t = 0.0)]
    phase_rad: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SweepNoiseArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Quantizer step Δ, dB.
    #[arg(long, default_value_t = 1.0)]
    step_db: f64,
    /// Comma-separated noise std values, dB; log-spaced from the search flags when absent.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SweepStepArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Comma-separated step sizes, dB.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    steps_db: Vec<f64>,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct SweepRateArgs {
    /// Tone amplitude A, dB.
    #[arg(long, default_value_t = 0.025)]
    a_db: f64,
    /// Tone frequency, Hz; moved to fs/4 at rates where it would alias.
    #[arg(long, default_value_t = 100.0)]
    f_hz: f64,
    /// Comma-separated sample rates, Hz.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256,400")]
    rates_hz: Vec<f64>,
    /// Noise std σ, dB.
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    /// Comma-separated step sizes, dB.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    steps_db: Vec<f64>,
    /// Observation time, s; N = round(fs · T).
    #[arg(long, default_value_t = 1.0)]
    observation_s: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct ContourArgs {
    /// Tone amplitude A, dB.
    #[arg(long, default_value_t = 0.025)]
    a_db: f64,
    /// Tone frequency, Hz; moved to fs/4 at rates where it would alias.
    #[arg(long, default_value_t = 100.0)]
    f_hz: f64,
    /// Comma-separated sample rates, Hz.
    #[arg(long, value_delimiter = ',', default_value = "16,64,128,256,400")]
    rates_hz: Vec<f64>,
    /// Comma-separated step sizes, dB.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    steps_db: Vec<f64>,
    /// Observation time, s; N = round(fs · T).
    #[arg(long, default_value_t = 1.0)]
    observation_s: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
pub struct RerunArgs {
    /// Manifest written next to an earlier output.
    manifest: PathBuf,
    /// Write here instead of the recorded output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a subcommand produced, before anything touches the filesystem.
struct Outcome {
    csv: String,
    seed: Option<u64>,
    inputs: Vec<String>,
    /// Extra files written alongside the main output.
    side: Vec<(PathBuf, String)>,
}

impl Outcome {
    fn csv(csv: String) -> Self {
        Self {
            csv,
            seed: None,
            inputs: Vec::new(),
            side: Vec::new(),
        }
    }
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| CliError::io(p, e))
}

fn input_path(p: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| CliError::io(p, e))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Deltap(_) => "deltap",
            Command::Simulate(_) => "simulate",
            Command::Quantize(_) => "quantize",
            Command::Estimate(_) => "estimate",
            Command::Mc(_) => "mc",
            Command::Crb(_) => "crb",
            Command::SweepNoise(_) => "sweep-noise",
            Command::SweepStep(_) => "sweep-step",
            Command::SweepRate(_) => "sweep-rate",
            Command::Contour(_) => "contour",
            Command::Rerun(_) => "rerun",
        }
    }

    pub(crate) fn execute(self, threads: Option<usize>) -> CliResult<()> {
        let start = Instant::now();
        let mut rec = Rec::default();
        let (outcome, out) = match &self {
            Command::Rerun(a) => return rerun(a, threads),
            Command::Deltap(a) => (deltap(a, &mut rec)?, &a.out),
            Command::Simulate(a) => (simulate(a, &mut rec)?, &a.out),
            Command::Quantize(a) => (quantize(a, &mut rec)?, &a.out),
            Command::Estimate(a) => (estimate(a, &mut rec)?, &a.out),
            Command::Mc(a) => (mc(a, &mut rec)?, &a.out),
            Command::Crb(a) => (crb(a, &mut rec)?, &a.out),
            Command::SweepNoise(a) => (sweep_noise_cmd(a, &mut rec)?, &a.out),
            Command::SweepStep(a) => (sweep_step_cmd(a, &mut rec)?, &a.out),
            Command::SweepRate(a) => (sweep_rate_cmd(a, &mut rec)?, &a.out),
            Command::Contour(a) => (contour_cmd(a, &mut rec)?, &a.out),
        };
        for (path, text) in &outcome.side {
            write_atomic(path, text.as_bytes())?;
        }
        let Some(path) = &out.out else {
            print!("{}", outcome.csv);
            return Ok(());
        };
        let path = absolute(path)?;
        write_atomic(&path, outcome.csv.as_bytes())?;
        let manifest = RunManifest {
            subcommand: self.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: rec.0,
            inputs: outcome.inputs,
            output: path.display().to_string(),
            seed: outcome.seed,
            threads,
            duration_s: start.elapsed().as_secs_f64(),
        };
        write_atomic(&RunManifest::sidecar(&path), manifest.render().as_bytes())
    }
}

fn rerun(a: &RerunArgs, threads: Option<usize>) -> CliResult<()> {
    let m = RunManifest::load(&a.manifest)?;
    let argv = m.argv(a.out.as_deref());
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Manifest(e.to_string()))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::Manifest(
            "a manifest cannot record a rerun".into(),
        ));
    }
    cli.command.execute(threads)
}

fn deltap(a: &DeltapArgs, rec: &mut Rec) -> CliResult<Outcome> {
    rec.list("beta", &a.beta);
    rec.put("dz-m", a.dz_m);
    rec.put("carrier-hz", a.carrier_hz);
    rec.put("expected", a.expected);
    rec.put("theta-points", a.theta_points);
    let scene =
        |beta: f64, theta: f64| VibrationScene::at_carrier(beta, theta, a.dz_m, a.carrier_hz);
    if a.expected {
        let mut t = Table::new(&["beta", "expected_delta_p_db"])?;
        for &b in &a.beta {
            t.row([num(b), num(expected_delta_p_db(&scene(b, 0.0)?)?)])?;
        }
        return Ok(Outcome::csv(t.finish()?));
    }
    if a.theta_points < 2 {
        return Err(rss_sentry::Error::domain("theta-points must be >= 2").into());
    }
    let mut t = Table::new(&["beta", "theta_rad", "delta_p_db"])?;
    for &b in &a.beta {
        for j in 0..a.theta_points {
            let theta = std::f64::consts::TAU * j as f64 / (a.theta_points - 1) as f64;
            t.row([num(b), num(theta), num(delta_p_db(&scene(b, theta)?)?)])?;
        }
    }
    Ok(Outcome::csv(t.finish()?))
}

fn trace_csv(trace: &RssTrace) -> CliResult<String> {
    let mut buf = Vec::new();
    export_csv_rss(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("trace CSV is ASCII"))
}

fn apply_quantizer(x: &RssTrace, q: Option<QuantizerSpec>) -> CliResult<RssTrace> {
    Ok(match q {
        None => x.clone(),
        Some(q) if q.mode == QuantizerMode::OneBit => quantize_one_bit(x, &q)?,
        Some(q) => quantize_uniform(x, &q)?,
    })
}

fn simulate(a: &SimulateArgs, rec: &mut Rec) -> CliResult<Outcome> {
    rec.put("a-db", a.a_db);
    rec.put("b-db", a.b_db);
    rec.put("f-hz", a.f_hz);
    rec.put("phase-rad", a.phase_rad);
    rec.put("fs-hz", a.fs_hz);
    rec.put("n", a.n);
    rec.put("sigma", a.sigma);
    rec.put("seed", a.seed);
    rec.put("quantizer", a.quantizer.as_str());
    rec.put("threshold-db", a.threshold_db);
    rec.put("step-db", a.step_db);
    let p = SineParams::new(a.a_db, a.b_db, a.f_hz, a.phase_rad)?;
    let acq = AcquisitionSpec::new(a.fs_hz, a.n, a.sigma, a.seed)?;
    let q = a.quantizer.spec(a.threshold_db, a.step_db)?;
    let trace = apply_quantizer(&synthesize(&p, &acq)?, q)?;
    Ok(Outcome {
        seed: Some(a.seed),
        ..Outcome::csv(trace_csv(&trace)?)
    })
}

fn quantize(a: &QuantizeArgs, rec: &mut Rec) -> CliResult<Outcome> {
    let input = input_path(&a.input)?;
    rec.put("input", input.display());
    rec.put("format", a.format.as_str());
    rec.put("mode", a.mode.as_str());
    rec.put("threshold-db", a.threshold_db);
    rec.put("step-db", a.step_db);
    let x = ingest_trace(&input, a.format, Some(TraceKind::Continuous))?;
    let q = match a.mode {
        QuantizerMode::OneBit => QuantizerSpec::one_bit(a.threshold_db),
        QuantizerMode::Uniform => QuantizerSpec {
            threshold_db: a.threshold_db,
            ..QuantizerSpec::uniform(a.step_db)?
        },
    };
    q.validate()?;
    Ok(Outcome {
        inputs: vec![input.display().to_string()],
        ..Outcome::csv(trace_csv(&apply_quantizer(&x, Some(q))?)?)
    })
}

fn estimate(a: &EstimateArgs, rec: &mut Rec) -> CliResult<Outcome> {
    let input = input_path(&a.input)?;
    rec.put("input", input.display());
    rec.put("format", a.format.as_str());
    rec.opt("kind", a.kind.map(|k| k.as_str()));
    rec.put("method", a.method.as_str());
    rec.opt("sigma", a.sigma);
    rec.opt("band-lo-hz", a.band_lo_hz);
    rec.opt("band-hi-hz", a.band_hi_hz);
    let spectrum_path = a.spectrum.as_deref().map(absolute).transpose()?;
    rec.opt("spectrum", spectrum_path.as_ref().map(|p| p.display()));

    let trace = ingest_trace(&input, a.format, a.kind)?;
    let band = a
        .band_lo_hz
        .zip(a.band_hi_hz)
        .map(|(lo, hi)| Band::new(lo, hi));
    let r = match a.method {
        Method::Mle => {
            let sigma = a
                .sigma
                .ok_or_else(|| CliError::Usage("--method mle needs --sigma".into()))?;
            let acq = AcquisitionSpec::new(trace.sample_rate_hz, trace.len(), sigma, 0)?;
            mle_fit(&trace, band, &acq)?
        }
        Method::Periodogram => periodogram_estimate(&trace, band, a.sigma)?,
        Method::LeastSquares => lsq_fit(&trace, band)?,
    };
    let mut t = Table::new(&[
        "method",
        "amplitude_db",
        "dc_offset_db",
        "frequency_hz",
        "phase_rad",
        "threshold_db",
        "log_likelihood",
        "converged",
        "iterations",
        "num_samples",
        "sample_rate_hz",
    ])?;
    let e = &r.estimate;
    t.row([
        r.method.as_str().to_string(),
        num(e.amplitude_db),
        num(e.dc_offset_db),
        num(e.frequency_hz),
        num(e.phase_rad),
        num(r.threshold_db),
        num(r.log_likelihood),
        r.converged.to_string(),
        r.iterations.to_string(),
        trace.len().to_string(),
        num(trace.sample_rate_hz),
    ])?;
    let mut side = Vec::new();
    if let Some(path) = spectrum_path {
        let s = periodogram(&trace, 8)?;
        let mut st = Table::new(&["frequency_hz", "magnitude", "phase_rad"])?;
        for j in 0..s.freqs_hz.len() {
            st.row([num(s.freqs_hz[j]), num(s.magnitude[j]), num(s.phase_rad[j])])?;
        }
        side.push((path, st.finish()?));
    }
    Ok(Outcome {
        csv: t.finish()?,
        seed: None,
        inputs: vec![input.display().to_string()],
        side,
    })
}

fn mc(a: &McArgs, rec: &mut Rec) -> CliResult<Outcome> {
    let mut inputs = Vec::new();
    let mut map: BTreeMap<&'static str, String> = match &a.config {
        Some(p) => {
            let p = input_path(p)?;
            let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            inputs.push(p.display().to_string());
            config::parse_pairs(&text)?
        }
        None => BTreeMap::new(),
    };
    let flags = [
        ("f_hz", &a.f_hz),
        ("fs_hz", &a.fs_hz),
        ("a_db", &a.a_db),
        ("n", &a.n),
        ("step_db", &a.step_db),
        ("sigma_grid", &a.sigma_grid),
        ("trials", &a.trials),
        ("seed", &a.seed),
        ("method", &a.method),
        ("quantizer", &a.quantizer),
        ("threshold_db", &a.threshold_db),
        ("band_lo_hz", &a.band_lo_hz),
        ("band_hi_hz", &a.band_hi_hz),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k, v.trim().to_string());
        }
    }
    let s = config::resolve(&map)?;
    for (k, v) in s.to_pairs() {
        rec.put(&k.replace('_', "-"), v);
    }
    let cfg = s.mc_config()?;
    let rows = monte_carlo_rmse(&cfg, s.method)?;
    let mut t = Table::new(&[
        "sigma_db",
        "trials",
        "dropouts",
        "dropout_fraction",
        "rmse_f_hz",
        "rmse_a_db",
        "bias_f_hz",
        "bias_a_db",
        "std_f_hz",
        "bound_std_f_hz",
        "bound_std_a_db",
    ])?;
    let params = SineParams::new(s.a_db, 0.0, s.f_hz, 0.0)?;
    for r in &rows {
        let acq = AcquisitionSpec::new(s.fs_hz, s.n, r.sigma_db, 0)?;
        let (bf, ba) = match s.quantizer {
            QuantizerChoice::OneBit => crb_averaged(
                &params,
                &acq,
                s.step_db,
                &AveragingGrid::default(),
                AvgMode::Crb,
            )
            .map(|b| (b.std_f_hz, b.std_a_db))
            .unwrap_or((f64::NAN, f64::NAN)),
            QuantizerChoice::None => unquantized_crb(&params, &acq)
                .map(|b| (b.std_f_hz, b.std_a_db))
                .unwrap_or((f64::NAN, f64::NAN)),
            QuantizerChoice::Uniform => (f64::NAN, f64::NAN),
        };
        t.row([
            num(r.sigma_db),
            r.trials.to_string(),
            r.dropouts.to_string(),
            num(r.dropout_fraction),
            num(r.rmse_f_hz),
            num(r.rmse_a_db),
            num(r.bias_f_hz),
            num(r.bias_a_db),
            num(r.std_f_hz),
            num(bf),
            num(ba),
        ])?;
        if r.dropouts > 0 {
            eprintln!(
                "warning: sigma {} dB: {} of {} trials dropped",
                r.sigma_db, r.dropouts, r.trials
            );
        }
    }
    Ok(Outcome {
        csv: t.finish()?,
        seed: Some(s.seed),
        inputs,
        side: Vec::new(),
    })
}

const CRB_HEADER: &[&str] = &[
    "sigma_db",
    "step_db",
    "std_a_db",
    "std_f_hz",
    "crb_a_db2",
    "crb_b_db2",
    "crb_omega_rad2_per_s2",
    "crb_phi_rad2",
    "failed_cells",
    "failure_fraction",
    "flagged",
    "avg_mode",
];

fn crb(a: &CrbArgs, rec: &mut Rec) -> CliResult<Outcome> {
    a.op.record(rec);
    rec.put("sigma", a.sigma);
    rec.put("step-db", a.step_db);
    a.grid.record(rec);
    rec.put("point", a.point);
    rec.put("b-db", a.b_db);
    rec.put("phase-rad", a.phase_rad);
    let op = a.op.op()?;
    let acq = op.acq(a.sigma)?;
    let mut t = Table::new(CRB_HEADER)?;
    if a.point {
        let p = SineParams::new(a.op.a_db, a.b_db, a.op.f_hz, a.phase_rad)?;
        let c = crb_point(&p, &acq)?;
        t.row([
            num(a.sigma),
            num(a.step_db),
            num(c.std_a_db),
            num(c.std_f_hz),
            num(c.crb_a),
            num(c.crb_b),
            num(c.crb_omega),
            num(c.crb_phi),
            "0".into(),
            num(0.0),
            "false".into(),
            "point".into(),
        ])?;
    } else {
        if !(a.step_db > 0.0 && a.step_db.is_finite()) {
            return Err(rss_sentry::Error::domain("step_db must be > 0").into());
        }
        let c = crb_averaged(
            &op.params()?,
            &acq,
            a.step_db,
            &a.grid.grid()?,
            a.grid.avg_mode,
        )?;
        if c.flagged {
            eprintln!(
                "warning: {} of {} averaging cells were singular",
                c.failed_cells,
                c.grid.cells()
            );
        }
        t.row([
            num(a.sigma),
            num(a.step_db),
            num(c.std_a_db),
            num(c.std_f_hz),
            num(c.crb_a),
            num(c.crb_b),
            num(c.crb_omega),
            num(c.crb_phi),
            c.failed_cells.to_string(),
            num(c.failure_fraction),
            c.flagged.to_string(),
            c.mode.as_str().into(),
        ])?;
    }
    Ok(Outcome::csv(t.finish()?))
}

fn sweep_noise_cmd(a: &SweepNoiseArgs, rec: &mut Rec) -> CliResult<Outcome> {
    let search = a.search.search()?;
    let sigmas = match &a.sigma {
        Some(s) => s.clone(),
        None => default_sigma_grid(a.step_db, &search),
    };
    a.op.record(rec);
    rec.put("step-db", a.step_db);
    rec.list("sigma", &sigmas);
    a.search.record(rec);
    a.grid.record(rec);
    let cfg = sweep_config(&a.grid, Some(&a.search), 1.0)?;
    let rows = sweep_noise(&a.op.op()?, &sigmas, a.step_db, &cfg)?;
    let mut t = Table::new(&[
        "sigma_db",
        "std_a_db",
        "std_f_hz",
        "unquantized_std_a_db",
        "unquantized_std_f_hz",
        "failure_fraction",
        "flagged",
        "error",
    ])?;
    for r in &rows {
        t.row([
            num(r.sigma_db),
            num(r.std_a_db),
            num(r.std_f_hz),
            num(r.unquantized_std_a_db),
            num(r.unquantized_std_f_hz),
            num(r.failure_fraction),
            r.flagged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(Outcome::csv(t.finish()?))
}

fn sweep_step_cmd(a: &SweepStepArgs, rec: &mut Rec) -> CliResult<Outcome> {
    a.op.record(rec);
    rec.list("steps-db", &a.steps_db);
    a.search.record(rec);
    a.grid.record(rec);
    let cfg = sweep_config(&a.grid, Some(&a.search), 1.0)?;
    let rows = sweep_step_size(&a.op.op()?, &a.steps_db, &cfg)?;
    let mut t = Table::new(&[
        "step_db",
        "min_std_a_db",
        "min_std_f_hz",
        "sigma_opt_omega_db",
        "sigma_opt_a_db",
        "sigma_opt_over_step",
        "unimodal",
    ])?;
    for r in &rows {
        t.row([
            num(r.step_db),
            num(r.min_std_a_db),
            num(r.min_std_f_hz),
            num(r.sigma_opt_omega),
            num(r.sigma_opt_a),
            num(r.sigma_opt_omega / r.step_db),
            r.unimodal.to_string(),
        ])?;
    }
    Ok(Outcome::csv(t.finish()?))
}

/// Operating point for the rate sweeps, whose sample rate and length are
/// replaced per grid point; only `A` and `f` matter.
fn rate_op(a_db: f64, f_hz: f64) -> CliResult<OperatingPoint> {
    Ok(OperatingPoint::new(a_db, f_hz, 4.0 * f_hz, 400)?)
}

fn sweep_rate_cmd(a: &SweepRateArgs, rec: &mut Rec) -> CliResult<Outcome> {
    rec.put("a-db", a.a_db);
    rec.put("f-hz", a.f_hz);
    rec.list("rates-hz", &a.rates_hz);
    rec.put("sigma", a.sigma);
    rec.list("steps-db", &a.steps_db);
    rec.put("observation-s", a.observation_s);
    a.grid.record(rec);
    if !(a.observation_s > 0.0 && a.observation_s.is_finite()) {
        return Err(rss_sentry::Error::domain("observation-s must be > 0").into());
    }
    let cfg = sweep_config(&a.grid, None, a.observation_s)?;
    let op = rate_op(a.a_db, a.f_hz)?;
    let mut t = Table::new(&[
        "step_db",
        "sigma_db",
        "sample_rate_hz",
        "num_samples",
        "frequency_hz",
        "std_a_db",
        "std_f_hz",
        "failure_fraction",
        "flagged",
        "note",
    ])?;
    for &d in &a.steps_db {
        let s = sweep_sample_rate(&op, &a.rates_hz, a.sigma, d, &cfg)?;
        if !(s.std_a_decreasing && s.std_f_decreasing) {
            eprintln!("warning: step {d} dB: bounds do not strictly decrease with sample rate");
        }
        for r in &s.rows {
            t.row([
                num(d),
                num(a.sigma),
                num(r.sample_rate_hz),
                r.num_samples.to_string(),
                num(r.frequency_hz),
                num(r.std_a_db),
                num(r.std_f_hz),
                num(r.failure_fraction),
                r.flagged.to_string(),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
    }
    Ok(Outcome::csv(t.finish()?))
}

fn contour_cmd(a: &ContourArgs, rec: &mut Rec) -> CliResult<Outcome> {
    rec.put("a-db", a.a_db);
    rec.put("f-hz", a.f_hz);
    rec.list("rates-hz", &a.rates_hz);
    rec.list("steps-db", &a.steps_db);
    rec.put("observation-s", a.observation_s);
    a.search.record(rec);
    a.grid.record(rec);
    if !(a.observation_s > 0.0 && a.observation_s.is_finite()) {
        return Err(rss_sentry::Error::domain("observation-s must be > 0").into());
    }
    let cfg = sweep_config(&a.grid, Some(&a.search), a.observation_s)?;
    let table = sweep_contour(&a.rates_hz, &a.steps_db, &rate_op(a.a_db, a.f_hz)?, &cfg)?;
    let mut t = Table::new(&[
        "sample_rate_hz",
        "step_db",
        "min_std_a_db",
        "min_std_f_hz",
        "sigma_opt_omega_db",
    ])?;
    for (i, fs) in table.rates_hz.iter().enumerate() {
        for (j, d) in table.steps_db.iter().enumerate() {
            t.row([
                num(*fs),
                num(*d),
                num(table.std_a_db[i][j]),
                num(table.std_f_hz[i][j]),
                num(table.sigma_opt_omega[i][j]),
            ])?;
        }
    }
    Ok(Outcome::csv(t.finish()?))
}
