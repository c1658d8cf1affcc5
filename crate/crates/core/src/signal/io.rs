//! Trace files.
//!
//! `csv-rss` is a two-column CSV with header `t_s,rss_db` (`rss_dbm` is
//! accepted as the second column name on input). `csv-kv` is one sample per
//! line written as comma-separated `key=value` pairs, for instance
//! `t_s=0.0005,rss_dbm=-45.2,lqi=93`; keys other than time and power are
//! ignored. Values are written in shortest round-trip decimal form, so an
//! exported trace reads back bit-exactly.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{RssTrace, TraceKind, TraceSource};
use crate::error::{Error, Result};

/// Jitter below this fraction of the sample period is treated as exact.
const EXACT_JITTER: f64 = 1e-6;
/// Jitter up to this fraction of the sample period is snapped to the grid.
const MAX_JITTER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    CsvRss,
    CsvKv,
}

impl TraceFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceFormat::CsvRss => "csv-rss",
            TraceFormat::CsvKv => "csv-kv",
        }
    }
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv-rss" => Ok(TraceFormat::CsvRss),
            "csv-kv" => Ok(TraceFormat::CsvKv),
            other => Err(Error::domain(format!(
                "unknown trace format '{other}' (expected csv-rss or csv-kv)"
            ))),
        }
    }
}

fn is_power_key(key: &str) -> bool {
    key == "rss_db" || key == "rss_dbm"
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("'{}' is not a number", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value '{}'", field.trim()),
        });
    }
    Ok(v)
}

fn parse_csv_rss(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::EmptyTrace)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 || cols[0] != "t_s" || !is_power_key(cols[1]) {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected header 't_s,rss_db', found '{header}'"),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        times.push(parse_f64(fields[0], line)?);
        values.push(parse_f64(fields[1], line)?);
    }
    Ok((times, values))
}

fn parse_csv_kv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let line = i + 1;
        let row = row.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let mut t = None;
        let mut p = None;
        for pair in row.split(',') {
            let (k, v) = pair.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("'{}' is not key=value", pair.trim()),
            })?;
            let k = k.trim();
            if k == "t_s" {
                t = Some(parse_f64(v, line)?);
            } else if is_power_key(k) {
                p = Some(parse_f64(v, line)?);
            }
        }
        match (t, p) {
            (Some(t), Some(p)) => {
                times.push(t);
                values.push(p);
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: "line needs both t_s and rss_db (or rss_dbm)".into(),
                })
            }
        }
    }
    Ok((times, values))
}

/// Checks spacing and returns `(times, sample_rate_hz, resampled)`.
fn regularize(times: Vec<f64>) -> Result<(Vec<f64>, f64, bool)> {
    let n = times.len();
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    if n < 2 {
        return Err(Error::Parse {
            line: 0,
            msg: "need at least two samples to infer the sample rate".into(),
        });
    }
    if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("timestamps not strictly increasing at sample {}", k + 1),
        });
    }
    let t0 = times[0];
    let period = (times[n - 1] - t0) / (n - 1) as f64;
    let max_jitter = times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t - (t0 + k as f64 * period)).abs())
        .fold(0.0, f64::max);
    if max_jitter <= EXACT_JITTER * period {
        Ok((times, 1.0 / period, false))
    } else if max_jitter < MAX_JITTER * period {
        let snapped = (0..n).map(|k| t0 + k as f64 * period).collect();
        Ok((snapped, 1.0 / period, true))
    } else {
        Err(Error::Jitter {
            max_jitter_s: max_jitter,
            period_s: period,
        })
    }
}

/// Parses trace text. `kind` overrides detection; by default a trace whose
/// values are all `±1` is one-bit and anything else is continuous.
pub fn read_trace(
    text: &str,
    format: TraceFormat,
    kind: Option<TraceKind>,
    origin: &str,
) -> Result<RssTrace> {
    let (times, values) = match format {
        TraceFormat::CsvRss => parse_csv_rss(text)?,
        TraceFormat::CsvKv => parse_csv_kv(text)?,
    };
    let (times_s, sample_rate_hz, resampled) = regularize(times)?;
    let kind = kind.unwrap_or_else(|| {
        if values.iter().all(|&v| v == 1.0 || v == -1.0) {
            TraceKind::OneBit
        } else {
            TraceKind::Continuous
        }
    });
    if kind == TraceKind::OneBit && values.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::domain("one-bit trace values must be -1 or +1"));
    }
    Ok(RssTrace {
        times_s,
        values,
        kind,
        sample_rate_hz,
        source: TraceSource::Ingested {
            path: origin.to_string(),
            format,
            resampled,
        },
    })
}

/// Reads a trace file.
pub fn ingest_trace(path: &Path, format: TraceFormat, kind: Option<TraceKind>) -> Result<RssTrace> {
    let text = std::fs::read_to_string(path)?;
    read_trace(&text, format, kind, &path.display().to_string())
}

/// Writes `t_s,rss_db` CSV.
pub fn export_csv_rss<W: Write>(trace: &RssTrace, out: &mut W) -> Result<()> {
    let mut buf = String::with_capacity(24 * trace.len() + 16);
    buf.push_str("t_s,rss_db\n");
    for (t, v) in trace.times_s.iter().zip(&trace.values) {
        let _ = writeln!(buf, "{t},{v}");
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_csv_rss(trace: &RssTrace, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    export_csv_rss(trace, &mut f)?;
    f.flush()?;
    Ok(())
}
