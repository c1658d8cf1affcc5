//! Flat `key=value` configuration for Monte Carlo runs.
//!
//! One assignment per line; `#` starts a comment. Keys carry their unit as a
//! suffix (`_db`, `_hz`); counts and choices (`trials`, `n`, `seed`,
//! `method`, `quantizer`) are unitless.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `f_hz` | tone frequency | required |
//! | `fs_hz` | sample rate | required |
//! | `a_db` | tone amplitude | 0.025 |
//! | `n` | samples per trace | `round(fs_hz · 1 s)` |
//! | `step_db` | width of the offset dither | 1 |
//! | `sigma_grid` | comma-separated noise std values, dB | 12 log-spaced points over `[0.01, 3]·step_db` |
//! | `trials` | trials per noise level | 200 |
//! | `seed` | RNG seed | 0 |
//! | `method` | `mle`, `periodogram` or `lsq` | `mle` |
//! | `quantizer` | `one-bit`, `uniform` or `none` | `one-bit` |
//! | `threshold_db` | one-bit threshold | 0 |
//! | `band_lo_hz`, `band_hi_hz` | frequency search band | `[fs/N, fs/2 − fs/N]` |

use std::collections::BTreeMap;
use std::str::FromStr;

use rss_sentry::bounds::{default_sigma_grid, SigmaSearch};
use rss_sentry::estimators::{Band, McConfig, Method};
use rss_sentry::signal::QuantizerSpec;

use crate::{CliError, CliResult};

/// Accepted keys in canonical order. `sigma_grid_db` is an alias of
/// `sigma_grid`.
pub const KEYS: &[&str] = &[
    "f_hz",
    "fs_hz",
    "a_db",
    "n",
    "step_db",
    "sigma_grid",
    "trials",
    "seed",
    "method",
    "quantizer",
    "threshold_db",
    "band_lo_hz",
    "band_hi_hz",
];

const DEFAULT_SIGMA_POINTS: usize = 12;
const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerChoice {
    None,
    OneBit,
    Uniform,
}

impl QuantizerChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuantizerChoice::None => "none",
            QuantizerChoice::OneBit => "one-bit",
            QuantizerChoice::Uniform => "uniform",
        }
    }

    /// The quantizer spec, with `step_db` used only in uniform mode.
    pub fn spec(
        &self,
        threshold_db: f64,
        step_db: f64,
    ) -> rss_sentry::Result<Option<QuantizerSpec>> {
        match self {
            QuantizerChoice::None => Ok(None),
            QuantizerChoice::OneBit => {
                let q = QuantizerSpec::one_bit(threshold_db);
                q.validate()?;
                Ok(Some(q))
            }
            QuantizerChoice::Uniform => QuantizerSpec::uniform(step_db).map(Some),
        }
    }
}

impl FromStr for QuantizerChoice {
    type Err = rss_sentry::Error;

    fn from_str(s: &str) -> rss_sentry::Result<Self> {
        match s {
            "none" => Ok(QuantizerChoice::None),
            "one-bit" => Ok(QuantizerChoice::OneBit),
            "uniform" => Ok(QuantizerChoice::Uniform),
            other => Err(rss_sentry::Error::domain(format!(
                "unknown quantizer '{other}' (expected none, one-bit or uniform)"
            ))),
        }
    }
}

/// Fully resolved Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub f_hz: f64,
    pub fs_hz: f64,
    pub a_db: f64,
    pub n: usize,
    pub step_db: f64,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub method: Method,
    pub quantizer: QuantizerChoice,
    pub threshold_db: f64,
    pub band_lo_hz: Option<f64>,
    pub band_hi_hz: Option<f64>,
}

impl McSettings {
    pub fn mc_config(&self) -> CliResult<McConfig> {
        let band = match (self.band_lo_hz, self.band_hi_hz) {
            (Some(lo), Some(hi)) => Some(Band::new(lo, hi)),
            (None, None) => None,
            _ => {
                return Err(CliError::MissingKey(
                    if self.band_lo_hz.is_none() {
                        "band_lo_hz"
                    } else {
                        "band_hi_hz"
                    }
                    .into(),
                ))
            }
        };
        let cfg = McConfig {
            trials: self.trials,
            amplitude_db: self.a_db,
            frequency_hz: self.f_hz,
            sample_rate_hz: self.fs_hz,
            num_samples: self.n,
            step_db: self.step_db,
            quantizer: self.quantizer.spec(self.threshold_db, self.step_db)?,
            sigma_grid: self.sigma_grid.clone(),
            seed: self.seed,
            band,
        };
        cfg.validate(self.method)?;
        Ok(cfg)
    }

    /// Every key with its resolved value, in canonical order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let list = self
            .sigma_grid
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut pairs = vec![
            ("f_hz", self.f_hz.to_string()),
            ("fs_hz", self.fs_hz.to_string()),
            ("a_db", self.a_db.to_string()),
            ("n", self.n.to_string()),
            ("step_db", self.step_db.to_string()),
            ("sigma_grid", list),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("method", self.method.as_str().to_string()),
            ("quantizer", self.quantizer.as_str().to_string()),
            ("threshold_db", self.threshold_db.to_string()),
        ];
        if let Some(v) = self.band_lo_hz {
            pairs.push(("band_lo_hz", v.to_string()));
        }
        if let Some(v) = self.band_hi_hz {
            pairs.push(("band_hi_hz", v.to_string()));
        }
        pairs
    }

    /// Renders the settings as a config file that resolves to `self`.
    pub fn to_config_text(&self) -> String {
        self.to_pairs()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn canonical(key: &str) -> &str {
    if key == "sigma_grid_db" {
        "sigma_grid"
    } else {
        key
    }
}

fn closest_key(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|k| (!k.starts_with(key), strsim::levenshtein(key, k), *k))
        .filter(|(other, d, _)| !other || *d <= 3)
        .min()
        .map(|(_, _, k)| k.to_string())
}

/// Checks a single key, canonicalising aliases.
pub fn check_key(key: &str) -> CliResult<&'static str> {
    let c = canonical(key);
    KEYS.iter()
        .find(|k| **k == c)
        .copied()
        .ok_or_else(|| CliError::UnknownKey {
            key: key.to_string(),
            hint: closest_key(key),
        })
}

/// Splits config text into a key map. Unknown and duplicate keys are errors.
pub fn parse_pairs(text: &str) -> CliResult<BTreeMap<&'static str, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Syntax {
            line: i + 1,
            msg: format!("expected key=value, found '{line}'"),
        })?;
        let key = check_key(k.trim())?;
        if map.insert(key, v.trim().to_string()).is_some() {
            return Err(CliError::Syntax {
                line: i + 1,
                msg: format!("key '{key}' given twice"),
            });
        }
    }
    Ok(map)
}

fn parse_as<T: FromStr>(
    map: &BTreeMap<&'static str, String>,
    key: &str,
    expected: &'static str,
) -> CliResult<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse().map_err(|_| CliError::TypeMismatch {
                key: key.to_string(),
                value: v.clone(),
                expected,
            })
        })
        .transpose()
}

fn parse_choice<T: FromStr<Err = rss_sentry::Error>>(
    map: &BTreeMap<&'static str, String>,
    key: &str,
) -> CliResult<Option<T>> {
    map.get(key)
        .map(|v| v.parse().map_err(CliError::Core))
        .transpose()
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(rss_sentry::Error::domain(format!("{key} must be > 0")).into())
    }
}

/// Resolves a key map into settings, filling every default.
pub fn resolve(map: &BTreeMap<&'static str, String>) -> CliResult<McSettings> {
    let f_hz: f64 =
        parse_as(map, "f_hz", "a number")?.ok_or_else(|| CliError::MissingKey("f_hz".into()))?;
    let fs_hz: f64 =
        parse_as(map, "fs_hz", "a number")?.ok_or_else(|| CliError::MissingKey("fs_hz".into()))?;
    let fs_hz = positive("fs_hz", fs_hz)?;
    let step_db = positive(
        "step_db",
        parse_as(map, "step_db", "a number")?.unwrap_or(1.0),
    )?;
    let sigma_grid = match map.get("sigma_grid") {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| CliError::TypeMismatch {
                    key: "sigma_grid".into(),
                    value: s.trim().to_string(),
                    expected: "a number",
                })
            })
            .collect::<CliResult<Vec<f64>>>()?,
        None => default_sigma_grid(
            step_db,
            &SigmaSearch {
                points: DEFAULT_SIGMA_POINTS,
                ..SigmaSearch::default()
            },
        ),
    };
    let settings = McSettings {
        f_hz,
        fs_hz,
        a_db: parse_as(map, "a_db", "a number")?.unwrap_or(0.025),
        n: parse_as(map, "n", "a non-negative integer")?.unwrap_or((fs_hz.round()) as usize),
        step_db,
        sigma_grid,
        trials: parse_as(map, "trials", "a non-negative integer")?.unwrap_or(DEFAULT_TRIALS),
        seed: parse_as(map, "seed", "a non-negative integer")?.unwrap_or(0),
        method: parse_choice(map, "method")?.unwrap_or(Method::Mle),
        quantizer: parse_choice(map, "quantizer")?.unwrap_or(QuantizerChoice::OneBit),
        threshold_db: parse_as(map, "threshold_db", "a number")?.unwrap_or(0.0),
        band_lo_hz: parse_as(map, "band_lo_hz", "a number")?,
        band_hi_hz: parse_as(map, "band_hi_hz", "a number")?,
    };
    settings.mc_config()?;
    Ok(settings)
}

/// Parses and resolves a config file's text.
pub fn validate_config(text: &str) -> CliResult<McSettings> {
    resolve(&parse_pairs(text)?)
}
