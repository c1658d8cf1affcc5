//! Command-line front end for `rss-sentry`.
//!
//! Every subcommand renders its CSV in memory and only then writes it, via a
//! temporary file and a rename, so a failed run never leaves a partial file.
//! A `<out>.manifest` sidecar records the fully resolved parameters; `rerun`
//! replays it.

mod commands;
pub mod config;
pub mod manifest;
mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use rss_sentry::ErrorClass;

pub use commands::Cli;
pub use config::{validate_config, McSettings, QuantizerChoice};
pub use manifest::RunManifest;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "RSS_SENTRY_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rss_sentry::Error),

    #[error("{0}")]
    Usage(String),

    #[error("missing required key '{0}'")]
    MissingKey(String),

    #[error("unknown key '{key}'{}", hint.as_ref().map(|h| format!(" (did you mean '{h}'?)")).unwrap_or_default())]
    UnknownKey { key: String, hint: Option<String> },

    #[error("key '{key}': '{value}' is not {expected}")]
    TypeMismatch {
        key: String,
        value: String,
        expected: &'static str,
    },

    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Domain => EXIT_DOMAIN,
                ErrorClass::Io => EXIT_IO,
                ErrorClass::Numeric => EXIT_NUMERIC,
            },
            CliError::Manifest(_) | CliError::Io { .. } => EXIT_IO,
            _ => EXIT_DOMAIN,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let name = path.file_name().ok_or_else(|| {
        CliError::Usage(format!("output path '{}' has no file name", path.display()))
    })?;
    let tmp = path.with_file_name(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => {
                Some(v.trim().parse().map_err(|_| CliError::TypeMismatch {
                    key: THREADS_ENV.into(),
                    value: v.clone(),
                    expected: "a positive integer",
                })?)
            }
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be >= 1".into()));
    }
    Ok(n)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr, data to stdout or `--out`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
        }
    };
    let outcome = thread_count(cli.threads).and_then(|threads| match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(|| cli.command.execute(threads)),
        None => cli.command.execute(None),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
