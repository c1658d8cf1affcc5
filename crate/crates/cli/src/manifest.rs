//! Run manifests: `key=value` sidecars that make every CSV reproducible.
//!
//! ```text
//! subcommand=sweep-noise
//! version=0.1.0
//! output=/abs/path/noise.csv
//! seed=0
//! duration_s=3.2
//! arg.a-db=0.025
//! arg.sigma=0.1,0.2
//! ```
//!
//! `arg.*` lines hold every flag of the subcommand with its resolved value,
//! defaults included, in the order the command line would take them.
//! Replaying them as `--flag=value` reproduces the run.

use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    /// Resolved `(flag, value)` pairs, flags without the leading `--`.
    pub args: Vec<(String, String)>,
    pub inputs: Vec<String>,
    pub output: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub duration_s: f64,
}

impl RunManifest {
    /// Sidecar path for an output file: `<out>.manifest`.
    pub fn sidecar(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest");
        PathBuf::from(s)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "subcommand={}\nversion={}\noutput={}\n",
            self.subcommand, self.version, self.output
        );
        for i in &self.inputs {
            out += &format!("input={i}\n");
        }
        if let Some(s) = self.seed {
            out += &format!("seed={s}\n");
        }
        if let Some(t) = self.threads {
            out += &format!("threads={t}\n");
        }
        out += &format!("duration_s={}\n", self.duration_s);
        for (k, v) in &self.args {
            out += &format!("arg.{k}={v}\n");
        }
        out
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut m = RunManifest {
            subcommand: String::new(),
            version: String::new(),
            args: Vec::new(),
            inputs: Vec::new(),
            output: String::new(),
            seed: None,
            threads: None,
            duration_s: f64::NAN,
        };
        let bad = |line: usize, msg: &str| CliError::Manifest(format!("line {line}: {msg}"));
        for (i, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(i, "expected key=value"))?;
            match k {
                "subcommand" => m.subcommand = v.to_string(),
                "version" => m.version = v.to_string(),
                "output" => m.output = v.to_string(),
                "input" => m.inputs.push(v.to_string()),
                "seed" => m.seed = Some(v.parse().map_err(|_| bad(i, "seed is not an integer"))?),
                "threads" => {
                    m.threads = Some(v.parse().map_err(|_| bad(i, "threads is not an integer"))?)
                }
                "duration_s" => {
                    m.duration_s = v
                        .parse()
                        .map_err(|_| bad(i, "duration_s is not a number"))?
                }
                _ => match k.strip_prefix("arg.") {
                    Some(flag) if !flag.is_empty() => {
                        m.args.push((flag.to_string(), v.to_string()))
                    }
                    _ => return Err(bad(i, &format!("unknown key '{k}'"))),
                },
            }
        }
        if m.subcommand.is_empty() {
            return Err(CliError::Manifest("no subcommand recorded".into()));
        }
        if m.output.is_empty() {
            return Err(CliError::Manifest("no output recorded".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Command line replaying this run, writing to `output` (or the
    /// recorded output when `None`).
    pub fn argv(&self, output: Option<&Path>) -> Vec<String> {
        let mut argv = vec!["rss-sentry".to_string(), self.subcommand.clone()];
        argv.extend(self.args.iter().map(|(k, v)| format!("--{k}={v}")));
        let out = output.map_or_else(|| self.output.clone(), |p| p.display().to_string());
        argv.push(format!("--out={out}"));
        argv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            subcommand: "crb".into(),
            version: "0.1.0".into(),
            args: vec![
                ("a-db".into(), "0.025".into()),
                ("b-db".into(), "-0.5".into()),
            ],
            inputs: vec!["/tmp/in.csv".into()],
            output: "/tmp/out.csv".into(),
            seed: Some(7),
            threads: Some(2),
            duration_s: 0.25,
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let m = sample();
        assert_eq!(RunManifest::parse(&m.render()).unwrap(), m);
    }

    #[test]
    fn argv_uses_equals_form() {
        let argv = sample().argv(Some(Path::new("/x/y.csv")));
        assert_eq!(
            argv,
            [
                "rss-sentry",
                "crb",
                "--a-db=0.025",
                "--b-db=-0.5",
                "--out=/x/y.csv"
            ]
        );
        assert_eq!(sample().argv(None).last().unwrap(), "--out=/tmp/out.csv");
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunManifest::parse("output=/a\n").is_err());
        assert!(RunManifest::parse("subcommand=crb\n").is_err());
        assert!(RunManifest::parse("subcommand=crb\noutput=/a\nbogus=1\n").is_err());
        assert!(RunManifest::parse("subcommand=crb\noutput=/a\nseed=x\n").is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            RunManifest::sidecar(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.manifest")
        );
    }
}
