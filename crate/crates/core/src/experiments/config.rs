//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    TvCurve,
    CutoffProfile,
    GapScan,
    Entropic,
    Verify,
    Cheeger,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Spectrum,
        Command::TvCurve,
        Command::CutoffProfile,
        Command::GapScan,
        Command::Entropic,
        Command::Verify,
        Command::Cheeger,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::TvCurve => "tv-curve",
            Command::CutoffProfile => "cutoff-profile",
            Command::GapScan => "gap-scan",
            Command::Entropic => "entropic",
            Command::Verify => "verify",
            Command::Cheeger => "cheeger",
        }
    }

    /// Whether the command draws random generators and so needs a seed.
    pub fn needs_seed(self) -> bool {
        !matches!(self, Command::Entropic | Command::Verify)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.as_str().replace('-', "_") == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" | "jsonl" => Ok(Format::Json),
            other => Err(Error::InvalidInput(format!("unknown format `{other}`"))),
        }
    }
}

/// Times at which a TV curve is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeGrid {
    /// Log-spaced points over `[t_{-3}, t_3]` of the instance's entropic window.
    Auto { points: usize },
    Log { lo: f64, hi: f64, points: usize },
    Linear { lo: f64, hi: f64, points: usize },
    List(Vec<f64>),
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::Auto { points: 60 }
    }
}

impl TimeGrid {
    /// Expands the grid, using `(lo, hi)` for the automatic bracket.
    pub fn resolve(&self, auto: (f64, f64)) -> Vec<f64> {
        match *self {
            TimeGrid::Auto { points } => log_space(auto.0, auto.1, points),
            TimeGrid::Log { lo, hi, points } => log_space(lo, hi, points),
            TimeGrid::Linear { lo, hi, points } => {
                if points == 1 {
                    return vec![lo];
                }
                (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
            }
            TimeGrid::List(ref ts) => ts.clone(),
        }
    }
}

fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeGrid::Auto { points } => write!(f, "auto:{points}"),
            TimeGrid::Log { lo, hi, points } => write!(f, "log:{lo:e}:{hi:e}:{points}"),
            TimeGrid::Linear { lo, hi, points } => write!(f, "lin:{lo:e}:{hi:e}:{points}"),
            TimeGrid::List(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| format!("{t:e}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for TimeGrid {
    type Err = Error;

    /// `auto`, `auto:N`, `log:LO:HI:N`, `lin:LO:HI:N`, or a comma list of times.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("bad time grid `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let grid = match parts[0] {
            "auto" => match parts.len() {
                1 => TimeGrid::default(),
                2 => TimeGrid::Auto { points: parts[1].parse().map_err(|_| bad())? },
                _ => return Err(bad()),
            },
            kind @ ("log" | "lin") => {
                if parts.len() != 4 {
                    return Err(bad());
                }
                let lo: f64 = parts[1].parse().map_err(|_| bad())?;
                let hi: f64 = parts[2].parse().map_err(|_| bad())?;
                let points: usize = parts[3].parse().map_err(|_| bad())?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                    return Err(bad());
                }
                if kind == "log" {
                    if lo <= 0.0 {
                        return Err(Error::InvalidInput("log grid needs lo > 0".into()));
                    }
                    TimeGrid::Log { lo, hi, points }
                } else {
                    TimeGrid::Linear { lo, hi, points }
                }
            }
            _ => {
                let ts = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
                if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    return Err(Error::InvalidInput("times must be finite and non-negative".into()));
                }
                TimeGrid::List(ts)
            }
        };
        match grid {
            TimeGrid::Auto { points: 0 } | TimeGrid::Log { points: 0, .. } | TimeGrid::Linear { points: 0, .. } => {
                Err(Error::InvalidInput("time grid needs at least one point".into()))
            }
            TimeGrid::List(ref ts) if ts.is_empty() => Err(bad()),
            g => Ok(g),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub group: Option<GroupSpec>,
    /// Group orders for `entropic`; defaults to the order of `group`.
    pub n: Vec<f64>,
    pub k: Vec<usize>,
    pub model: Model,
    pub alphas: Vec<f64>,
    pub t_grid: TimeGrid,
    pub replicates: usize,
    pub samples: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub only: Option<String>,
    pub force: bool,
    /// Replacement tolerances for `verify`, by check name.
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            group: None,
            n: Vec::new(),
            k: Vec::new(),
            model: Model::Undirected,
            alphas: vec![-1.5, 0.0, 1.5],
            t_grid: TimeGrid::default(),
            replicates: 1,
            samples: 10_000,
            seed: None,
            out: None,
            format: Format::Csv,
            only: None,
            force: false,
            tolerances: BTreeMap::new(),
        }
    }

    /// Applies one setting. Keys use either `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| Error::InvalidInput(format!("bad value `{value}` for `{key}`: {what}"));
        match key.as_str() {
            "command" => self.command = value.parse()?,
            "group" => self.group = Some(value.parse()?),
            "n" => {
                self.n = parse_list::<f64>(value).map_err(|_| bad("expected numbers"))?;
                if self.n.iter().any(|n| !(n.is_finite() && *n >= 2.0)) {
                    return Err(bad("orders must be finite and >= 2"));
                }
            }
            "k" => {
                self.k = parse_list::<usize>(value).map_err(|_| bad("expected positive integers"))?;
                if self.k.contains(&0) {
                    return Err(bad("k must be >= 1"));
                }
            }
            "model" => self.model = value.parse()?,
            "alpha" | "alphas" => {
                self.alphas = parse_list::<f64>(value).map_err(|_| bad("expected numbers"))?;
                if self.alphas.is_empty() || self.alphas.iter().any(|a| !a.is_finite()) {
                    return Err(bad("alphas must be finite"));
                }
            }
            "t_grid" => self.t_grid = value.parse()?,
            "replicates" => {
                self.replicates = value.parse().map_err(|_| bad("expected an integer"))?;
                if self.replicates == 0 {
                    return Err(bad("replicates must be >= 1"));
                }
            }
            "samples" => self.samples = value.parse().map_err(|_| bad("expected an integer"))?,
            "seed" => self.seed = Some(value.parse().map_err(|_| bad("expected a u64"))?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "only" => self.only = Some(value.to_string()),
            "force" => self.force = parse_bool(value).ok_or_else(|| bad("expected true/false"))?,
            _ => match key.strip_prefix("tolerance.") {
                Some(check) => {
                    let tol: f64 = value.parse().map_err(|_| bad("expected a number"))?;
                    self.tolerances.insert(check.to_string(), tol);
                }
                None => return Err(Error::InvalidInput(format!("unknown config key `{key}`"))),
            },
        }
        Ok(())
    }

    /// Applies a flat config file: one `key = value` per line, `#` comments.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("config line {}: expected key = value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Every setting that influences output bytes, one `key=value` per entry.
    ///
    /// The output path is left out so a rerun into another file is byte-identical.
    pub fn canonical(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("command".to_string(), self.command.to_string()),
            ("group".into(), self.group.as_ref().map(|g| g.to_string()).unwrap_or_default()),
            ("n".into(), join(&self.n, |n| format!("{n:e}"))),
            ("k".into(), join(&self.k, |k| k.to_string())),
            ("model".into(), self.model.to_string()),
            ("alpha".into(), join(&self.alphas, |a| format!("{a:e}"))),
            ("t_grid".into(), self.t_grid.to_string()),
            ("replicates".into(), self.replicates.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("seed".into(), self.seed.map(|s| s.to_string()).unwrap_or_default()),
            ("format".into(), self.format.as_str().into()),
            ("only".into(), self.only.clone().unwrap_or_default()),
            ("force".into(), self.force.to_string()),
        ];
        for (check, tol) in &self.tolerances {
            out.push((format!("tolerance.{check}"), format!("{tol:e}")));
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(&hasher.finalize()[..8])
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidInput(format!("`{}` needs an explicit seed", self.command)))
    }

    pub fn group(&self) -> Result<&GroupSpec> {
        self.group.as_ref().ok_or_else(|| Error::InvalidInput(format!("`{}` needs a group", self.command)))
    }

    /// The single generator count used by commands that take one.
    pub fn single_k(&self) -> Result<usize> {
        match self.k[..] {
            [k] => Ok(k),
            [] => Err(Error::InvalidInput(format!("`{}` needs k", self.command))),
            _ => Err(Error::InvalidInput(format!("`{}` takes a single k", self.command))),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(",")
}
