//! Flat `key = value` configuration files for [`RunConfig`].
//!
//! One setting per line, `#` starts a comment. Optional settings accept
//! `auto` to restore the size-dependent default. Later lines win, and
//! [`RunConfig::set`] applied after loading gives command-line overrides
//! precedence over the file.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::factorization::Coupling;
use crate::pipeline::RunConfig;

/// Every accepted key, in the order [`RunConfig::to_kv`] writes them.
pub const KEYS: &[&str] = &[
    "s",
    "r",
    "lambda",
    "beta",
    "mu",
    "landmark_fraction",
    "max_landmarks",
    "alpha",
    "k_max",
    "elbow_sample",
    "restarts",
    "tol",
    "max_iter",
    "inner_steps",
    "seed",
    "parallel",
    "coupling",
    "no_tsmf",
    "no_bcr",
    "no_seu",
];

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Coupling::Symmetric),
            "as-printed" => Ok(Coupling::AsPrinted),
            _ => Err(Error::InvalidConfig(format!("unknown coupling `{s}` (expected symmetric or as-printed)"))),
        }
    }
}

fn coupling_name(c: Coupling) -> &'static str {
    match c {
        Coupling::Symmetric => "symmetric",
        Coupling::AsPrinted => "as-printed",
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::InvalidConfig(format!("bad value `{raw}` for `{key}`")))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>> {
    if raw == "auto" { Ok(None) } else { value(key, raw).map(Some) }
}

fn show<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        match key.trim() {
            "s" => self.subsets = optional(key, raw)?,
            "r" => self.rank = value(key, raw)?,
            "lambda" => self.lambda = value(key, raw)?,
            "beta" => self.beta = value(key, raw)?,
            "mu" => self.mu = value(key, raw)?,
            "landmark_fraction" => self.landmark_fraction = optional(key, raw)?,
            "max_landmarks" => self.max_landmarks = optional(key, raw)?,
            "alpha" => self.alpha = value(key, raw)?,
            "k_max" => self.k_max = value(key, raw)?,
            "elbow_sample" => self.elbow_sample = value(key, raw)?,
            "restarts" => self.restarts = value(key, raw)?,
            "tol" => self.tol = value(key, raw)?,
            "max_iter" => self.max_iter = value(key, raw)?,
            "inner_steps" => self.inner_steps = value(key, raw)?,
            "seed" => self.seed = value(key, raw)?,
            "parallel" => self.parallel = value(key, raw)?,
            "coupling" => self.coupling = raw.parse()?,
            "no_tsmf" => self.no_tsmf = value(key, raw)?,
            "no_bcr" => self.no_bcr = value(key, raw)?,
            "no_seu" => self.no_seu = value(key, raw)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Defaults overridden by the lines of `text`, then validated.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1)))?;
            config.set(key, raw).map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), line: 0, reason: e.to_string() })
    }

    /// Every key with its current value; `from_kv` reads it back unchanged.
    pub fn to_kv(&self) -> String {
        let entries = [
            show(self.subsets),
            self.rank.to_string(),
            self.lambda.to_string(),
            self.beta.to_string(),
            self.mu.to_string(),
            show(self.landmark_fraction),
            show(self.max_landmarks),
            self.alpha.to_string(),
            self.k_max.to_string(),
            self.elbow_sample.to_string(),
            self.restarts.to_string(),
            self.tol.to_string(),
            self.max_iter.to_string(),
            self.inner_steps.to_string(),
            self.seed.to_string(),
            self.parallel.to_string(),
            coupling_name(self.coupling).to_string(),
            self.no_tsmf.to_string(),
            self.no_bcr.to_string(),
            self.no_seu.to_string(),
        ];
        let mut out = String::new();
        for (key, v) in KEYS.iter().zip(entries) {
            writeln!(out, "{key} = {v}").unwrap();
        }
        out
    }
}
