//! `key = value` configuration with `#` comments and `[section]` headers.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::parse_f64;

/// Parsed settings. Keys are stored without their section; the section only
/// scopes the file visually, so the same key in two sections is an error.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

impl RunConfig {
    pub fn new(allowed: &'static [&'static str]) -> Self {
        RunConfig {
            values: BTreeMap::new(),
            allowed,
        }
    }

    pub fn parse(text: &str, allowed: &'static [&'static str]) -> Result<Self> {
        let mut cfg = RunConfig::new(allowed);
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", n + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.insert(
                k.trim(),
                v.trim(),
                &format!(
                    "line {}{}",
                    n + 1,
                    if section.is_empty() { String::new() } else { format!(" [{section}]") }
                ),
            )?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path, allowed: &'static [&'static str]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, allowed)
    }

    fn insert(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        if !self.allowed.contains(&key) {
            return Err(Error::Config(format!("{origin}: unknown key '{key}'")));
        }
        if self.values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("{origin}: duplicate key '{key}'")));
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let k = k.trim();
        if !self.allowed.contains(&k) {
            return Err(Error::Config(format!("override: unknown key '{k}'")));
        }
        self.values.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(s) => parse_f64(s).map_err(|_| Error::Config(format!("{key}: not a number: {s:?}"))),
            None => Ok(default),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            Some(s) => s.parse().map_err(|_| Error::Config(format!("{key}: not a count: {s:?}"))),
            None => Ok(default),
        }
    }
}

/// `name:arg` with an optional `k=v` argument, e.g. `analytic:c=1`.
pub fn split_source(s: &str) -> (&str, &str) {
    match s.split_once(':') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s.trim(), ""),
    }
}
