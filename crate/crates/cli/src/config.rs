//! Flat `key=value` configuration, from a file (`config=path`) and/or the
//! command line. Command-line tokens override file entries.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `tokens`, expanding `config=<file>` first. Every key must be
    /// in `allowed`.
    pub fn parse(tokens: &[String], allowed: &[&str]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut cli = Vec::new();
        for tok in tokens {
            let (k, v) = split(tok)?;
            if k == "config" {
                cfg.load_file(Path::new(v), allowed)?;
            } else {
                cli.push((k, v));
            }
        }
        for (k, v) in cli {
            cfg.insert(k, v, allowed)?;
        }
        Ok(cfg)
    }

    fn load_file(&mut self, path: &Path, allowed: &[&str]) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split(line)?;
            self.insert(k, v, allowed)?;
        }
        Ok(())
    }

    fn insert(&mut self, k: &str, v: &str, allowed: &[&str]) -> Result<(), CliError> {
        if !allowed.contains(&k) {
            return Err(CliError::Config(format!(
                "unknown key `{k}` (expected one of {})",
                allowed.join(", ")
            )));
        }
        self.entries.insert(k.to_string(), v.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("bad value for `{key}`: {v} ({e})")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|e| CliError::Config(format!("bad list entry for `{key}`: {s} ({e})")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }
}

fn split(tok: &str) -> Result<(&str, &str), CliError> {
    let (k, v) = tok
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected key=value, got `{tok}`")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(CliError::Config(format!("empty key in `{tok}`")));
    }
    Ok((k, v))
}
