//! `key = value` configuration merged with command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coorbit::Error;

/// Parameters of one subcommand after merging the config file (if any) with
/// the flags; flags win.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: String,
    params: BTreeMap<String, String>,
    pub out: PathBuf,
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!("config line {}: expected key = value, got '{raw}'", i + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::InvalidParameter(format!("config line {}: empty key or value", i + 1)));
        }
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    /// `allowed` lists every key the command understands; anything else is rejected.
    pub fn build(
        command: &str,
        config: Option<&Path>,
        flags: BTreeMap<String, String>,
        allowed: &[&str],
    ) -> Result<Self, Error> {
        let mut params = match config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        params.extend(flags);
        let out = params.remove("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "'{k}' is not a parameter of {command} (accepted: {})",
                allowed.join(", ")
            )));
        }
        Ok(ExperimentConfig { command: command.to_string(), params, out })
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => {
                v.parse().map(Some).map_err(|_| Error::InvalidParameter(format!("{key} = '{v}' is not a valid value")))
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, Error> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// Positive finite real.
    pub fn positive(&self, key: &str, default: f64) -> Result<f64, Error> {
        let v = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{key} must be a positive number, got {v}")));
        }
        Ok(v)
    }

    /// Exponent in `[1, ∞)`.
    pub fn exponent(&self, key: &str, default: f64) -> Result<f64, Error> {
        let v = self.get(key, default)?;
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{key} must satisfy 1 <= {key} < inf, got {v}")));
        }
        Ok(v)
    }

    pub fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, Error> {
        let v = self.get(key, default)?;
        if v < min {
            return Err(Error::InvalidParameter(format!("{key} must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    /// Cone dimension, `n ≥ 3`.
    pub fn dimension(&self, default: usize) -> Result<usize, Error> {
        let n = self.get("n", default)?;
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cone dimension n must be >= 3, got {n}")));
        }
        Ok(n)
    }
}
