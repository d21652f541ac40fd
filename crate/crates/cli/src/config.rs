//! `key=value` config files. Blank lines and lines starting with `#` are
//! skipped; keys use the long flag names without dashes (`cdf-floor`, `n`, …).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

pub const KEYS: &[&str] = &[
    "density",
    "n",
    "out",
    "seed",
    "tol",
    "grid",
    "cdf-floor",
    "sphere-dims",
    "count",
    "points",
    "phi",
    "p",
    "trials",
];

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag` if given, else the parsed config value, else None.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| CliError::spec(format!("config {key}={raw} is not valid"))),
        }
    }
}

impl FromStr for Config {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::spec(format!("config line {}: expected key=value", i + 1)))?;
            let k = k.trim().trim_start_matches("--");
            if !KEYS.contains(&k) {
                return Err(CliError::spec(format!("config line {}: unknown key \"{k}\"", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }
}
