//! Line-based key=value config files: one pair per line, `#` comments,
//! blank lines ignored. Flags always override file values; keys a command
//! does not know are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile {
            values: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config '{}': {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::io(format!(
                    "config '{}' line {}: expected key=value, got '{raw}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    /// Fails on keys the command does not understand.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                return Err(CliError::io(format!(
                    "unknown config key '{key}' (known keys: {})",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Flag value if given, else the config-file value, else the default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| CliError::io(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    /// Like [`resolve`] but without a default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::io(format!("config key '{key}': {e}"))),
            None => Ok(None),
        }
    }
}
