//! Run configuration from a key=value file, merged under explicit flags.
//!
//! Precedence is flag, then config file, then built-in default. The file is
//! line-oriented `key = value` (spaces around `=` optional); blank lines and
//! `#` comments are skipped. Unknown and duplicate keys are rejected so a
//! typo fails loudly instead of silently running with defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Every key a config file may set; each mirrors a command-line flag.
const KNOWN_KEYS: [&str; 13] = [
    "lexicon",
    "stoplist",
    "taxonomy",
    "window_size",
    "lambda",
    "smooth_iters",
    "min_relevance",
    "max_boundaries",
    "a",
    "dice_product",
    "unweighted_g",
    "seed",
    "out",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Reads and parses the file when a path is given; an absent flag means
    /// an empty config.
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                ConfigFile::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<ConfigFile, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| CliError::Config(format!("config line {}: {msg}", lineno + 1));
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(format!("expected key=value, got {line:?}")));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(err(format!("empty value for key {key:?}")));
            }
            if values.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(err(format!("duplicate key {key:?}")));
            }
        }
        Ok(ConfigFile { values })
    }

    /// Typed lookup; a present but unparsable value is a config error.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "lookup of undocumented key {key:?}");
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Config(format!("config key {key}: bad value {raw:?}: {e}"))
            }),
        }
    }
}

/// Flag value if set, else config value, else the default.
pub fn resolve<T>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    Ok(resolve_opt(flag, cfg, key)?.unwrap_or(default))
}

/// Flag value if set, else config value, else nothing.
pub fn resolve_opt<T>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// A resource path that must come from either a flag or the config file.
pub fn require_path(
    flag: Option<PathBuf>,
    cfg: &ConfigFile,
    key: &str,
    flag_name: &str,
) -> Result<PathBuf, CliError> {
    resolve_opt(flag, cfg, key)?
        .ok_or_else(|| CliError::Config(format!("missing {flag_name} (or config key {key})")))
}

// ---------------------------------------------------------------------------
