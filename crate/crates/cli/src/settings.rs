//! `key=value` config files and their merge with flags and environment.
//!
//! Precedence: command-line flag, then `GERMFEED_*` environment variable
//! (both resolved by clap), then the config file, then built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key a config file may contain.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("subtask", "A (relevance) or B (sentiment)"),
    ("seed", "training seed"),
    ("fold_seed", "seed of the stratified fold assignment"),
    ("k", "number of CV folds"),
    ("dim", "embedding dimension"),
    ("lr", "initial learning rate"),
    ("epochs", "training epochs"),
    ("word_ngrams", "maximum word n-gram length"),
    ("loss", "loss function (softmax)"),
    ("threads", "worker threads (1 only)"),
    ("min_count", "minimum word count"),
    ("bucket", "hash buckets for n-grams and subwords"),
    ("minn", "minimum subword length (0 disables subwords)"),
    ("maxn", "maximum subword length"),
    ("casing", "lowercased or cased"),
    ("id", "experiment id in the results store"),
    ("store", "results store path (JSONL)"),
    ("alpha", "significance level"),
    ("timestamp", "record timestamp in seconds"),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key=value", idx + 1)));
            };
            let key = key.trim();
            if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", idx + 1)));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                ConfigFile::parse(&text)
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config key {key}: bad value {v:?}: {e}")))
            })
            .transpose()
    }

    /// `flag` if given, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

pub fn keys_help() -> String {
    let mut s = String::from("Config file keys (key=value, '#' comments):\n");
    for (k, d) in KNOWN_KEYS {
        s.push_str(&format!("  {k:<12} {d}\n"));
    }
    s
}
