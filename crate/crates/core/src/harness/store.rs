//! Append-only newline-delimited JSON results store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured number with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_id: String,
    /// Seconds since the epoch, supplied by the caller so identical runs
    /// can produce identical records.
    pub timestamp: u64,
    pub split: String,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    /// Seeds, corpus hashes, config hash and other run metadata.
    pub provenance: BTreeMap<String, String>,
}

impl ResultRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub const CONFIG_HASH_KEY: &str = "config_hash";

#[derive(Debug, Clone)]
pub struct ResultStore {
    path: PathBuf,
}

impl ResultStore {
    pub fn open(path: impl Into<PathBuf>) -> Self {
        ResultStore { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// All complete records; a trailing partial line (an interrupted
    /// writer) is ignored. A missing file is an empty store.
    pub fn read_all(&self) -> Result<Vec<ResultRecord>> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut reader = BufReader::new(file);
        let mut records = Vec::new();
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            line_no += 1;
            if !line.ends_with('\n') {
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| Error::record(line_no, e.to_string()))?;
            records.push(record);
        }
        Ok(records)
    }

    /// Appends records in one write. A config id already present with a
    /// different config hash is rejected.
    pub fn append(&self, records: &[ResultRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let existing = self.read_all()?;
        for rec in records {
            let Some(hash) = rec.provenance.get(CONFIG_HASH_KEY) else {
                continue;
            };
            let clash = existing.iter().find(|old| {
                old.config_id == rec.config_id
                    && old.provenance.get(CONFIG_HASH_KEY).is_some_and(|h| h != hash)
            });
            if clash.is_some() {
                return Err(Error::invalid(format!(
                    "config id {:?} already used with a different configuration",
                    rec.config_id
                )));
            }
        }
        let mut buf = String::new();
        for rec in records {
            buf.push_str(&rec.to_json_line()?);
            buf.push('\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(buf.as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

/// Fold scores of the most recent CV run of `config_id`, in fold order.
pub fn fold_scores(records: &[ResultRecord], config_id: &str, metric: &str) -> Result<Vec<f64>> {
    let mut latest: BTreeMap<usize, f64> = BTreeMap::new();
    for rec in records {
        if rec.config_id == config_id && rec.split == "cv" && rec.metric == metric {
            if let Some(fold) = rec.fold {
                latest.insert(fold, rec.value);
            }
        }
    }
    if latest.is_empty() {
        return Err(Error::invalid(format!("no CV fold scores for {config_id:?}")));
    }
    if latest.keys().copied().ne(0..latest.len()) {
        return Err(Error::invalid(format!("CV fold scores for {config_id:?} are incomplete")));
    }
    Ok(latest.into_values().collect())
}

/// Most recent value of `metric` on `split` for `config_id`.
pub fn latest_value(records: &[ResultRecord], config_id: &str, split: &str, metric: &str) -> Option<f64> {
    records
        .iter()
        .rev()
        .find(|r| r.config_id == config_id && r.split == split && r.metric == metric && r.fold.is_none())
        .map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, fold: Option<usize>, value: f64, hash: &str) -> ResultRecord {
        ResultRecord {
            config_id: id.into(),
            timestamp: 0,
            split: "cv".into(),
            metric: "micro_f1".into(),
            value,
            fold,
            provenance: BTreeMap::from([(CONFIG_HASH_KEY.to_string(), hash.to_string())]),
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(dir.path().join("r.jsonl"));
        assert!(store.read_all().unwrap().is_empty());
        let batch: Vec<_> = (0..3).map(|f| rec("a", Some(f), f as f64, "h")).collect();
        store.append(&batch).unwrap();
        store.append(&batch).unwrap();
        let all = store.read_all().unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(&all[..3], &batch[..]);
        assert_eq!(fold_scores(&all, "a", "micro_f1").unwrap(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn conflicting_config_hash_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(dir.path().join("r.jsonl"));
        store.append(&[rec("a", Some(0), 1.0, "h1")]).unwrap();
        assert!(store.append(&[rec("a", Some(0), 1.0, "h2")]).is_err());
        store.append(&[rec("b", Some(0), 1.0, "h2")]).unwrap();
    }

    #[test]
    fn partial_trailing_line_is_invisible() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let store = ResultStore::open(&path);
        store.append(&[rec("a", Some(0), 1.0, "h")]).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"config_id\":\"a\",\"time").unwrap();
        assert_eq!(store.read_all().unwrap().len(), 1);
    }

    #[test]
    fn missing_or_gappy_folds() {
        let recs = vec![rec("a", Some(0), 1.0, "h"), rec("a", Some(2), 1.0, "h")];
        assert!(fold_scores(&recs, "a", "micro_f1").is_err());
        assert!(fold_scores(&recs, "zzz", "micro_f1").is_err());
    }
}
