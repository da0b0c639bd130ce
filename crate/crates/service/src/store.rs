//! Run store: one JSON file per run in a directory.
//!
//! A file is only ever replaced as a whole through a rename, so a crash leaves
//! either the previous or the new version of a run on disk.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Done,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub created_at: String,
    pub kind: String,
    pub request: Value,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// Listing entry for `GET /v1/runs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub created_at: String,
    pub kind: String,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
    locks: Arc<Mutex<HashMap<String, Arc<Mutex<()>>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RunStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(RunStore { dir, locks: Arc::default() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("store lock").entry(id.to_string()).or_default().clone()
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Creates a pending run with a fresh id.
    pub fn create(&self, kind: &str, request: Value) -> io::Result<RunRecord> {
        let record = RunRecord {
            run_id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            kind: kind.into(),
            request,
            status: RunStatus::Pending,
            result: None,
            error: None,
        };
        self.save(&record)?;
        Ok(record)
    }

    pub fn save(&self, record: &RunRecord) -> io::Result<()> {
        if !valid_id(&record.run_id) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "invalid run id"));
        }
        let lock = self.lock_for(&record.run_id);
        let _guard = lock.lock().expect("run lock");
        let tmp = self.dir.join(format!(".{}.tmp", record.run_id));
        fs::write(&tmp, serde_json::to_vec_pretty(record)?)?;
        fs::rename(tmp, self.path(&record.run_id))
    }

    pub fn finish(&self, mut record: RunRecord, outcome: Result<Value, Value>) -> io::Result<RunRecord> {
        match outcome {
            Ok(v) => {
                record.status = RunStatus::Done;
                record.result = Some(v);
            }
            Err(e) => {
                record.status = RunStatus::Error;
                record.error = Some(e);
            }
        }
        self.save(&record)?;
        Ok(record)
    }

    pub fn get(&self, id: &str) -> io::Result<Option<RunRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        match fs::read(self.path(id)) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// All runs, oldest first.
    pub fn list(&self) -> io::Result<Vec<RunSummary>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let record: RunRecord = match fs::read(&path).ok().and_then(|b| serde_json::from_slice(&b).ok()) {
                Some(r) => r,
                None => continue,
            };
            out.push(RunSummary {
                run_id: record.run_id,
                created_at: record.created_at,
                kind: record.kind,
                status: record.status,
            });
        }
        out.sort_by(|a, b| (&a.created_at, &a.run_id).cmp(&(&b.created_at, &b.run_id)));
        Ok(out)
    }
}
