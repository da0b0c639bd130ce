//! Append-only response cache.
//!
//! One JSON record per line: `{key, kind, request, response, checksum}`. The
//! checksum covers key and response; any line that fails to parse or verify
//! makes the whole file corrupt.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CasaError, Result};
use crate::types::canonical_json;

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    key: String,
    kind: String,
    request: Value,
    response: Value,
    checksum: String,
}

fn checksum(key: &str, response: &Value) -> String {
    let digest = Sha256::digest(format!("{key}\n{}", canonical_json(response)).as_bytes());
    hex::encode(digest)[..16].to_string()
}

/// Hash of a request's identifying fields.
pub fn cache_key(fields: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(fields).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub path: PathBuf,
    pub entries: usize,
    pub bytes: u64,
    pub by_kind: std::collections::BTreeMap<String, usize>,
}

#[derive(Debug)]
struct Inner {
    index: HashMap<String, (String, Value)>,
    file: File,
}

#[derive(Debug)]
pub struct ResponseCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ResponseCache {
    /// Opens (creating if needed) the cache file and loads its index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut index = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = serde_json::from_str(&line)
                    .map_err(|e| CasaError::CacheCorrupt { line: i + 1, reason: e.to_string() })?;
                if checksum(&record.key, &record.response) != record.checksum {
                    return Err(CasaError::CacheCorrupt { line: i + 1, reason: "checksum mismatch".into() });
                }
                index.insert(record.key, (record.kind, record.response));
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ResponseCache { path, inner: Mutex::new(Inner { index, file }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        self.inner.lock().expect("cache lock").index.get(key).map(|(_, v)| v.clone())
    }

    /// Appends a record. A key already present is left untouched.
    pub fn put(&self, key: &str, kind: &str, request: Value, response: Value) -> Result<()> {
        let mut inner = self.inner.lock().expect("cache lock");
        if inner.index.contains_key(key) {
            return Ok(());
        }
        let record = Record {
            key: key.to_string(),
            kind: kind.to_string(),
            request,
            checksum: checksum(key, &response),
            response: response.clone(),
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        inner.file.write_all(line.as_bytes())?;
        inner.file.flush()?;
        inner.index.insert(key.to_string(), (kind.to_string(), response));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> Result<CacheStats> {
        let inner = self.inner.lock().expect("cache lock");
        let mut by_kind = std::collections::BTreeMap::new();
        for (kind, _) in inner.index.values() {
            *by_kind.entry(kind.clone()).or_insert(0) += 1;
        }
        Ok(CacheStats {
            path: self.path.clone(),
            entries: inner.index.len(),
            bytes: std::fs::metadata(&self.path)?.len(),
            by_kind,
        })
    }

    /// Drops every entry and truncates the file.
    pub fn clear(&self) -> Result<()> {
        let mut inner = self.inner.lock().expect("cache lock");
        inner.file = OpenOptions::new().create(true).write(true).truncate(true).open(&self.path)?;
        inner.file = OpenOptions::new().append(true).open(&self.path)?;
        inner.index.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cache = ResponseCache::open(&path).unwrap();
        cache.put("k1", "generate", json!({"p": 1}), json!({"text": "hello"})).unwrap();
        cache.put("k1", "generate", json!({"p": 1}), json!({"text": "other"})).unwrap();
        drop(cache);
        let cache = ResponseCache::open(&path).unwrap();
        assert_eq!(cache.get("k1"), Some(json!({"text": "hello"})));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn tampered_record_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cache = ResponseCache::open(&path).unwrap();
        cache.put("k1", "nli", json!({}), json!({"label": "entailment"})).unwrap();
        cache.put("k2", "nli", json!({}), json!({"label": "neutral"})).unwrap();
        drop(cache);
        let text = std::fs::read_to_string(&path).unwrap().replace("neutral", "contradiction");
        std::fs::write(&path, text).unwrap();
        match ResponseCache::open(&path) {
            Err(CasaError::CacheCorrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corruption, got {other:?}"),
        }
        std::fs::write(&path, "{not json\n").unwrap();
        assert!(matches!(ResponseCache::open(&path), Err(CasaError::CacheCorrupt { line: 1, .. })));
    }

    #[test]
    fn clear_empties_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/c.jsonl");
        let cache = ResponseCache::open(&path).unwrap();
        cache.put("a", "generate", json!({}), json!(1)).unwrap();
        assert_eq!(cache.stats().unwrap().by_kind["generate"], 1);
        cache.clear().unwrap();
        assert!(cache.is_empty());
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
        cache.put("b", "generate", json!({}), json!(2)).unwrap();
        drop(cache);
        assert_eq!(ResponseCache::open(&path).unwrap().len(), 1);
    }

    #[test]
    fn key_is_order_independent() {
        assert_eq!(cache_key(&json!({"a": 1, "b": 2})), cache_key(&json!({"b": 2, "a": 1})));
        assert_ne!(cache_key(&json!({"a": 1})), cache_key(&json!({"a": 2})));
    }
}
