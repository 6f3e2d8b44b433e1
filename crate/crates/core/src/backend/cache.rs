//! On-disk response cache keyed by request digest.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{request_key, BackendError, ChatBackend, ChatRequest, Completion, Usage};

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    text: String,
    usage: Usage,
}

/// Append-only JSON-lines cache. Writes are serialized through one lock.
pub struct ResponseCache {
    path: PathBuf,
    entries: Mutex<(HashMap<String, (String, Usage)>, File)>,
}

impl ResponseCache {
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let io = |source| BackendError::Io { path: path.to_path_buf(), source };
        let mut map = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(path).map_err(io)?;
            // A torn final line from a crash is skipped; the entry is re-fetched.
            for line in text.lines() {
                if let Ok(l) = serde_json::from_str::<CacheLine>(line) {
                    map.insert(l.key, (l.text, l.usage));
                }
            }
        } else if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(ResponseCache { path: path.to_path_buf(), entries: Mutex::new((map, file)) })
    }

    pub fn get(&self, key: &str) -> Option<(String, Usage)> {
        self.entries.lock().unwrap().0.get(key).cloned()
    }

    pub fn put(&self, key: &str, text: &str, usage: Usage) -> Result<(), BackendError> {
        let mut guard = self.entries.lock().unwrap();
        if guard.0.contains_key(key) {
            return Ok(());
        }
        let line = serde_json::to_string(&CacheLine { key: key.into(), text: text.into(), usage })
            .expect("cache line serializes");
        writeln!(guard.1, "{line}")
            .and_then(|_| guard.1.flush())
            .map_err(|source| BackendError::Io { path: self.path.clone(), source })?;
        guard.0.insert(key.to_string(), (text.to_string(), usage));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: ChatBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        CachedBackend { inner, cache }
    }
}

impl<B: ChatBackend> ChatBackend for CachedBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let key = request_key(request);
        if let Some((text, usage)) = self.cache.get(&key) {
            return Ok(Completion { text, usage, latency_ms: 0 });
        }
        let c = self.inner.complete(request)?;
        self.cache.put(&key, &c.text, c.usage)?;
        Ok(c)
    }
}
