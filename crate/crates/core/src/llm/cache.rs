use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ChatRequest;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    request: ChatRequest,
    response: String,
}

/// Request-level response cache. Always memoises in memory; with a directory
/// it also persists one JSON file per entry, named by the key digest.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(Self {
            dir,
            memory: RwLock::default(),
        })
    }

    pub fn key(request: &ChatRequest) -> String {
        let canonical = serde_json::to_vec(request).expect("chat request serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(hit) = self.memory.read().unwrap().get(key) {
            return Some(hit.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let bytes = fs::read(&path).ok()?;
        let entry: CacheEntry = match serde_json::from_slice(&bytes) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                return None;
            }
        };
        self.memory.write().unwrap().insert(key.to_string(), entry.response.clone());
        Some(entry.response)
    }

    pub fn put(&self, key: &str, request: &ChatRequest, response: &str) -> Result<()> {
        self.memory.write().unwrap().insert(key.to_string(), response.to_string());
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let entry = CacheEntry {
            key: key.to_string(),
            request: request.clone(),
            response: response.to_string(),
        };
        let target = dir.join(format!("{key}.json"));
        // write-then-rename keeps each entry atomic for concurrent readers
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        serde_json::to_writer_pretty(&mut tmp, &entry)?;
        tmp.flush().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.memory.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
