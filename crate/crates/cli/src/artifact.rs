//! Artifact files and the artifact-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub seed: u64,
    pub tool_version: String,
    pub config: BTreeMap<String, Value>,
}

impl RunInfo {
    pub fn new(command: &str, seed: u64, config: &BTreeMap<String, Value>) -> Self {
        Self {
            command: command.to_string(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
        }
    }
}

/// A payload with its run record. The payload's fields sit at top level, so
/// readers that only know the payload type can still load the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub run: RunInfo,
    #[serde(flatten)]
    pub body: T,
}

pub fn write<T: Serialize>(path: &Path, run: &RunInfo, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct View<'a, T> {
        run: &'a RunInfo,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut text = serde_json::to_string_pretty(&View { run, body })?;
    text.push('\n');
    // write then rename so readers never see a half-written file
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Artifact<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Exclusive claim on an artifact directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub const FILE_NAME: &'static str = ".re2llm.lock";

    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(Self::FILE_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                bail!(
                    "artifact directory {} is in use by process {} (delete {} if that run is gone)",
                    dir.display(),
                    holder.trim(),
                    path.display()
                )
            }
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
