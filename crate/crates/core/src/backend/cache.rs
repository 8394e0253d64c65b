//! Content-addressed response cache: one JSON file per request fingerprint.
//!
//! Entries are written to a temporary file and hard-linked into place, so a
//! reader never sees a partial entry and the first completed write for a
//! fingerprint wins. Later writers for the same fingerprint are discarded.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{canonical_temperature, BackendError, Fingerprint, GenerationRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: Fingerprint,
    pub model: String,
    pub temperature: String,
    pub sample_index: u64,
    pub prompt: String,
    pub response_text: String,
    pub created_at: DateTime<Utc>,
    pub backend_id: String,
    #[serde(default)]
    pub tag: Option<String>,
}

impl CacheEntry {
    pub fn new(
        fp: &Fingerprint,
        request: &GenerationRequest,
        text: &str,
        backend_id: &str,
    ) -> Self {
        Self {
            fingerprint: *fp,
            model: request.model.clone(),
            temperature: canonical_temperature(request.temperature),
            sample_index: request.sample_index,
            prompt: request.prompt.clone(),
            response_text: text.to_string(),
            created_at: Utc::now(),
            backend_id: backend_id.to_string(),
            tag: request.tag.clone(),
        }
    }

    /// Tag filter: exact match, or the tag starts with `filter/`.
    fn matches_tag(&self, filter: &str) -> bool {
        self.tag.as_deref().is_some_and(|t| {
            t == filter || t.strip_prefix(filter).is_some_and(|r| r.starts_with('/'))
        })
    }
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn io_err(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Cache(format!("{}: {e}", path.display()))
}

impl ResponseCache {
    /// Open (creating if needed) a cache rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir })
    }

    /// Refer to an existing cache directory without creating it.
    pub fn existing(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(BackendError::Cache(format!(
                "{}: cache directory does not exist",
                dir.display()
            )));
        }
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, fp: &Fingerprint) -> PathBuf {
        let hex = fp.to_hex();
        self.dir.join(&hex[..2]).join(format!("{hex}.json"))
    }

    pub fn get(&self, fp: &Fingerprint) -> Result<Option<CacheEntry>, BackendError> {
        let path = self.entry_path(fp);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if entry.fingerprint == *fp => Ok(Some(entry)),
            Ok(_) | Err(_) => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                Ok(None)
            }
        }
    }

    /// Store an entry. Returns `false` when an entry for the fingerprint
    /// already existed and this one was discarded.
    pub fn put(&self, entry: &CacheEntry) -> Result<bool, BackendError> {
        let path = self.entry_path(&entry.fingerprint);
        let shard = path.parent().expect("entry path has a shard directory");
        std::fs::create_dir_all(shard).map_err(|e| io_err(shard, e))?;
        let tmp = shard.join(format!(
            ".tmp-{}-{}-{}",
            entry.fingerprint.to_hex(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let bytes =
            serde_json::to_vec_pretty(entry).map_err(|e| BackendError::Cache(e.to_string()))?;
        std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        let linked = std::fs::hard_link(&tmp, &path);
        let _ = std::fs::remove_file(&tmp);
        match linked {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    fn entry_files(&self) -> Result<Vec<PathBuf>, BackendError> {
        let mut files = Vec::new();
        for shard in std::fs::read_dir(&self.dir).map_err(|e| io_err(&self.dir, e))? {
            let shard = shard.map_err(|e| io_err(&self.dir, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for f in std::fs::read_dir(&shard).map_err(|e| io_err(&shard, e))? {
                let f = f.map_err(|e| io_err(&shard, e))?.path();
                if f.extension().is_some_and(|x| x == "json") {
                    files.push(f);
                }
            }
        }
        files.sort();
        Ok(files)
    }

    pub fn entries(&self) -> Result<Vec<CacheEntry>, BackendError> {
        let mut out = Vec::new();
        for f in self.entry_files()? {
            let bytes = std::fs::read(&f).map_err(|e| io_err(&f, e))?;
            if let Ok(entry) = serde_json::from_slice(&bytes) {
                out.push(entry);
            }
        }
        Ok(out)
    }

    /// Remove entries created more than `older_than` before `now` and whose
    /// tag matches `tag_filter` (both filters optional). Returns the count.
    pub fn purge_at(
        &self,
        older_than: Option<Duration>,
        tag_filter: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<usize, BackendError> {
        let cutoff = match older_than {
            Some(d) => Some(
                now - chrono::Duration::from_std(d)
                    .map_err(|e| BackendError::Cache(format!("age filter out of range: {e}")))?,
            ),
            None => None,
        };
        let mut removed = 0;
        for f in self.entry_files()? {
            let bytes = std::fs::read(&f).map_err(|e| io_err(&f, e))?;
            let keep = match serde_json::from_slice::<CacheEntry>(&bytes) {
                Ok(entry) => {
                    cutoff.is_some_and(|c| entry.created_at > c)
                        || tag_filter.is_some_and(|t| !entry.matches_tag(t))
                }
                // unreadable entries only go when no filter could exclude them
                Err(_) => cutoff.is_some() || tag_filter.is_some(),
            };
            if !keep {
                std::fs::remove_file(&f).map_err(|e| io_err(&f, e))?;
                removed += 1;
            }
        }
        Ok(removed)
    }

    pub fn purge(
        &self,
        older_than: Option<Duration>,
        tag_filter: Option<&str>,
    ) -> Result<usize, BackendError> {
        self.purge_at(older_than, tag_filter, Utc::now())
    }
}
