//! File-backed document store.
//!
//! Layout: `<root>/<collection>/<id>/<version>.json`, one file per version.
//! Every write goes to a fresh `.tmp-*` file in the target directory, is
//! fsynced, then renamed over the target, so a crash at any point leaves the
//! previous full version or the new full version in place. Temp files left
//! behind by a crash are removed when the store is opened.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use thiserror::Error;

const TMP_PREFIX: &str = ".tmp-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    Fragments,
    Catalogs,
    Sessions,
    Rulepacks,
}

impl Collection {
    pub const ALL: [Collection; 4] = [
        Collection::Fragments,
        Collection::Catalogs,
        Collection::Sessions,
        Collection::Rulepacks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Collection::Fragments => "fragments",
            Collection::Catalogs => "catalogs",
            Collection::Sessions => "sessions",
            Collection::Rulepacks => "rulepacks",
        }
    }
}

impl fmt::Display for Collection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredDocument {
    pub collection: Collection,
    pub id: String,
    pub version: u32,
    pub body: Vec<u8>,
    /// RFC 3339 modification time of the file.
    pub updated_at: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{collection}/{id}{} not found", .version.map(|v| format!("@{v}")).unwrap_or_default())]
    NotFound {
        collection: Collection,
        id: String,
        version: Option<u32>,
    },
    #[error("{collection}/{id}@{version} already exists with different content")]
    VersionConflict {
        collection: Collection,
        id: String,
        version: u32,
    },
    #[error("invalid document id `{0}`")]
    InvalidId(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Points in an atomic write where a [`WriteHook`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteStage {
    TempCreated,
    HalfWritten,
    Synced,
    Renamed,
}

impl WriteStage {
    pub const ALL: [WriteStage; 4] = [
        WriteStage::TempCreated,
        WriteStage::HalfWritten,
        WriteStage::Synced,
        WriteStage::Renamed,
    ];
}

/// Fault injection on the write path. Returning an error abandons the write
/// at that stage without cleanup, as a crash would.
pub trait WriteHook: Send + Sync {
    fn at(&self, stage: WriteStage, target: &Path) -> io::Result<()>;
}

pub struct DocumentStore {
    root: PathBuf,
    hook: Option<Arc<dyn WriteHook>>,
}

impl fmt::Debug for DocumentStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DocumentStore")
            .field("root", &self.root)
            .field("hook", &self.hook.is_some())
            .finish()
    }
}

/// Ids become directory names, so only a conservative alphabet is allowed.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

fn version_file(version: u32) -> String {
    format!("{version:010}.json")
}

impl DocumentStore {
    /// Opens (creating if needed) a store rooted at `root` and removes temp
    /// files left by interrupted writes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for collection in Collection::ALL {
            let dir = root.join(collection.as_str());
            fs::create_dir_all(&dir)?;
            for doc in fs::read_dir(&dir)? {
                let doc = doc?;
                if !doc.file_type()?.is_dir() {
                    continue;
                }
                for file in fs::read_dir(doc.path())? {
                    let file = file?;
                    if file.file_name().to_string_lossy().starts_with(TMP_PREFIX) {
                        fs::remove_file(file.path())?;
                    }
                }
            }
        }
        Ok(DocumentStore { root, hook: None })
    }

    pub fn with_hook(mut self, hook: Arc<dyn WriteHook>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn doc_dir(&self, collection: Collection, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(collection.as_str()).join(id))
    }

    fn hook(&self, stage: WriteStage, target: &Path) -> io::Result<()> {
        match &self.hook {
            Some(hook) => hook.at(stage, target),
            None => Ok(()),
        }
    }

    fn write_atomic(&self, target: &Path, body: &[u8]) -> io::Result<()> {
        let dir = target.parent().expect("document paths have a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{TMP_PREFIX}{}", ulid::Ulid::new()));
        let mut file = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
        self.hook(WriteStage::TempCreated, target)?;
        let half = body.len() / 2;
        file.write_all(&body[..half])?;
        self.hook(WriteStage::HalfWritten, target)?;
        file.write_all(&body[half..])?;
        file.sync_all()?;
        drop(file);
        self.hook(WriteStage::Synced, target)?;
        fs::rename(&tmp, target)?;
        // Persist the rename itself. Directories cannot be opened for sync on
        // every platform, so failure here is not an error.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        self.hook(WriteStage::Renamed, target)?;
        Ok(())
    }

    /// Stores an immutable version. Re-publishing identical bytes is a no-op;
    /// different bytes under an existing version are a conflict.
    pub fn publish(
        &self,
        collection: Collection,
        id: &str,
        version: u32,
        body: &[u8],
    ) -> Result<StoredDocument, StoreError> {
        let target = self.doc_dir(collection, id)?.join(version_file(version));
        match fs::read(&target) {
            Ok(existing) if existing == body => return self.fetch(collection, id, Some(version)),
            Ok(_) => {
                return Err(StoreError::VersionConflict {
                    collection,
                    id: id.to_string(),
                    version,
                })
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        self.write_atomic(&target, body)?;
        self.fetch(collection, id, Some(version))
    }

    /// Overwrites the single version of a mutable document.
    pub fn replace(&self, collection: Collection, id: &str, body: &[u8]) -> Result<(), StoreError> {
        let target = self.doc_dir(collection, id)?.join(version_file(1));
        self.write_atomic(&target, body)?;
        Ok(())
    }

    /// Versions present for `id`, ascending.
    pub fn versions(&self, collection: Collection, id: &str) -> Result<Vec<u32>, StoreError> {
        let dir = self.doc_dir(collection, id)?;
        let entries = match fs::read_dir(&dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut versions = Vec::new();
        for entry in entries {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(v) = name.strip_suffix(".json").and_then(|s| s.parse().ok()) {
                versions.push(v);
            }
        }
        versions.sort_unstable();
        Ok(versions)
    }

    /// Fetches a version, or the latest one when `version` is `None`.
    pub fn fetch(
        &self,
        collection: Collection,
        id: &str,
        version: Option<u32>,
    ) -> Result<StoredDocument, StoreError> {
        let not_found = || StoreError::NotFound {
            collection,
            id: id.to_string(),
            version,
        };
        let version = match version {
            Some(v) => v,
            None => *self.versions(collection, id)?.last().ok_or_else(not_found)?,
        };
        let path = self.doc_dir(collection, id)?.join(version_file(version));
        let body = match fs::read(&path) {
            Ok(body) => body,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(e.into()),
        };
        let modified: DateTime<Utc> = fs::metadata(&path)?.modified()?.into();
        Ok(StoredDocument {
            collection,
            id: id.to_string(),
            version,
            body,
            updated_at: modified.to_rfc3339_opts(SecondsFormat::Millis, true),
        })
    }

    /// Every document id with its versions, in id order.
    pub fn list(&self, collection: Collection) -> Result<BTreeMap<String, Vec<u32>>, StoreError> {
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(self.root.join(collection.as_str()))? {
            let entry = entry?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if !entry.file_type()?.is_dir() || !valid_id(&id) {
                continue;
            }
            let versions = self.versions(collection, &id)?;
            if !versions.is_empty() {
                out.insert(id, versions);
            }
        }
        Ok(out)
    }

    /// Latest version of every document.
    pub fn latest_all(&self, collection: Collection) -> Result<Vec<StoredDocument>, StoreError> {
        self.list(collection)?
            .into_iter()
            .map(|(id, versions)| self.fetch(collection, &id, versions.last().copied()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_then_fetch_returns_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        store.publish(Collection::Fragments, "f", 1, b"one\n").unwrap();
        store.publish(Collection::Fragments, "f", 2, b"two\n").unwrap();
        assert_eq!(store.fetch(Collection::Fragments, "f", Some(1)).unwrap().body, b"one\n");
        let latest = store.fetch(Collection::Fragments, "f", None).unwrap();
        assert_eq!((latest.version, latest.body.as_slice()), (2, &b"two\n"[..]));
        assert_eq!(store.list(Collection::Fragments).unwrap()["f"], [1, 2]);
    }

    #[test]
    fn republish_is_idempotent_but_changes_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        store.publish(Collection::Catalogs, "c", 1, b"x").unwrap();
        store.publish(Collection::Catalogs, "c", 1, b"x").unwrap();
        assert!(matches!(
            store.publish(Collection::Catalogs, "c", 1, b"y"),
            Err(StoreError::VersionConflict { version: 1, .. })
        ));
    }

    #[test]
    fn unknown_and_invalid_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        assert!(matches!(
            store.fetch(Collection::Sessions, "nope", None),
            Err(StoreError::NotFound { .. })
        ));
        for bad in ["", "..", "../etc", "a/b", ".hidden", "sp ace"] {
            assert!(matches!(
                store.fetch(Collection::Sessions, bad, None),
                Err(StoreError::InvalidId(_))
            ), "{bad}");
        }
    }

    #[test]
    fn replace_overwrites_and_open_sweeps_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let store = DocumentStore::open(dir.path()).unwrap();
        store.replace(Collection::Sessions, "s", b"old").unwrap();
        store.replace(Collection::Sessions, "s", b"new").unwrap();
        assert_eq!(store.fetch(Collection::Sessions, "s", None).unwrap().body, b"new");
        let stale = dir.path().join("sessions/s/.tmp-stale");
        fs::write(&stale, b"partial").unwrap();
        DocumentStore::open(dir.path()).unwrap();
        assert!(!stale.exists());
    }
}
