use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use super::did::Did;
use super::document::DidDocument;
use super::IdentityError;
use crate::canonical::{read_canonical_file, write_canonical_file, CanonicalError};

/// Anything that can look up the latest validated document for a DID.
pub trait Resolver {
    fn resolve(&self, did: &Did) -> Result<DidDocument, IdentityError>;
}

enum Store {
    Memory(BTreeMap<Did, DidDocument>),
    /// One `<hex id>.json` file per DID. The directory is the source of truth.
    Directory(PathBuf),
}

impl Store {
    fn get(&self, did: &Did) -> Result<Option<DidDocument>, IdentityError> {
        match self {
            Store::Memory(map) => Ok(map.get(did).cloned()),
            Store::Directory(dir) => match read_canonical_file(&doc_path(dir, did)) {
                Ok(doc) => Ok(Some(doc)),
                Err(CanonicalError::Io(e)) if e.kind() == ErrorKind::NotFound => Ok(None),
                Err(e) => Err(IdentityError::Storage(e.to_string())),
            },
        }
    }

    fn put(&mut self, doc: DidDocument) -> Result<(), IdentityError> {
        match self {
            Store::Memory(map) => {
                map.insert(doc.did, doc);
                Ok(())
            }
            Store::Directory(dir) => write_canonical_file(&doc_path(dir, &doc.did), &doc)
                .map_err(|e| IdentityError::Storage(e.to_string())),
        }
    }

    fn all(&self) -> Result<BTreeMap<Did, DidDocument>, IdentityError> {
        match self {
            Store::Memory(map) => Ok(map.clone()),
            Store::Directory(dir) => {
                let mut out = BTreeMap::new();
                let entries = fs::read_dir(dir).map_err(|e| IdentityError::Storage(e.to_string()))?;
                for entry in entries {
                    let path = entry.map_err(|e| IdentityError::Storage(e.to_string()))?.path();
                    if path.extension().is_some_and(|x| x == "json") {
                        let doc: DidDocument =
                            read_canonical_file(&path).map_err(|e| IdentityError::Storage(e.to_string()))?;
                        out.insert(doc.did, doc);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn doc_path(dir: &Path, did: &Did) -> PathBuf {
    dir.join(format!("{}.json", did.id()))
}

/// DID registry: concurrent reads, serialized writes, append-only per DID.
pub struct Registry {
    store: RwLock<Store>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::in_memory()
    }
}

impl Registry {
    pub fn in_memory() -> Registry {
        Registry { store: RwLock::new(Store::Memory(BTreeMap::new())) }
    }

    /// A registry backed by `dir`, created if missing.
    pub fn open_dir(dir: impl Into<PathBuf>) -> Result<Registry, IdentityError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| IdentityError::Storage(e.to_string()))?;
        Ok(Registry { store: RwLock::new(Store::Directory(dir)) })
    }

    /// Registers a new document or a later version of an existing one.
    ///
    /// The incoming chain must validate and must extend the stored chain.
    /// Re-registering an identical document is a no-op.
    pub fn register(&self, doc: DidDocument) -> Result<(), IdentityError> {
        let mut store = self.store.write().expect("registry lock poisoned");
        let lookup = |did: &Did| store.get(did).ok().flatten();
        doc.validate(&lookup)?;
        if let Some(existing) = store.get(&doc.did)? {
            if doc.version < existing.version {
                return Err(IdentityError::VersionRegression {
                    did: doc.did,
                    stored: existing.version,
                    offered: doc.version,
                });
            }
            if !doc.event_chain.starts_with(&existing.event_chain) {
                return Err(IdentityError::ChainConflict(doc.did));
            }
            if doc == existing {
                return Ok(());
            }
        }
        store.put(doc)
    }

    /// An immutable copy of every registered document.
    pub fn snapshot(&self) -> Result<RegistrySnapshot, IdentityError> {
        let store = self.store.read().expect("registry lock poisoned");
        Ok(RegistrySnapshot { docs: store.all()? })
    }

    pub fn dids(&self) -> Result<Vec<Did>, IdentityError> {
        Ok(self.snapshot()?.docs.into_keys().collect())
    }
}

impl Resolver for Registry {
    fn resolve(&self, did: &Did) -> Result<DidDocument, IdentityError> {
        let store = self.store.read().expect("registry lock poisoned");
        let doc = store.get(did)?.ok_or(IdentityError::NotFound(*did))?;
        let lookup = |d: &Did| store.get(d).ok().flatten();
        doc.validate(&lookup)?;
        Ok(doc)
    }
}

/// A point-in-time copy of a registry, for offline verification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegistrySnapshot {
    docs: BTreeMap<Did, DidDocument>,
}

impl RegistrySnapshot {
    pub fn documents(&self) -> impl Iterator<Item = &DidDocument> {
        self.docs.values()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl Resolver for RegistrySnapshot {
    fn resolve(&self, did: &Did) -> Result<DidDocument, IdentityError> {
        let doc = self.docs.get(did).ok_or(IdentityError::NotFound(*did))?;
        let lookup = |d: &Did| self.docs.get(d).cloned();
        doc.validate(&lookup)?;
        Ok(doc.clone())
    }
}
