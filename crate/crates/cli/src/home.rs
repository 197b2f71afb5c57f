//! On-disk state shared between invocations: a DID registry directory and one
//! revocation list per issuer. Key files and credential files live wherever the
//! caller puts them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use didtrust_core::canonical::{read_canonical_file, write_canonical_file};
use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{Credential, DisclosureBundle, RevocationList};
use didtrust_core::identity::{Did, KeyPair, PublicKey, Registry};
use didtrust_core::verification::RevocationSnapshots;
use serde::{Deserialize, Serialize};

/// A signing key, and the DID it controls once one has been created.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyFile {
    pub public_key: PublicKey,
    pub secret_key: String,
    pub did: Option<Did>,
}

impl KeyFile {
    pub fn new(keys: &KeyPair) -> KeyFile {
        KeyFile { public_key: keys.public_key(), secret_key: hex::encode(keys.secret_bytes()), did: None }
    }

    pub fn load(path: &Path) -> Result<KeyFile> {
        read_canonical_file(path).with_context(|| format!("reading key file {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_canonical_file(path, self).with_context(|| format!("writing key file {}", path.display()))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(path, fs::Permissions::from_mode(0o600))?;
        }
        Ok(())
    }

    pub fn keys(&self) -> Result<KeyPair> {
        let bytes = hex::decode(&self.secret_key).context("secret key is not hex")?;
        let keys = KeyPair::from_slice(&bytes)?;
        if keys.public_key() != self.public_key {
            bail!("secret key does not match the recorded public key");
        }
        Ok(keys)
    }

    pub fn did(&self) -> Result<Did> {
        self.did.context("key file has no DID yet; run `did create` first")
    }
}

/// What `vc issue` writes: the credential and the holder's private openings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CredentialFile {
    pub credential: Credential,
    pub bundle: DisclosureBundle,
}

pub struct Home {
    root: PathBuf,
    pub registry: Registry,
}

impl Home {
    pub fn open(root: &Path) -> Result<Home> {
        let registry = Registry::open_dir(root.join("registry"))?;
        fs::create_dir_all(root.join("revocations"))?;
        Ok(Home { root: root.to_owned(), registry })
    }

    fn list_path(&self, issuer: &Did) -> PathBuf {
        self.root.join("revocations").join(format!("{}.json", issuer.id()))
    }

    pub fn revocation_list(&self, issuer: &Did) -> Result<Option<RevocationList>> {
        let path = self.list_path(issuer);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(read_canonical_file(&path)?))
    }

    /// The issuer's list, created empty on first use.
    pub fn ensure_revocation_list(&self, issuer: &Did, keys: &KeyPair) -> Result<RevocationList> {
        if let Some(list) = self.revocation_list(issuer)? {
            return Ok(list);
        }
        let list = RevocationList::new(*issuer, keys, &self.registry)?;
        self.save_revocation_list(&list)?;
        Ok(list)
    }

    pub fn save_revocation_list(&self, list: &RevocationList) -> Result<()> {
        write_canonical_file(&self.list_path(&list.issuer), list)?;
        Ok(())
    }

    /// Every stored list, as fetched now. Lists that fail verification are
    /// left out, so credentials from their issuers fail the revocation check.
    pub fn snapshots(&self, now: Timestamp) -> Result<RevocationSnapshots> {
        let mut out = RevocationSnapshots::default();
        let mut paths: Vec<PathBuf> =
            fs::read_dir(self.root.join("revocations"))?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        paths.sort();
        for path in paths {
            let list: RevocationList = read_canonical_file(&path)?;
            if list.verify(&self.registry) {
                out.insert(list, now);
            }
        }
        Ok(out)
    }
}
