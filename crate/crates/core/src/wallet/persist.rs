//! Wallet files. The public file holds the owner, credential metadata, and
//! personas. The secret file holds the signing key and every disclosure bundle
//! and is written with mode 0600 on Unix.
//!
//! Both are canonical JSON:
//!
//! ```text
//! public: {"credentials":[Credential..],"owner":"did:sim:..","personas":[Identity..]}
//! secret: {"bundles":[DisclosureBundle..],"secret_key":"<64 hex>"}
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Identity, StoredCredential, Wallet, WalletError};
use crate::canonical::{canonical_bytes, read_canonical_file};
use crate::credentials::{Credential, DisclosureBundle};
use crate::digest::decode_lower_hex;
use crate::identity::{Did, KeyPair};

#[derive(Serialize, Deserialize)]
struct PublicPart {
    owner: Did,
    credentials: Vec<Credential>,
    personas: Vec<Identity>,
}

#[derive(Serialize, Deserialize)]
struct SecretPart {
    secret_key: String,
    bundles: Vec<DisclosureBundle>,
}

fn storage<E: std::fmt::Display>(e: E) -> WalletError {
    WalletError::Storage(e.to_string())
}

pub fn save_wallet(wallet: &Wallet, public_path: &Path, secret_path: &Path) -> Result<(), WalletError> {
    let public = PublicPart {
        owner: wallet.owner,
        credentials: wallet.credentials.values().map(|s| s.credential.clone()).collect(),
        personas: wallet.personas.values().cloned().collect(),
    };
    fs::write(public_path, canonical_bytes(&public)).map_err(storage)?;

    let secret = SecretPart {
        secret_key: hex::encode(wallet.keys.secret_bytes()),
        bundles: wallet.credentials.values().map(|s| s.bundle.clone()).collect(),
    };
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(secret_path).map_err(storage)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(fs::Permissions::from_mode(0o600)).map_err(storage)?;
    }
    file.write_all(&canonical_bytes(&secret)).map_err(storage)?;
    Ok(())
}

pub fn load_wallet(public_path: &Path, secret_path: &Path) -> Result<Wallet, WalletError> {
    let public: PublicPart = read_canonical_file(public_path).map_err(storage)?;
    let secret: SecretPart = read_canonical_file(secret_path).map_err(storage)?;
    let seed: [u8; 32] = decode_lower_hex(&secret.secret_key).map_err(storage)?;
    let mut wallet = Wallet::new(public.owner, KeyPair::from_seed(&seed));
    let mut bundles: std::collections::BTreeMap<String, DisclosureBundle> =
        secret.bundles.into_iter().map(|b| (b.credential_id.clone(), b)).collect();
    for credential in public.credentials {
        let bundle = bundles
            .remove(&credential.id)
            .ok_or_else(|| WalletError::Storage(format!("no bundle for {}", credential.id)))?;
        if !credential.matches_bundle(&bundle) {
            return Err(WalletError::InvalidCredential(credential.id));
        }
        wallet.credentials.insert(credential.id.clone(), StoredCredential { credential, bundle });
    }
    for persona in public.personas {
        wallet.personas.insert(persona.label.clone(), persona);
    }
    Ok(wallet)
}
