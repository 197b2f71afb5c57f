use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CredentialError;
use crate::identity::{signing_input, Did, KeyPair, Resolver, Signature};

const REVOCATION_PURPOSE: &str = "didtrust/revocation-list";

/// An issuer's signed, monotone list of revoked credential ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationList {
    pub issuer: Did,
    pub revoked: BTreeSet<String>,
    /// Advances once per state change.
    pub counter: u64,
    pub issuer_key_version: u64,
    pub signature: Signature,
}

#[derive(Serialize)]
struct Unsigned<'a> {
    issuer: &'a Did,
    revoked: &'a BTreeSet<String>,
    counter: u64,
    issuer_key_version: u64,
}

impl RevocationList {
    /// An empty list signed by the issuer's active key.
    pub fn new(issuer: Did, issuer_keys: &KeyPair, resolver: &dyn Resolver) -> Result<RevocationList, CredentialError> {
        let version = active_version(&issuer, issuer_keys, resolver)?;
        let mut list = RevocationList {
            issuer,
            revoked: BTreeSet::new(),
            counter: 0,
            issuer_key_version: version,
            signature: Signature([0; 64]),
        };
        list.signature = issuer_keys.sign(&list.signing_payload());
        Ok(list)
    }

    fn signing_payload(&self) -> Vec<u8> {
        signing_input(
            REVOCATION_PURPOSE,
            &Unsigned {
                issuer: &self.issuer,
                revoked: &self.revoked,
                counter: self.counter,
                issuer_key_version: self.issuer_key_version,
            },
        )
    }

    /// Checks the signature under the issuer key at the recorded version.
    pub fn verify(&self, resolver: &dyn Resolver) -> bool {
        resolver
            .resolve(&self.issuer)
            .ok()
            .and_then(|doc| doc.key_at_version(self.issuer_key_version))
            .is_some_and(|key| key.verify(&self.signing_payload(), &self.signature))
    }
}

fn active_version(issuer: &Did, keys: &KeyPair, resolver: &dyn Resolver) -> Result<u64, CredentialError> {
    let doc = resolver.resolve(issuer).map_err(|_| CredentialError::UnknownIssuer(*issuer))?;
    if doc.active_key != Some(keys.public_key()) {
        return Err(CredentialError::Unauthorized(format!("not the active key of {issuer}")));
    }
    Ok(doc.version)
}

/// Adds `credential_id` to the list. Revoking an already revoked id returns the
/// list unchanged.
pub fn revoke(
    issuer_keys: &KeyPair,
    credential_id: &str,
    list: &RevocationList,
    resolver: &dyn Resolver,
) -> Result<RevocationList, CredentialError> {
    let version = active_version(&list.issuer, issuer_keys, resolver)?;
    if list.revoked.contains(credential_id) {
        return Ok(list.clone());
    }
    let mut next = list.clone();
    next.revoked.insert(credential_id.to_owned());
    next.counter += 1;
    next.issuer_key_version = version;
    next.signature = issuer_keys.sign(&next.signing_payload());
    Ok(next)
}

pub fn is_revoked(credential_id: &str, list: &RevocationList) -> bool {
    list.revoked.contains(credential_id)
}
