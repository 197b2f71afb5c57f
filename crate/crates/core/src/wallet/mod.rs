//! Holder-side credential storage, presentation building, and personas.
//!
//! A persona ("identity") is a named list of presentation templates, each
//! naming a stored credential and the claims to open from it.

mod persist;
mod presentation;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use persist::{load_wallet, save_wallet};
pub use presentation::{
    ClaimRequirement, DisclosedClaim, Presentation, PresentationRequest, PresentedCredential, RequestItem,
    WithheldCommitment,
};

use crate::clock::Timestamp;
use crate::credentials::{Credential, DisclosureBundle};
use crate::digest::Nonce;
use crate::identity::{Did, KeyPair, Resolver};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalletError {
    #[error("credential subject {subject} is not the wallet owner or an owned asset")]
    SubjectMismatch { subject: Did },
    #[error("invalid credential: {0}")]
    InvalidCredential(String),
    #[error("no stored credential satisfies: {0}")]
    UnsatisfiableRequest(String),
    #[error("every credential satisfying {0} has expired")]
    Expired(String),
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("unknown credential {0:?}")]
    UnknownCredential(String),
    #[error("wallet storage: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCredential {
    pub credential: Credential,
    pub bundle: DisclosureBundle,
}

/// Which claims to open from one stored credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationTemplate {
    pub credential_id: String,
    pub claims: Vec<String>,
}

/// A persona: a labelled set of proofs the holder chooses to present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub label: String,
    pub templates: Vec<PresentationTemplate>,
}

impl Identity {
    pub fn credential_ids(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.credential_id.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Wallet {
    owner: Did,
    keys: KeyPair,
    credentials: BTreeMap<String, StoredCredential>,
    personas: BTreeMap<String, Identity>,
}

impl Wallet {
    pub fn new(owner: Did, keys: KeyPair) -> Wallet {
        Wallet { owner, keys, credentials: BTreeMap::new(), personas: BTreeMap::new() }
    }

    pub fn owner(&self) -> &Did {
        &self.owner
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    /// Replaces the signing key after a rotation.
    pub fn set_keys(&mut self, keys: KeyPair) {
        self.keys = keys;
    }

    /// Stores a credential after checking its issuer signature, its bundle,
    /// and that it is about the owner or an asset the owner controls.
    pub fn store(
        &mut self,
        credential: Credential,
        bundle: DisclosureBundle,
        resolver: &dyn Resolver,
    ) -> Result<(), WalletError> {
        if !credential.verify_signature(resolver) {
            return Err(WalletError::InvalidCredential(format!("{}: issuer signature", credential.id)));
        }
        if !credential.matches_bundle(&bundle) {
            return Err(WalletError::InvalidCredential(format!("{}: bundle does not open the commitment root", credential.id)));
        }
        if credential.subject != self.owner && !self.controls(&credential.subject, resolver) {
            return Err(WalletError::SubjectMismatch { subject: credential.subject });
        }
        self.credentials.insert(credential.id.clone(), StoredCredential { credential, bundle });
        Ok(())
    }

    fn controls(&self, subject: &Did, resolver: &dyn Resolver) -> bool {
        resolver
            .resolve(subject)
            .is_ok_and(|doc| doc.passive && doc.controller == self.owner)
    }

    pub fn list(&self) -> impl Iterator<Item = &Credential> {
        self.credentials.values().map(|s| &s.credential)
    }

    pub fn get(&self, credential_id: &str) -> Option<&StoredCredential> {
        self.credentials.get(credential_id)
    }

    pub fn stored(&self) -> impl Iterator<Item = &StoredCredential> {
        self.credentials.values()
    }

    pub fn personas(&self) -> impl Iterator<Item = &Identity> {
        self.personas.values()
    }

    fn select(&self, item: &crate::wallet::RequestItem, clock: Timestamp) -> Result<&StoredCredential, WalletError> {
        let describe = || {
            let names: Vec<&str> = item.claims.iter().map(|c| c.name.as_str()).collect();
            format!("{} {{{}}}", item.schema, names.join(", "))
        };
        let matching: Vec<&StoredCredential> = self
            .credentials
            .values()
            .filter(|s| s.credential.schema == item.schema)
            .filter(|s| {
                item.claims.iter().all(|req| {
                    s.bundle.claims.get(&req.name).is_some_and(|o| req.satisfied_by(&o.value))
                })
            })
            .collect();
        if matching.is_empty() {
            return Err(WalletError::UnsatisfiableRequest(describe()));
        }
        matching
            .into_iter()
            .filter(|s| !s.credential.is_expired(clock))
            // Newest issuance wins; among equals, the smallest id.
            .max_by(|a, b| {
                a.credential
                    .issued_at
                    .cmp(&b.credential.issued_at)
                    .then_with(|| b.credential.id.cmp(&a.credential.id))
            })
            .ok_or_else(|| WalletError::Expired(describe()))
    }

    fn holder_version(&self, resolver: &dyn Resolver) -> Result<u64, WalletError> {
        let doc = resolver
            .resolve(&self.owner)
            .map_err(|e| WalletError::Storage(format!("owner does not resolve: {e}")))?;
        if doc.active_key != Some(self.keys.public_key()) {
            return Err(WalletError::Storage("wallet key is not the owner's active key".into()));
        }
        Ok(doc.version)
    }

    /// Builds a presentation opening exactly the requested claims.
    pub fn build_presentation(
        &self,
        request: &PresentationRequest,
        clock: Timestamp,
        resolver: &dyn Resolver,
    ) -> Result<Presentation, WalletError> {
        let mut presented = Vec::with_capacity(request.items.len());
        for item in &request.items {
            let stored = self.select(item, clock)?;
            let names: Vec<&str> = item.claims.iter().map(|c| c.name.as_str()).collect();
            presented.push(PresentedCredential::build(&stored.credential, &stored.bundle, &names));
        }
        let version = self.holder_version(resolver)?;
        Ok(Presentation::sign(self.owner, version, request.challenge, presented, &self.keys))
    }

    /// Defines or replaces a persona. Every template must name a stored
    /// credential and claims it actually holds.
    pub fn define_persona(&mut self, identity: Identity) -> Result<(), WalletError> {
        for t in &identity.templates {
            let stored = self
                .credentials
                .get(&t.credential_id)
                .ok_or_else(|| WalletError::UnknownCredential(t.credential_id.clone()))?;
            if let Some(missing) = t.claims.iter().find(|c| !stored.bundle.claims.contains_key(*c)) {
                return Err(WalletError::UnsatisfiableRequest(format!("{} has no claim {missing}", t.credential_id)));
            }
        }
        self.personas.insert(identity.label.clone(), identity);
        Ok(())
    }

    pub fn compose_identity(&self, label: &str) -> Result<Identity, WalletError> {
        self.personas
            .get(label)
            .cloned()
            .ok_or_else(|| WalletError::UnknownPersona(label.to_owned()))
    }

    /// Presents a persona under `challenge`.
    pub fn present_persona(
        &self,
        label: &str,
        challenge: Nonce,
        clock: Timestamp,
        resolver: &dyn Resolver,
    ) -> Result<Presentation, WalletError> {
        let identity = self.compose_identity(label)?;
        self.present_templates(&identity.templates, challenge, clock, resolver)
    }

    /// Presents named claims from specific stored credentials.
    pub fn present_templates(
        &self,
        templates: &[PresentationTemplate],
        challenge: Nonce,
        clock: Timestamp,
        resolver: &dyn Resolver,
    ) -> Result<Presentation, WalletError> {
        let mut presented = Vec::with_capacity(templates.len());
        for t in templates {
            let stored = self
                .credentials
                .get(&t.credential_id)
                .ok_or_else(|| WalletError::UnknownCredential(t.credential_id.clone()))?;
            if stored.credential.is_expired(clock) {
                return Err(WalletError::Expired(t.credential_id.clone()));
            }
            let names: Vec<&str> = t.claims.iter().map(String::as_str).collect();
            presented.push(PresentedCredential::build(&stored.credential, &stored.bundle, &names));
        }
        let version = self.holder_version(resolver)?;
        Ok(Presentation::sign(self.owner, version, challenge, presented, &self.keys))
    }
}
