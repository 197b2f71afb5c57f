//! Verifiable credentials with per-claim salted commitments.
//!
//! The issuer signs metadata plus a Merkle root over one commitment per claim,
//! so the holder can later open any subset of claims. Predicates such as
//! `age_over(21)` are evaluated by the issuer and committed as ordinary boolean
//! claims, which lets a holder prove the predicate without opening its inputs.

mod claims;
mod commitment;
mod revocation;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use claims::{ClaimSet, ClaimValue, Predicate};
pub use commitment::{commit, commitment_root, ClaimOpening, DisclosureBundle, SaltedCommitment, SEPARATOR};
pub use revocation::{is_revoked, revoke, RevocationList};

use crate::clock::Timestamp;
use crate::digest::{Digest, Salt};
use crate::identity::{signing_input, Did, IdentityError, KeyPair, Resolver, Signature};

const CREDENTIAL_PURPOSE: &str = "didtrust/credential";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CredentialError {
    #[error("invalid claims: {0}")]
    InvalidClaims(String),
    #[error("predicate unsatisfiable: {0}")]
    PredicateUnsatisfiable(String),
    #[error("issuer {0} does not resolve")]
    UnknownIssuer(Did),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("no commitments")]
    Empty,
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

/// Issuer-signed credential metadata. Claim values live in the holder's
/// [`DisclosureBundle`]; only their commitment root is here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub id: String,
    pub issuer: Did,
    /// Issuer document version whose active key signed this credential.
    pub issuer_key_version: u64,
    pub subject: Did,
    pub schema: String,
    pub issued_at: Timestamp,
    pub expires_at: Option<Timestamp>,
    pub claim_count: u64,
    pub commitment_root: Digest,
    pub issuer_signature: Signature,
}

#[derive(Serialize)]
struct UnsignedCredential<'a> {
    id: &'a str,
    issuer: &'a Did,
    issuer_key_version: u64,
    subject: &'a Did,
    schema: &'a str,
    issued_at: Timestamp,
    expires_at: Option<Timestamp>,
    claim_count: u64,
    commitment_root: &'a Digest,
}

impl Credential {
    fn signing_payload(&self) -> Vec<u8> {
        signing_input(
            CREDENTIAL_PURPOSE,
            &UnsignedCredential {
                id: &self.id,
                issuer: &self.issuer,
                issuer_key_version: self.issuer_key_version,
                subject: &self.subject,
                schema: &self.schema,
                issued_at: self.issued_at,
                expires_at: self.expires_at,
                claim_count: self.claim_count,
                commitment_root: &self.commitment_root,
            },
        )
    }

    /// Checks the issuer signature under the key active at `issuer_key_version`.
    pub fn verify_signature(&self, resolver: &dyn Resolver) -> bool {
        resolver
            .resolve(&self.issuer)
            .ok()
            .and_then(|doc| doc.key_at_version(self.issuer_key_version))
            .is_some_and(|key| key.verify(&self.signing_payload(), &self.issuer_signature))
    }

    pub fn is_expired(&self, clock: Timestamp) -> bool {
        self.expires_at.is_some_and(|t| clock >= t)
    }

    /// True iff the bundle opens every committed claim of this credential.
    pub fn matches_bundle(&self, bundle: &DisclosureBundle) -> bool {
        bundle.credential_id == self.id
            && bundle.claims.len() as u64 == self.claim_count
            && bundle.root().is_ok_and(|r| r == self.commitment_root)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IssueOptions {
    pub expires_at: Option<Timestamp>,
    pub predicates: Vec<Predicate>,
}

/// Issues a credential over `claims` plus one derived boolean claim per
/// predicate, evaluated at `issued_at`.
#[allow(clippy::too_many_arguments)]
pub fn issue(
    issuer_keys: &KeyPair,
    issuer: &Did,
    subject: &Did,
    schema: &str,
    claims: &ClaimSet,
    options: &IssueOptions,
    resolver: &dyn Resolver,
    issued_at: Timestamp,
    rng: &mut dyn rand::RngCore,
) -> Result<(Credential, DisclosureBundle), CredentialError> {
    let issuer_doc = resolver.resolve(issuer).map_err(|_| CredentialError::UnknownIssuer(*issuer))?;
    if issuer_doc.active_key != Some(issuer_keys.public_key()) {
        return Err(CredentialError::Unauthorized(format!("not the active key of {issuer}")));
    }
    if claims.is_empty() {
        return Err(CredentialError::InvalidClaims("claim set is empty".into()));
    }

    let mut all = claims.clone();
    let as_of = issued_at.to_date();
    for predicate in &options.predicates {
        let holds = predicate.evaluate(claims, as_of)?;
        all.insert_derived(predicate.derived_name(), ClaimValue::Boolean(holds))?;
    }

    let mut id_bytes = [0u8; 16];
    rng.fill_bytes(&mut id_bytes);
    let id = format!("urn:didtrust:cred:{}", hex::encode(id_bytes));

    let mut seen = BTreeSet::new();
    let mut openings = BTreeMap::new();
    for (name, value) in all.iter() {
        let salt = loop {
            let mut s = [0u8; 16];
            rng.fill_bytes(&mut s);
            if seen.insert(s) {
                break Salt(s);
            }
        };
        openings.insert(name.clone(), ClaimOpening { salt, value: value.clone() });
    }
    let bundle = DisclosureBundle { credential_id: id.clone(), claims: openings };

    let mut credential = Credential {
        id,
        issuer: *issuer,
        issuer_key_version: issuer_doc.version,
        subject: *subject,
        schema: schema.to_owned(),
        issued_at,
        expires_at: options.expires_at,
        claim_count: bundle.claims.len() as u64,
        commitment_root: bundle.root()?,
        issuer_signature: Signature([0; 64]),
    };
    credential.issuer_signature = issuer_keys.sign(&credential.signing_payload());
    Ok((credential, bundle))
}
