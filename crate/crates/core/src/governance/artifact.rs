use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GovernanceError;
use crate::canonical::canonical_bytes;
use crate::clock::Timestamp;
use crate::credentials::{issue, ClaimSet, ClaimValue, Credential, DisclosureBundle, IssueOptions};
use crate::digest::{sha256, Digest};
use crate::identity::{create_passive_did, Did, IdentityError, KeyPair, Registry, Resolver};
use crate::verification::TrustAnchorSet;
use crate::vlog::{verify_inclusion, InclusionProof, OperatedLog, SignedRoot};

pub const ARTIFACT_SCHEMA: &str = "artifact";
const PROPERTY_PREFIX: &str = "property.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Model,
    Dataset,
    Code,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::Model => "model",
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::Code => "code",
        })
    }
}

impl std::str::FromStr for ArtifactKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(ArtifactKind::Model),
            "dataset" => Ok(ArtifactKind::Dataset),
            "code" => Ok(ArtifactKind::Code),
            other => Err(format!("unknown artifact kind {other:?}")),
        }
    }
}

/// A publicly readable attestation: every claim opening is included, and the
/// credential is a leaf of a public log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactAttestation {
    pub credential: Credential,
    pub bundle: DisclosureBundle,
    pub log_id: Did,
    pub leaf_index: u64,
}

impl ArtifactAttestation {
    pub fn artifact_digest(&self) -> Option<Digest> {
        match self.bundle.claims.get("artifact_digest").map(|o| &o.value) {
            Some(ClaimValue::Text(hex)) => hex.parse().ok(),
            _ => None,
        }
    }

    pub fn kind(&self) -> Option<ArtifactKind> {
        match self.bundle.claims.get("artifact_kind").map(|o| &o.value) {
            Some(ClaimValue::Text(k)) => k.parse().ok(),
            _ => None,
        }
    }

    pub fn properties(&self) -> BTreeMap<&str, &ClaimValue> {
        self.bundle
            .claims
            .iter()
            .filter_map(|(k, o)| k.strip_prefix(PROPERTY_PREFIX).map(|name| (name, &o.value)))
            .collect()
    }
}

/// The passive DID naming an artifact under its publisher.
pub fn artifact_did(publisher: &Did, digest: &Digest) -> Did {
    Did::passive(publisher, &artifact_label(digest))
}

fn artifact_label(digest: &Digest) -> String {
    format!("artifact:{digest}")
}

/// Registers a passive DID for the artifact, issues an attestation about it,
/// and appends the credential to `log`.
#[allow(clippy::too_many_arguments)]
pub fn attest_artifact(
    publisher: &Did,
    publisher_keys: &KeyPair,
    artifact: &[u8],
    kind: ArtifactKind,
    properties: &BTreeMap<String, String>,
    registry: &Registry,
    log: &mut OperatedLog,
    clock: Timestamp,
    rng: &mut dyn rand::RngCore,
) -> Result<ArtifactAttestation, GovernanceError> {
    match registry.resolve(publisher) {
        Ok(_) => {}
        Err(IdentityError::NotFound(_)) => return Err(GovernanceError::UnknownPublisher(*publisher)),
        Err(e) => return Err(e.into()),
    }
    let digest = sha256(artifact);
    let (subject, _) = create_passive_did(publisher, publisher_keys, &artifact_label(&digest), registry)?;
    let mut pairs = vec![
        ("artifact_digest".to_owned(), ClaimValue::text(digest.to_hex())),
        ("artifact_kind".to_owned(), ClaimValue::text(kind.to_string())),
    ];
    pairs.extend(properties.iter().map(|(k, v)| (format!("{PROPERTY_PREFIX}{k}"), ClaimValue::text(v))));
    let claims = ClaimSet::from_pairs(pairs)?;
    let (credential, bundle) = issue(
        publisher_keys,
        publisher,
        &subject,
        ARTIFACT_SCHEMA,
        &claims,
        &IssueOptions::default(),
        registry,
        clock,
        rng,
    )?;
    let leaf_index = log.append(canonical_bytes(&credential));
    Ok(ArtifactAttestation { credential, bundle, log_id: log.operator(), leaf_index })
}

/// True iff `artifact` hashes to the attested digest, the attestation is signed
/// by an anchored publisher about that artifact's DID, and the credential is in
/// the log behind `signed_root`.
pub fn verify_artifact(
    artifact: &[u8],
    attestation: &ArtifactAttestation,
    anchors: &TrustAnchorSet,
    signed_root: &SignedRoot,
    inclusion: &InclusionProof,
    resolver: &dyn Resolver,
) -> bool {
    let credential = &attestation.credential;
    let digest = sha256(artifact);
    credential.schema == ARTIFACT_SCHEMA
        && attestation.artifact_digest() == Some(digest)
        && attestation.kind().is_some()
        && credential.subject == artifact_did(&credential.issuer, &digest)
        && anchors.accepts(ARTIFACT_SCHEMA, &credential.issuer)
        && credential.matches_bundle(&attestation.bundle)
        && credential.verify_signature(resolver)
        && attestation.log_id == signed_root.operator
        && signed_root.verify_with(resolver)
        && verify_inclusion(&canonical_bytes(credential), attestation.leaf_index, inclusion, signed_root)
}
