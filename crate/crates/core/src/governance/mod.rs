//! Audits, compliance credentials, and artifact attestations.
//!
//! An authority audits a provider's evidence against a [`Regulation`]. Every
//! audit, pass or fail, becomes a leaf of a public log; a pass also yields a
//! compliance credential that points back at that leaf. Providers present the
//! credential to win business, and negotiation policies can demand it.

mod artifact;
mod audit;
mod regulation;

pub use artifact::{artifact_did, attest_artifact, verify_artifact, ArtifactAttestation, ArtifactKind, ARTIFACT_SCHEMA};
pub use audit::{
    conduct_audit, prove_compliance, verify_compliance, AuditOutcome, AuditRecord, AuditVerdict, ComplianceProof,
    COMPLIANCE_SCHEMA, VALIDITY_DAYS,
};
pub use regulation::{
    shipped_regulations, Condition, Evidence, EvidenceRecord, Regulation, BIAS_REGULATION, CONSENT_REGULATION,
    SUPPLY_CHAIN_REGULATION,
};

use crate::credentials::CredentialError;
use crate::identity::{Did, IdentityError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GovernanceError {
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("malformed evidence: {0}")]
    MalformedEvidence(String),
    #[error("publisher {0} does not resolve")]
    UnknownPublisher(Did),
    #[error(transparent)]
    Credential(#[from] CredentialError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}
