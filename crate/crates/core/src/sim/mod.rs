//! Deterministic multi-agent simulator.
//!
//! A [`World`] owns a seeded random source, the shared DID registry, a public
//! bulletin of revocation lists and signed log roots, and one FIFO channel per
//! ordered pair of agents. Each [`World::step`] picks a non-empty channel with
//! the seeded source, delivers its head message, and advances the clock by one
//! day. Every delivery lands in the [`Transcript`]; equal seeds give
//! byte-identical transcripts.

mod agents;
mod model;
mod scenarios;
mod world;

pub use agents::{
    mailbox_address, Agent, AgentRole, AuthorityAgent, Command, HolderAgent, HostedArtifact, IssuerAgent,
    Preferences, ProviderAgent, VerifierAgent,
};
pub use model::{learn, train_and_serve, AiServiceModel, DataRecord, FrequencyTable};
pub use scenarios::{run_scenario, simulate, SCENARIOS};
pub use world::{Bulletin, Ctx, Event, Parts, Transcript, TranscriptEntry, World};

use serde::Serialize;

use crate::agreements::{Envelope, Obligation};
use crate::credentials::{Credential, DisclosureBundle};
use crate::governance::{ArtifactAttestation, ArtifactKind, AuditRecord, Evidence};
use crate::identity::Did;
use crate::vlog::{InclusionProof, SignedRoot};
use crate::wallet::{Presentation, PresentationRequest};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("{scenario}: assertion failed: {assertion}")]
    AssertionFailed { scenario: String, assertion: String },
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("agent {label}: {message}")]
    Agent { label: String, message: String },
    #[error("no quiescence after {0} steps")]
    Stalled(u64),
}

impl SimError {
    pub(crate) fn agent(label: &str, message: impl std::fmt::Display) -> SimError {
        SimError::Agent { label: label.to_owned(), message: message.to_string() }
    }
}

/// Everything agents say to each other.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    CredentialRequest { schema: String },
    CredentialOffer { credential: Credential, bundle: DisclosureBundle },
    ServiceRequest { service: String },
    PresentationRequest { request: PresentationRequest },
    PresentationResponse { presentation: Presentation },
    Decision { accepted: bool, detail: String },
    Negotiation { envelope: Envelope },
    AgreementReceipt { leaf_index: u64, inclusion: InclusionProof, root: SignedRoot },
    DataSubmission { records: Vec<DataRecord> },
    MigrationNotice { new_provider: Did },
    MailboxExport { address: String, messages: Vec<String>, obligations: Vec<Obligation> },
    MailboxImport { address: String, messages: Vec<String> },
    AuditRequest { regulation: String, evidence: Evidence },
    AuditResult { record: AuditRecord, credential: Option<(Credential, DisclosureBundle)>, inclusion: InclusionProof },
    ArtifactRequest { kind: ArtifactKind },
    ArtifactOffer { artifact: Vec<u8>, attestation: ArtifactAttestation, inclusion: InclusionProof },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::CredentialRequest { .. } => "credential_request",
            Payload::CredentialOffer { .. } => "credential_offer",
            Payload::ServiceRequest { .. } => "service_request",
            Payload::PresentationRequest { .. } => "presentation_request",
            Payload::PresentationResponse { .. } => "presentation_response",
            Payload::Decision { .. } => "decision",
            Payload::Negotiation { envelope } => envelope.body.kind(),
            Payload::AgreementReceipt { .. } => "agreement_receipt",
            Payload::DataSubmission { .. } => "data_submission",
            Payload::MigrationNotice { .. } => "migration_notice",
            Payload::MailboxExport { .. } => "mailbox_export",
            Payload::MailboxImport { .. } => "mailbox_import",
            Payload::AuditRequest { .. } => "audit_request",
            Payload::AuditResult { .. } => "audit_result",
            Payload::ArtifactRequest { .. } => "artifact_request",
            Payload::ArtifactOffer { .. } => "artifact_offer",
        }
    }
}
