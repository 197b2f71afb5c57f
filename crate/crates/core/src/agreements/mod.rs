//! Negotiated, dual-signed agreements.
//!
//! Two parties identify each other with presentations, negotiate a clause set
//! by proposal, counter-proposal, choice selection, and option responses, then
//! both sign the hash of a deterministically rendered agreement. Every message
//! travels in a signed [`Envelope`] and is applied to a [`NegotiationSession`]
//! replica, which rejects anything out of phase, out of order, or unsigned.

mod clause;
mod message;
mod ricardian;
mod session;
mod terms;

pub use clause::{
    ad_personalization_option, data_sharing_choice, email_service_template, portability_clause, retention_clause,
    two_clause_template, Alternative, Clause, ClauseKind, ClauseSpec, ClauseState, ResolvedClause, Terms,
    AD_PERSONALIZATION, DATA_SHARING, PORTABILITY, RETENTION_DAYS,
};
pub(crate) use clause::validate_clause_set;
pub use message::{history_digest, ClauseEdit, Envelope, Message, Role};
pub use ricardian::{
    agreement_hash, render_terms, render_text, signing_payload as agreement_signing_payload, AgreementParty,
    PartySignature, RicardianAgreement,
};
pub use session::{ComplianceRequirement, Environment, Identification, NegotiationSession, Phase, SessionPolicy};
pub use terms::{
    evaluate_terms, Obligation, ACCOUNT_MIGRATION, AD_SERVING, DATA_EXPORT, EVENTS, MODEL_TRAINING,
    RETENTION_EXPIRED, SERVICE_TERMINATION,
};

use crate::clock::Timestamp;
use crate::digest::Nonce;
use crate::governance::{prove_compliance, AuditRecord};
use crate::identity::{Did, KeyPair, Resolver};
use crate::verification::VerificationReport;
use crate::vlog::{InclusionProof, OperatedLog};
use crate::wallet::{Wallet, WalletError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgreementError {
    #[error("{role} identification failed: {reason}")]
    IdentificationFailed { role: Role, reason: String, report: Option<Box<VerificationReport>> },
    #[error("{0} is already identified")]
    AlreadyIdentified(Role),
    #[error("{message} not allowed in phase {phase:?}")]
    WrongPhase { phase: Phase, message: String },
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("message for another session")]
    WrongSession,
    #[error("expected sequence {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("unknown clause {0}")]
    UnknownClause(String),
    #[error("clause {clause} has no alternative {alternative:?}")]
    UnknownAlternative { clause: String, alternative: String },
    #[error("clause {clause} is not a {expected}")]
    KindMismatch { clause: String, expected: &'static str },
    #[error("clause {0} is already resolved")]
    AlreadyResolved(String),
    #[error("invalid clauses: {0}")]
    InvalidClauses(String),
    #[error("open clauses: {0:?}")]
    IncompleteTerms(Vec<String>),
    #[error("acceptance refers to a different clause set")]
    StaleTerms,
    #[error("{0} has already signed")]
    AlreadySigned(Role),
    #[error("invalid agreement: {0}")]
    InvalidAgreement(String),
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
}

/// A compliance credential plus the audit record and inclusion proof that
/// back it, ready to be presented under a session challenge.
#[derive(Debug, Clone)]
pub struct ComplianceMaterial {
    pub credential_id: String,
    pub record: AuditRecord,
    pub inclusion: InclusionProof,
}

/// Builds `role`'s identification message from the holder's wallet.
pub fn identify(
    session: &NegotiationSession,
    role: Role,
    wallet: &Wallet,
    compliance: &[ComplianceMaterial],
    clock: Timestamp,
    resolver: &dyn Resolver,
) -> Result<Envelope, WalletError> {
    let request = session.identification_request(role);
    let presentation = wallet.build_presentation(&request, clock, resolver)?;
    let proofs = compliance
        .iter()
        .map(|m| {
            prove_compliance(wallet, &m.credential_id, m.record.clone(), m.inclusion.clone(), request.challenge, clock, resolver)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(session.message(*wallet.owner(), wallet.keys(), Message::Identify { presentation, compliance: proofs }))
}

/// One side of [`start_session`].
pub struct Participant<'a> {
    pub wallet: &'a Wallet,
    pub compliance: &'a [ComplianceMaterial],
}

/// Runs mutual identification locally and returns the session in Identified.
pub fn start_session(
    id: Nonce,
    initiator: Participant<'_>,
    responder: Participant<'_>,
    policy: SessionPolicy,
    env: &Environment<'_>,
) -> Result<NegotiationSession, AgreementError> {
    let mut session = NegotiationSession::new(id, *initiator.wallet.owner(), *responder.wallet.owner(), policy)?;
    for (role, p) in [(Role::Initiator, &initiator), (Role::Responder, &responder)] {
        let message = identify(&session, role, p.wallet, p.compliance, env.verifier.clock, env.verifier.registry)
            .map_err(|e| AgreementError::IdentificationFailed { role, reason: e.to_string(), report: None })?;
        session.apply(&message, env)?;
    }
    Ok(session)
}

/// Both parties sign an Agreed session; the agreement is appended to `log`.
/// Returns the agreement and its leaf index.
pub fn finalize_and_sign(
    session: &mut NegotiationSession,
    initiator_keys: &KeyPair,
    responder_keys: &KeyPair,
    env: &Environment<'_>,
    log: &mut OperatedLog,
) -> Result<(RicardianAgreement, u64), AgreementError> {
    if session.phase() != Phase::Agreed {
        let open = session.open_clauses();
        if !open.is_empty() && matches!(session.phase(), Phase::Identified | Phase::Negotiating) {
            return Err(AgreementError::IncompleteTerms(open));
        }
        return Err(AgreementError::WrongPhase { phase: session.phase(), message: "sign".into() });
    }
    for (role, keys) in [(Role::Initiator, initiator_keys), (Role::Responder, responder_keys)] {
        let message = sign_message(session, role, keys, env.verifier.registry)?;
        session.apply(&message, env)?;
    }
    let agreement = session.agreement().expect("both signatures applied").clone();
    let index = log.append(agreement.leaf());
    Ok((agreement, index))
}

/// `role`'s signature over the session's draft agreement.
pub fn sign_message(
    session: &NegotiationSession,
    role: Role,
    keys: &KeyPair,
    resolver: &dyn Resolver,
) -> Result<Envelope, AgreementError> {
    let draft = session
        .draft()
        .ok_or_else(|| AgreementError::WrongPhase { phase: session.phase(), message: "sign".into() })?;
    let did: Did = session.party(role);
    let version = resolver.resolve(&did).map_err(|e| AgreementError::Unauthorized(e.to_string()))?.version;
    let signature = keys.sign(&ricardian::signing_payload(&draft.hash));
    Ok(session.message(did, keys, Message::Sign { key_version: version, signature }))
}

/// The accept-all message for the session's current clause set.
pub fn accept_message(session: &NegotiationSession, role: Role, keys: &KeyPair) -> Envelope {
    session.message(session.party(role), keys, Message::AcceptAll { terms: session.terms_digest() })
}
