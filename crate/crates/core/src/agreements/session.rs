use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::message::chain_digest;
use super::ricardian::signing_payload;
use super::{
    validate_clause_set, AgreementError, AgreementParty, Clause, ClauseEdit, ClauseKind, ClauseSpec, ClauseState,
    Envelope, Message, PartySignature, RicardianAgreement, Role,
};
use crate::canonical::canonical_digest;
use crate::digest::{sha256_concat, Digest, Nonce};
use crate::governance::{verify_compliance, ComplianceProof};
use crate::identity::{Did, KeyPair};
use crate::verification::{verify_presentation_in, TrustAnchorSet, VerifierContext};
use crate::vlog::{leaf_hash, SignedRoot};
use crate::wallet::{Presentation, PresentationRequest, RequestItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Identified,
    Negotiating,
    Agreed,
    Signed,
    Aborted,
}

impl Phase {
    /// The allowed phase graph: the forward chain plus abort from any phase
    /// before Signed.
    pub fn may_advance_to(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Init, Identified) | (Identified, Negotiating) | (Negotiating, Agreed) | (Agreed, Signed)
        ) || (next == Aborted && !matches!(self, Signed | Aborted))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceRequirement {
    pub role: Role,
    pub regulation: String,
}

/// What each side must show during identification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPolicy {
    /// Claims the responder requires of the initiator.
    pub initiator_request: Vec<RequestItem>,
    /// Issuers the responder trusts for the initiator's credentials.
    pub initiator_anchors: TrustAnchorSet,
    pub responder_request: Vec<RequestItem>,
    pub responder_anchors: TrustAnchorSet,
    pub compliance: Vec<ComplianceRequirement>,
    /// Authorities trusted to issue compliance credentials.
    pub authority_anchors: TrustAnchorSet,
}

impl SessionPolicy {
    pub fn request_items(&self, role: Role) -> &[RequestItem] {
        match role {
            Role::Initiator => &self.initiator_request,
            Role::Responder => &self.responder_request,
        }
    }

    pub fn anchors(&self, role: Role) -> &TrustAnchorSet {
        match role {
            Role::Initiator => &self.initiator_anchors,
            Role::Responder => &self.responder_anchors,
        }
    }

    pub fn regulations(&self, role: Role) -> impl Iterator<Item = &str> {
        self.compliance.iter().filter(move |c| c.role == role).map(|c| c.regulation.as_str())
    }
}

/// Snapshots the session checks identifications against.
#[derive(Clone, Copy)]
pub struct Environment<'a> {
    pub verifier: VerifierContext<'a>,
    /// Latest signed root known for each audit log, keyed by log id.
    pub audit_roots: &'a BTreeMap<Did, SignedRoot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identification {
    pub presentation: Digest,
    pub compliance: BTreeMap<String, Digest>,
}

/// One party's replica of a negotiation. Every accepted message is validated
/// in full before any state changes, so a rejected message leaves the session
/// exactly as it was.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationSession {
    id: Nonce,
    initiator: Did,
    responder: Did,
    policy: SessionPolicy,
    phase: Phase,
    identifications: BTreeMap<Role, Identification>,
    clauses: BTreeMap<String, Clause>,
    acceptances: BTreeSet<Role>,
    draft: Option<RicardianAgreement>,
    signatures: BTreeMap<Role, PartySignature>,
    history: Vec<Envelope>,
    history_digest: Digest,
}

/// The hash-relevant part of a session, without its history.
#[derive(Serialize)]
struct StateView<'a> {
    phase: Phase,
    identifications: &'a BTreeMap<Role, Identification>,
    clauses: &'a BTreeMap<String, Clause>,
    acceptances: &'a BTreeSet<Role>,
    draft: Option<&'a Digest>,
    signatures: &'a BTreeMap<Role, PartySignature>,
}

impl NegotiationSession {
    pub fn new(id: Nonce, initiator: Did, responder: Did, policy: SessionPolicy) -> Result<NegotiationSession, AgreementError> {
        if initiator == responder {
            return Err(AgreementError::Unauthorized("a session needs two distinct parties".into()));
        }
        Ok(NegotiationSession {
            id,
            initiator,
            responder,
            policy,
            phase: Phase::Init,
            identifications: BTreeMap::new(),
            clauses: BTreeMap::new(),
            acceptances: BTreeSet::new(),
            draft: None,
            signatures: BTreeMap::new(),
            history: Vec::new(),
            history_digest: Digest::ZERO,
        })
    }

    pub fn id(&self) -> Nonce {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn party(&self, role: Role) -> Did {
        match role {
            Role::Initiator => self.initiator,
            Role::Responder => self.responder,
        }
    }

    pub fn role_of(&self, did: &Did) -> Option<Role> {
        Role::BOTH.into_iter().find(|r| self.party(*r) == *did)
    }

    pub fn policy(&self) -> &SessionPolicy {
        &self.policy
    }

    pub fn clauses(&self) -> &BTreeMap<String, Clause> {
        &self.clauses
    }

    pub fn identification(&self, role: Role) -> Option<&Identification> {
        self.identifications.get(&role)
    }

    pub fn acceptances(&self) -> &BTreeSet<Role> {
        &self.acceptances
    }

    pub fn signatures(&self) -> &BTreeMap<Role, PartySignature> {
        &self.signatures
    }

    pub fn history(&self) -> &[Envelope] {
        &self.history
    }

    pub fn history_digest(&self) -> Digest {
        self.history_digest
    }

    /// The unsigned agreement once both parties accepted the terms.
    pub fn draft(&self) -> Option<&RicardianAgreement> {
        self.draft.as_ref()
    }

    /// The signed agreement, once both signatures are in.
    pub fn agreement(&self) -> Option<&RicardianAgreement> {
        self.draft.as_ref().filter(|_| self.phase == Phase::Signed)
    }

    pub fn open_clauses(&self) -> Vec<String> {
        self.clauses.values().filter(|c| c.is_open()).map(|c| c.spec.id.clone()).collect()
    }

    /// Digest of the current clause set, which accept-all refers to.
    pub fn terms_digest(&self) -> Digest {
        canonical_digest(&self.clauses)
    }

    /// Digest of the session state, excluding history.
    pub fn state_digest(&self) -> Digest {
        canonical_digest(&StateView {
            phase: self.phase,
            identifications: &self.identifications,
            clauses: &self.clauses,
            acceptances: &self.acceptances,
            draft: self.draft.as_ref().map(|d| &d.hash),
            signatures: &self.signatures,
        })
    }

    /// The challenge a role's identifying presentation must answer.
    pub fn challenge_for(&self, role: Role) -> Nonce {
        Nonce(sha256_concat(&[b"didtrust/identify", self.id.as_bytes(), role.as_str().as_bytes()]).0)
    }

    pub fn identification_request(&self, role: Role) -> PresentationRequest {
        PresentationRequest::new(self.challenge_for(role), self.policy.request_items(role).to_vec())
    }

    /// Seals `body` as the next message from `sender`.
    pub fn message(&self, sender: Did, keys: &KeyPair, body: Message) -> Envelope {
        Envelope::seal(self.id, sender, self.history.len() as u64, body, keys)
    }

    /// Validates and applies one message.
    pub fn apply(&mut self, envelope: &Envelope, env: &Environment<'_>) -> Result<(), AgreementError> {
        if envelope.session != self.id {
            return Err(AgreementError::WrongSession);
        }
        let role = self
            .role_of(&envelope.sender)
            .ok_or_else(|| AgreementError::Unauthorized(format!("{} is not a party", envelope.sender)))?;
        let expected = self.history.len() as u64;
        if envelope.sequence != expected {
            return Err(AgreementError::OutOfOrder { expected, got: envelope.sequence });
        }
        let sender_doc = env
            .verifier
            .registry
            .resolve(&envelope.sender)
            .map_err(|e| AgreementError::Unauthorized(e.to_string()))?;
        if !sender_doc.verify_active(&envelope.signing_payload(), &envelope.signature) {
            return Err(AgreementError::Unauthorized("message signature does not verify".into()));
        }

        let next = match &envelope.body {
            Message::Identify { presentation, compliance } => self.on_identify(role, presentation, compliance, env)?,
            Message::Propose { clauses } => self.on_propose(role, clauses)?,
            Message::Counter { edits } => self.on_counter(role, edits)?,
            Message::SelectChoice { clause, alternative } => self.on_select(role, clause, alternative)?,
            Message::RespondOption { clause, accept } => self.on_respond(role, clause, *accept)?,
            Message::AcceptAll { terms } => self.on_accept(role, terms)?,
            Message::Sign { key_version, signature } => {
                if *key_version != sender_doc.version {
                    return Err(AgreementError::Unauthorized("agreement must be signed with the current key".into()));
                }
                self.on_sign(role, *key_version, signature, &sender_doc)?
            }
            Message::Abort { .. } => {
                if matches!(self.phase, Phase::Signed | Phase::Aborted) {
                    return Err(self.wrong_phase("abort"));
                }
                Transition::Phase(Phase::Aborted)
            }
        };
        self.commit(next);
        self.history_digest = chain_digest(&self.history_digest, envelope);
        self.history.push(envelope.clone());
        Ok(())
    }

    fn wrong_phase(&self, message: &str) -> AgreementError {
        AgreementError::WrongPhase { phase: self.phase, message: message.to_owned() }
    }

    fn commit(&mut self, t: Transition) {
        match t {
            Transition::Identified(role, ident) => {
                self.identifications.insert(role, ident);
                if self.identifications.len() == 2 {
                    self.phase = Phase::Identified;
                }
            }
            Transition::Clauses(clauses) => {
                self.clauses = clauses;
                self.acceptances.clear();
                self.phase = Phase::Negotiating;
            }
            Transition::Accepted(role) => {
                self.acceptances.insert(role);
                if self.acceptances.len() == 2 {
                    self.draft = Some(self.render_draft());
                    self.phase = Phase::Agreed;
                }
            }
            Transition::Signed(sig) => {
                self.signatures.insert(sig.role, sig);
                if self.signatures.len() == 2 {
                    let draft = self.draft.as_mut().expect("agreed sessions have a draft");
                    draft.signatures = self.signatures.values().cloned().collect();
                    self.phase = Phase::Signed;
                }
            }
            Transition::Phase(p) => self.phase = p,
        }
    }

    fn render_draft(&self) -> RicardianAgreement {
        let parties = Role::BOTH
            .into_iter()
            .map(|role| {
                let ident = &self.identifications[&role];
                AgreementParty {
                    role,
                    did: self.party(role),
                    presentation: ident.presentation,
                    compliance: ident.compliance.clone(),
                }
            })
            .collect();
        let clauses = self.clauses.values().filter_map(Clause::resolved).collect();
        RicardianAgreement::draft(self.id, parties, clauses)
    }

    fn on_identify(
        &self,
        role: Role,
        presentation: &Presentation,
        compliance: &[ComplianceProof],
        env: &Environment<'_>,
    ) -> Result<Transition, AgreementError> {
        if self.phase != Phase::Init {
            return Err(self.wrong_phase("identify"));
        }
        if self.identifications.contains_key(&role) {
            return Err(AgreementError::AlreadyIdentified(role));
        }
        let failed = |reason: String, report| AgreementError::IdentificationFailed { role, reason, report };
        let sender = self.party(role);
        if presentation.holder != sender {
            return Err(failed("presentation holder is not the sender".into(), None));
        }
        let challenge = self.challenge_for(role);
        let report = verify_presentation_in(presentation, &challenge, self.policy.anchors(role), &env.verifier)
            .map_err(|e| failed(e.to_string(), None))?;
        if !report.accepted() {
            let reason = report.failed().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
            return Err(failed(reason, Some(Box::new(report))));
        }
        if !report.satisfies_exactly(&self.identification_request(role)) {
            return Err(failed("presentation does not answer the identification request".into(), Some(Box::new(report))));
        }

        let mut proven = BTreeMap::new();
        for regulation in self.policy.regulations(role) {
            let ok = compliance.iter().find(|p| p.record.regulation_id == regulation).is_some_and(|proof| {
                proof.presentation.holder == sender
                    && env.audit_roots.get(&proof.record.log_id).is_some_and(|root| {
                        verify_compliance(proof, regulation, &challenge, &self.policy.authority_anchors, root, &env.verifier)
                    })
            });
            if !ok {
                return Err(failed(format!("no valid compliance proof for {regulation}"), None));
            }
            let proof = compliance.iter().find(|p| p.record.regulation_id == regulation).expect("checked above");
            proven.insert(regulation.to_owned(), leaf_hash(&proof.record.leaf()));
        }
        Ok(Transition::Identified(role, Identification { presentation: presentation.digest(), compliance: proven }))
    }

    fn negotiable(&self, message: &str) -> Result<(), AgreementError> {
        match self.phase {
            Phase::Identified | Phase::Negotiating => Ok(()),
            _ => Err(self.wrong_phase(message)),
        }
    }

    fn on_propose(&self, role: Role, specs: &[ClauseSpec]) -> Result<Transition, AgreementError> {
        self.negotiable("propose")?;
        if specs.is_empty() {
            return Err(AgreementError::InvalidClauses("a proposal needs at least one clause".into()));
        }
        let mut clauses = BTreeMap::new();
        for spec in specs {
            if clauses.insert(spec.id.clone(), Clause::new(spec.clone(), role)).is_some() {
                return Err(AgreementError::InvalidClauses(format!("clause {} proposed twice", spec.id)));
            }
        }
        validate_clause_set(&clauses)?;
        Ok(Transition::Clauses(clauses))
    }

    fn on_counter(&self, role: Role, edits: &[ClauseEdit]) -> Result<Transition, AgreementError> {
        self.negotiable("counter")?;
        if edits.is_empty() {
            return Err(AgreementError::InvalidClauses("a counter needs at least one edit".into()));
        }
        let mut clauses = self.clauses.clone();
        for edit in edits {
            match edit {
                ClauseEdit::Add { clause } => {
                    if clauses.contains_key(&clause.id) {
                        return Err(AgreementError::InvalidClauses(format!("clause {} already exists", clause.id)));
                    }
                    clauses.insert(clause.id.clone(), Clause::new(clause.clone(), role));
                }
                ClauseEdit::Replace { clause } => {
                    if !clauses.contains_key(&clause.id) {
                        return Err(AgreementError::UnknownClause(clause.id.clone()));
                    }
                    clauses.insert(clause.id.clone(), Clause::new(clause.clone(), role));
                }
                ClauseEdit::Remove { id } => {
                    if clauses.remove(id).is_none() {
                        return Err(AgreementError::UnknownClause(id.clone()));
                    }
                }
            }
        }
        validate_clause_set(&clauses)?;
        Ok(Transition::Clauses(clauses))
    }

    /// The open clause `id`, checking that `role` may resolve it.
    fn resolvable(&self, role: Role, id: &str, message: &str) -> Result<&Clause, AgreementError> {
        if self.phase != Phase::Negotiating {
            return Err(self.wrong_phase(message));
        }
        let clause = self.clauses.get(id).ok_or_else(|| AgreementError::UnknownClause(id.to_owned()))?;
        if !clause.is_open() {
            return Err(AgreementError::AlreadyResolved(id.to_owned()));
        }
        if clause.proposer == role {
            return Err(AgreementError::Unauthorized(format!("{role} proposed {id} and cannot resolve it")));
        }
        Ok(clause)
    }

    fn with_state(&self, id: &str, state: ClauseState) -> Transition {
        let mut clauses = self.clauses.clone();
        clauses.get_mut(id).expect("clause exists").state = state;
        Transition::Clauses(clauses)
    }

    fn on_select(&self, role: Role, id: &str, alternative: &str) -> Result<Transition, AgreementError> {
        let clause = self.resolvable(role, id, "select_choice")?;
        let ClauseKind::Choice { alternatives } = &clause.spec.kind else {
            return Err(AgreementError::KindMismatch { clause: id.to_owned(), expected: "choice" });
        };
        if !alternatives.iter().any(|a| a.label == alternative) {
            return Err(AgreementError::UnknownAlternative { clause: id.to_owned(), alternative: alternative.to_owned() });
        }
        Ok(self.with_state(id, ClauseState::Resolved { alternative: alternative.to_owned() }))
    }

    fn on_respond(&self, role: Role, id: &str, accept: bool) -> Result<Transition, AgreementError> {
        let clause = self.resolvable(role, id, "respond_option")?;
        if !matches!(clause.spec.kind, ClauseKind::Option { .. }) {
            return Err(AgreementError::KindMismatch { clause: id.to_owned(), expected: "option" });
        }
        Ok(self.with_state(id, if accept { ClauseState::Accepted } else { ClauseState::Rejected }))
    }

    fn incomplete(&self) -> Option<AgreementError> {
        let open = self.open_clauses();
        if self.clauses.is_empty() || !open.is_empty() {
            Some(AgreementError::IncompleteTerms(open))
        } else {
            None
        }
    }

    fn on_accept(&self, role: Role, terms: &Digest) -> Result<Transition, AgreementError> {
        if self.phase != Phase::Negotiating {
            return Err(self.wrong_phase("accept_all"));
        }
        if let Some(e) = self.incomplete() {
            return Err(e);
        }
        if *terms != self.terms_digest() {
            return Err(AgreementError::StaleTerms);
        }
        Ok(Transition::Accepted(role))
    }

    fn on_sign(
        &self,
        role: Role,
        key_version: u64,
        signature: &crate::identity::Signature,
        sender_doc: &crate::identity::DidDocument,
    ) -> Result<Transition, AgreementError> {
        if self.phase != Phase::Agreed {
            if matches!(self.phase, Phase::Identified | Phase::Negotiating) {
                if let Some(e) = self.incomplete() {
                    return Err(e);
                }
            }
            return Err(self.wrong_phase("sign"));
        }
        if self.signatures.contains_key(&role) {
            return Err(AgreementError::AlreadySigned(role));
        }
        let draft = self.draft.as_ref().expect("agreed sessions have a draft");
        if !sender_doc.verify_active(&signing_payload(&draft.hash), signature) {
            return Err(AgreementError::Unauthorized("agreement signature does not verify".into()));
        }
        Ok(Transition::Signed(PartySignature { role, did: self.party(role), key_version, signature: *signature }))
    }
}

enum Transition {
    Identified(Role, Identification),
    Clauses(BTreeMap<String, Clause>),
    Accepted(Role),
    Signed(PartySignature),
    Phase(Phase),
}
