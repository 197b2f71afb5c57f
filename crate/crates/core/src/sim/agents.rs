use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;

use super::model::{AiServiceModel, DataRecord};
use super::world::{Ctx, Event};
use super::{Payload, SimError};
use crate::agreements::{
    accept_message, evaluate_terms, identify, sign_message, AgreementError, ClauseKind, ClauseSpec, ComplianceMaterial,
    Environment, Envelope, Message, NegotiationSession, Obligation, Phase, RicardianAgreement, Role, SessionPolicy,
    ACCOUNT_MIGRATION,
};
use crate::clock::Timestamp;
use crate::credentials::{issue, ClaimSet, Credential, DisclosureBundle, IssueOptions, RevocationList};
use crate::digest::{Digest, Nonce};
use crate::governance::{conduct_audit, verify_artifact, ArtifactAttestation, ArtifactKind, Evidence, Regulation};
use crate::identity::{Did, KeyPair, Registry};
use crate::verification::{verify_presentation_in, TrustAnchorSet, VerifierContext};
use crate::vlog::{verify_inclusion, InclusionProof, OperatedLog};
use crate::wallet::{PresentationRequest, RequestItem, Wallet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgentRole {
    Issuer,
    Holder,
    Verifier,
    ServiceProvider,
    Authority,
}

/// Local instructions a scenario script gives an agent.
#[derive(Debug, Clone)]
pub enum Command {
    RequestCredential { issuer: String, schema: String },
    RequestService { verifier: String, service: String },
    Negotiate { provider: String },
    SubmitData { provider: String, records: Vec<DataRecord> },
    Migrate { from: String, to: String },
    RequestAudit { authority: String, regulation: String, evidence: Evidence },
    RequestArtifact { from: String, kind: ArtifactKind },
}

/// The mailbox address a provider hosts for `did`. It depends only on the
/// DID, so it survives a change of provider.
pub fn mailbox_address(did: &Did) -> String {
    format!("{did}#mail")
}

pub enum Agent {
    Issuer(IssuerAgent),
    Holder(HolderAgent),
    Verifier(VerifierAgent),
    Provider(ProviderAgent),
    Authority(AuthorityAgent),
}

impl Agent {
    pub fn did(&self) -> Did {
        match self {
            Agent::Issuer(a) => a.did,
            Agent::Holder(a) => *a.wallet.owner(),
            Agent::Verifier(a) => a.did,
            Agent::Provider(a) => *a.wallet.owner(),
            Agent::Authority(a) => a.did,
        }
    }

    pub fn role(&self) -> AgentRole {
        match self {
            Agent::Issuer(_) => AgentRole::Issuer,
            Agent::Holder(_) => AgentRole::Holder,
            Agent::Verifier(_) => AgentRole::Verifier,
            Agent::Provider(_) => AgentRole::ServiceProvider,
            Agent::Authority(_) => AgentRole::Authority,
        }
    }

    pub fn wallet_mut(&mut self) -> Option<&mut Wallet> {
        match self {
            Agent::Holder(a) => Some(&mut a.wallet),
            Agent::Provider(a) => Some(&mut a.wallet),
            _ => None,
        }
    }

    pub fn as_holder(&self) -> Option<&HolderAgent> {
        match self {
            Agent::Holder(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_provider(&self) -> Option<&ProviderAgent> {
        match self {
            Agent::Provider(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_provider_mut(&mut self) -> Option<&mut ProviderAgent> {
        match self {
            Agent::Provider(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_authority(&self) -> Option<&AuthorityAgent> {
        match self {
            Agent::Authority(a) => Some(a),
            _ => None,
        }
    }

    pub(crate) fn on_command(&mut self, command: Command, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match (self, command) {
            (Agent::Holder(a), c) => a.on_command(c, ctx),
            (Agent::Provider(_), Command::RequestAudit { authority, regulation, evidence }) => {
                ctx.send(&authority, Payload::AuditRequest { regulation, evidence });
                Ok(())
            }
            (_, c) => Err(ctx.fail(format!("cannot carry out {c:?}"))),
        }
    }

    pub(crate) fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match self {
            Agent::Issuer(a) => a.on_message(from, payload, ctx),
            Agent::Holder(a) => a.on_message(from, payload, ctx),
            Agent::Verifier(a) => a.on_message(from, payload, ctx),
            Agent::Provider(a) => a.on_message(from, payload, ctx),
            Agent::Authority(a) => a.on_message(from, payload, ctx),
        }
    }
}

fn unexpected(ctx: &Ctx<'_>, from: &str, payload: &Payload) -> SimError {
    ctx.fail(format!("unexpected {} from {from}", payload.kind()))
}

/// Applies `envelope` with a verifier view built from the bulletin at `ctx`'s
/// clock.
fn apply(session: &mut NegotiationSession, envelope: &Envelope, ctx: &Ctx<'_>) -> Result<(), AgreementError> {
    let snapshots = ctx.bulletin.snapshots(ctx.clock);
    let env = Environment {
        verifier: VerifierContext::new(ctx.registry, &snapshots, ctx.clock),
        audit_roots: &ctx.bulletin.roots,
    };
    session.apply(envelope, &env)
}

/// Signs `body` into the session, applies it locally, and sends it to `peer`.
fn say(
    session: &mut NegotiationSession,
    keys: &KeyPair,
    role: Role,
    body: Message,
    peer: &str,
    ctx: &mut Ctx<'_>,
) -> Result<(), SimError> {
    let envelope = session.message(session.party(role), keys, body);
    send_envelope(session, envelope, peer, ctx)
}

fn send_envelope(session: &mut NegotiationSession, envelope: Envelope, peer: &str, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
    apply(session, &envelope, ctx).map_err(|e| ctx.fail(format!("own {} rejected: {e}", envelope.body.kind())))?;
    ctx.send(peer, Payload::Negotiation { envelope });
    Ok(())
}

fn ended(ctx: &mut Ctx<'_>, peer: &str, session: &NegotiationSession, stage: Phase, detail: String) {
    let event = Event::NegotiationEnded {
        label: ctx.label.to_owned(),
        peer: peer.to_owned(),
        session: session.id(),
        phase: session.phase(),
        stage,
        detail,
    };
    ctx.record(event);
}

/// Issues one schema to the subjects it has records for.
pub struct IssuerAgent {
    pub did: Did,
    pub keys: KeyPair,
    pub schema: String,
    pub options: IssueOptions,
    pub subjects: BTreeMap<Did, ClaimSet>,
}

impl IssuerAgent {
    pub fn new(did: Did, keys: KeyPair, schema: &str, options: IssueOptions) -> IssuerAgent {
        IssuerAgent { did, keys, schema: schema.to_owned(), options, subjects: BTreeMap::new() }
    }

    pub fn enroll(&mut self, subject: Did, claims: ClaimSet) {
        self.subjects.insert(subject, claims);
    }

    pub fn revocation_list(&self, registry: &Registry) -> RevocationList {
        RevocationList::new(self.did, &self.keys, registry).expect("issuer resolves")
    }

    pub fn issue_to(
        &self,
        subject: &Did,
        registry: &Registry,
        clock: Timestamp,
        rng: &mut dyn RngCore,
    ) -> Result<(Credential, DisclosureBundle), String> {
        let claims = self.subjects.get(subject).ok_or_else(|| format!("no records for {subject}"))?;
        issue(&self.keys, &self.did, subject, &self.schema, claims, &self.options, registry, clock, rng)
            .map_err(|e| e.to_string())
    }

    fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match payload {
            Payload::CredentialRequest { schema } => {
                let subject = ctx.did_of(from)?;
                let reply = if schema != self.schema {
                    Payload::Decision { accepted: false, detail: format!("{} does not issue {schema}", ctx.label) }
                } else {
                    match self.issue_to(&subject, ctx.registry, ctx.clock, ctx.rng) {
                        Ok((credential, bundle)) => Payload::CredentialOffer { credential, bundle },
                        Err(detail) => Payload::Decision { accepted: false, detail },
                    }
                };
                ctx.send(from, reply);
                Ok(())
            }
            other => Err(unexpected(ctx, from, &other)),
        }
    }
}

/// How a user answers a provider's open clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preferences {
    pub data_sharing: String,
    pub ad_personalization: bool,
}

/// A person with a wallet: requests credentials, presents them, negotiates
/// with providers, and checks artifacts.
pub struct HolderAgent {
    pub wallet: Wallet,
    pub preferences: Preferences,
    pub policy: Option<SessionPolicy>,
    pub artifact_anchors: TrustAnchorSet,
    pub address: String,
    pub sessions: BTreeMap<Nonce, (String, NegotiationSession)>,
    pub agreements: BTreeMap<String, RicardianAgreement>,
    pub receipts: BTreeMap<String, bool>,
    pub decisions: Vec<(String, bool)>,
    migration: Option<(String, String)>,
}

impl HolderAgent {
    pub fn new(did: Did, keys: KeyPair, preferences: Preferences) -> HolderAgent {
        HolderAgent {
            wallet: Wallet::new(did, keys),
            preferences,
            policy: None,
            artifact_anchors: TrustAnchorSet::new("artifacts"),
            address: mailbox_address(&did),
            sessions: BTreeMap::new(),
            agreements: BTreeMap::new(),
            receipts: BTreeMap::new(),
            decisions: Vec::new(),
            migration: None,
        }
    }

    fn on_command(&mut self, command: Command, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match command {
            Command::RequestCredential { issuer, schema } => ctx.send(&issuer, Payload::CredentialRequest { schema }),
            Command::RequestService { verifier, service } => ctx.send(&verifier, Payload::ServiceRequest { service }),
            Command::Negotiate { provider } => {
                let policy = self.policy.clone().ok_or_else(|| ctx.fail("no negotiation policy"))?;
                let mut id = [0u8; 32];
                ctx.rng.fill_bytes(&mut id);
                let mut session = NegotiationSession::new(Nonce(id), *self.wallet.owner(), ctx.did_of(&provider)?, policy)
                    .map_err(|e| ctx.fail(e))?;
                let envelope = identify(&session, Role::Initiator, &self.wallet, &[], ctx.clock, ctx.registry)
                    .map_err(|e| ctx.fail(e))?;
                send_envelope(&mut session, envelope, &provider, ctx)?;
                self.sessions.insert(session.id(), (provider, session));
            }
            Command::SubmitData { provider, records } => ctx.send(&provider, Payload::DataSubmission { records }),
            Command::Migrate { from, to } => {
                let new_provider = ctx.did_of(&to)?;
                ctx.send(&from, Payload::MigrationNotice { new_provider });
                self.migration = Some((from, to));
            }
            Command::RequestArtifact { from, kind } => ctx.send(&from, Payload::ArtifactRequest { kind }),
            c @ Command::RequestAudit { .. } => return Err(ctx.fail(format!("cannot carry out {c:?}"))),
        }
        Ok(())
    }

    fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match payload {
            Payload::CredentialOffer { credential, bundle } => {
                let schema = credential.schema.clone();
                let credential_id = credential.id.clone();
                self.wallet.store(credential, bundle, ctx.registry).map_err(|e| ctx.fail(e))?;
                let event = Event::CredentialStored {
                    holder: ctx.label.to_owned(),
                    issuer: from.to_owned(),
                    schema,
                    credential_id,
                };
                ctx.record(event);
            }
            Payload::PresentationRequest { request } => {
                let presentation =
                    self.wallet.build_presentation(&request, ctx.clock, ctx.registry).map_err(|e| ctx.fail(e))?;
                ctx.send(from, Payload::PresentationResponse { presentation });
            }
            Payload::Decision { accepted, .. } => self.decisions.push((from.to_owned(), accepted)),
            Payload::Negotiation { envelope } => self.on_envelope(from, envelope, ctx)?,
            Payload::AgreementReceipt { leaf_index, inclusion, root } => {
                let ok = self.agreements.get(from).is_some_and(|a| {
                    root.operator == ctx.did_of(from).unwrap_or(root.operator)
                        && root.verify_with(ctx.registry)
                        && verify_inclusion(&a.leaf(), leaf_index, &inclusion, &root)
                });
                self.receipts.insert(from.to_owned(), ok);
            }
            Payload::MailboxExport { address, messages, .. } => {
                let Some((old, new)) = self.migration.take().filter(|(old, _)| old == from) else {
                    return Err(unexpected(ctx, from, &Payload::MailboxExport { address, messages, obligations: vec![] }));
                };
                if address != self.address {
                    return Err(ctx.fail(format!("{old} exported {address}, not {}", self.address)));
                }
                ctx.send(&new, Payload::MailboxImport { address, messages });
            }
            Payload::ArtifactOffer { artifact, attestation, inclusion } => {
                let accepted = ctx.bulletin.roots.get(&attestation.log_id).is_some_and(|root| {
                    verify_artifact(&artifact, &attestation, &self.artifact_anchors, root, &inclusion, ctx.registry)
                });
                let event = Event::ArtifactChecked { label: ctx.label.to_owned(), source: from.to_owned(), accepted };
                ctx.record(event);
            }
            other => return Err(unexpected(ctx, from, &other)),
        }
        Ok(())
    }

    fn on_envelope(&mut self, from: &str, envelope: Envelope, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let keys = self.wallet.keys().clone();
        let Some((peer, session)) = self.sessions.get_mut(&envelope.session) else {
            return Err(ctx.fail("message for an unknown session"));
        };
        if peer != from {
            return Err(ctx.fail(format!("{from} spoke in a session with {peer}")));
        }
        let peer = peer.clone();
        let stage = session.phase();
        if let Err(e) = apply(session, &envelope, ctx) {
            if matches!(e, AgreementError::IdentificationFailed { .. }) && session.phase() != Phase::Aborted {
                say(session, &keys, Role::Initiator, Message::Abort { reason: e.to_string() }, &peer, ctx)?;
                ended(ctx, &peer, session, stage, e.to_string());
                return Ok(());
            }
            return Err(ctx.fail(format!("rejected {}: {e}", envelope.body.kind())));
        }
        match &envelope.body {
            Message::Propose { .. } | Message::Counter { .. } if session.phase() == Phase::Negotiating => {
                for id in session.open_clauses() {
                    let clause = &session.clauses()[&id];
                    if clause.proposer == Role::Initiator {
                        continue;
                    }
                    let body = match &clause.spec.kind {
                        ClauseKind::Choice { alternatives } => {
                            let pick = alternatives
                                .iter()
                                .find(|a| a.label == self.preferences.data_sharing)
                                .or(alternatives.first())
                                .map(|a| a.label.clone())
                                .unwrap_or_default();
                            Message::SelectChoice { clause: id.clone(), alternative: pick }
                        }
                        ClauseKind::Option { .. } => {
                            Message::RespondOption { clause: id.clone(), accept: self.preferences.ad_personalization }
                        }
                        ClauseKind::Fixed { .. } => continue,
                    };
                    say(session, &keys, Role::Initiator, body, &peer, ctx)?;
                }
                let accept = accept_message(session, Role::Initiator, &keys);
                send_envelope(session, accept, &peer, ctx)?;
            }
            Message::Sign { .. } if session.phase() == Phase::Agreed => {
                let sign = sign_message(session, Role::Initiator, &keys, ctx.registry).map_err(|e| ctx.fail(e))?;
                send_envelope(session, sign, &peer, ctx)?;
                let agreement = session.agreement().expect("signed").clone();
                let hash = agreement.hash.to_hex();
                self.agreements.insert(peer.clone(), agreement);
                ended(ctx, &peer, session, Phase::Agreed, hash);
            }
            Message::Abort { reason } => ended(ctx, &peer, session, stage, reason.clone()),
            _ => {}
        }
        Ok(())
    }
}

/// Grants a service to holders whose presentations satisfy its request.
pub struct VerifierAgent {
    pub did: Did,
    pub service: String,
    pub request: Vec<RequestItem>,
    pub anchors: TrustAnchorSet,
    pending: BTreeMap<String, (PresentationRequest, u64)>,
}

impl VerifierAgent {
    pub fn new(did: Did, service: &str, request: Vec<RequestItem>, anchors: TrustAnchorSet) -> VerifierAgent {
        VerifierAgent { did, service: service.to_owned(), request, anchors, pending: BTreeMap::new() }
    }

    fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match payload {
            Payload::ServiceRequest { service } if service == self.service => {
                let request = PresentationRequest::with_random_challenge(ctx.rng, self.request.clone());
                self.pending.insert(from.to_owned(), (request.clone(), ctx.step));
                ctx.send(from, Payload::PresentationRequest { request });
            }
            Payload::ServiceRequest { service } => {
                let detail = format!("{} offers {}, not {service}", ctx.label, self.service);
                ctx.send(from, Payload::Decision { accepted: false, detail });
            }
            Payload::PresentationResponse { presentation } => {
                let Some((request, requested_at)) = self.pending.remove(from) else {
                    return Err(ctx.fail(format!("unsolicited presentation from {from}")));
                };
                let snapshots = ctx.bulletin.snapshots(ctx.clock);
                let verifier = VerifierContext::new(ctx.registry, &snapshots, ctx.clock);
                let report = verify_presentation_in(&presentation, &request.challenge, &self.anchors, &verifier);
                let (accepted, disclosed, failures) = match report {
                    Ok(r) => {
                        let from_holder = ctx.did_of(from).is_ok_and(|d| d == presentation.holder);
                        let accepted = r.accepted() && r.satisfies_exactly(&request) && from_holder;
                        let disclosed = r.disclosed_names().into_iter().map(str::to_owned).collect();
                        let failures = r.failed().map(|c| format!("{:?}: {}", c.check, c.detail)).collect();
                        (accepted, disclosed, failures)
                    }
                    Err(e) => (false, BTreeSet::new(), vec![e.to_string()]),
                };
                let detail = if accepted { format!("{} granted", self.service) } else { failures.join("; ") };
                let event = Event::Verified {
                    verifier: ctx.label.to_owned(),
                    holder: from.to_owned(),
                    accepted,
                    disclosed,
                    failures,
                    requested_at,
                    decided_at: ctx.step,
                };
                ctx.record(event);
                ctx.send(from, Payload::Decision { accepted, detail });
            }
            other => return Err(unexpected(ctx, from, &other)),
        }
        Ok(())
    }
}

/// An artifact a provider serves, with the proof that its attestation is
/// logged.
#[derive(Debug, Clone)]
pub struct HostedArtifact {
    pub bytes: Vec<u8>,
    pub attestation: ArtifactAttestation,
    pub inclusion: InclusionProof,
}

/// A service provider: negotiates terms as responder, hosts mailboxes, runs an
/// AI service over the data users send it, and publishes artifacts.
pub struct ProviderAgent {
    pub wallet: Wallet,
    pub policy: SessionPolicy,
    pub template: Vec<ClauseSpec>,
    pub compliance: Vec<ComplianceMaterial>,
    pub sessions: BTreeMap<Nonce, (String, NegotiationSession)>,
    pub log: OperatedLog,
    pub model: AiServiceModel,
    pub mailboxes: BTreeMap<String, Vec<String>>,
    pub artifacts: BTreeMap<ArtifactKind, HostedArtifact>,
}

impl ProviderAgent {
    pub fn new(did: Did, keys: KeyPair, policy: SessionPolicy, template: Vec<ClauseSpec>, program: Digest) -> ProviderAgent {
        ProviderAgent {
            wallet: Wallet::new(did, keys),
            policy,
            template,
            compliance: Vec::new(),
            sessions: BTreeMap::new(),
            log: OperatedLog::new(did),
            model: AiServiceModel::new(program, "no recommendation"),
            mailboxes: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn did(&self) -> Did {
        *self.wallet.owner()
    }

    fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let sender = ctx.did_of(from)?;
        match payload {
            Payload::Negotiation { envelope } => self.on_envelope(from, envelope, ctx)?,
            Payload::DataSubmission { records } => {
                if records.iter().any(|r| r.owner != sender) {
                    return Err(ctx.fail(format!("{from} submitted someone else's records")));
                }
                let admitted = if self.model.may_train_on(&sender) { records.len() } else { 0 };
                let event = Event::DataIngested {
                    provider: ctx.label.to_owned(),
                    owner: from.to_owned(),
                    admitted,
                    excluded: records.len() - admitted,
                };
                self.model.ingest(records);
                ctx.record(event);
            }
            Payload::MigrationNotice { .. } => {
                let agreement = self.model.agreement(&sender).ok_or_else(|| ctx.fail(format!("no agreement with {from}")))?;
                let obligations = evaluate_terms(agreement, ACCOUNT_MIGRATION).map_err(|e| ctx.fail(e))?;
                let address = mailbox_address(&sender);
                let messages = if obligations.contains(&Obligation::ExportData) {
                    self.mailboxes.get(&address).cloned().unwrap_or_default()
                } else {
                    Vec::new()
                };
                if obligations.contains(&Obligation::CeaseDataUse) {
                    self.mailboxes.remove(&address);
                    self.model.purge(&sender);
                }
                let event = Event::DataUseCeased {
                    provider: ctx.label.to_owned(),
                    owner: from.to_owned(),
                    obligations: obligations.clone(),
                };
                ctx.record(event);
                ctx.send(from, Payload::MailboxExport { address, messages, obligations });
            }
            Payload::MailboxImport { address, messages } => {
                if self.model.agreement(&sender).is_none() || address != mailbox_address(&sender) {
                    return Err(ctx.fail(format!("refusing import of {address} from {from}")));
                }
                let event =
                    Event::MailboxOpened { provider: ctx.label.to_owned(), address: address.clone(), messages: messages.len() };
                self.mailboxes.entry(address).or_default().extend(messages);
                ctx.record(event);
            }
            Payload::AuditResult { record, credential, inclusion } => {
                if let Some((credential, bundle)) = credential {
                    let credential_id = credential.id.clone();
                    self.wallet.store(credential, bundle, ctx.registry).map_err(|e| ctx.fail(e))?;
                    self.compliance.push(ComplianceMaterial { credential_id, record, inclusion });
                }
            }
            Payload::Decision { .. } => {}
            Payload::ArtifactRequest { kind } => match self.artifacts.get(&kind) {
                Some(hosted) => {
                    let inclusion = if hosted.attestation.log_id == self.did() {
                        self.log.prove_inclusion(hosted.attestation.leaf_index).map_err(|e| ctx.fail(e))?
                    } else {
                        hosted.inclusion.clone()
                    };
                    let offer = Payload::ArtifactOffer {
                        artifact: hosted.bytes.clone(),
                        attestation: hosted.attestation.clone(),
                        inclusion,
                    };
                    ctx.send(from, offer);
                }
                None => ctx.send(from, Payload::Decision { accepted: false, detail: format!("no {kind} here") }),
            },
            other => return Err(unexpected(ctx, from, &other)),
        }
        Ok(())
    }

    fn on_envelope(&mut self, from: &str, envelope: Envelope, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        let keys = self.wallet.keys().clone();
        let me = self.did();
        if !self.sessions.contains_key(&envelope.session) {
            if !matches!(envelope.body, Message::Identify { .. }) {
                return Err(ctx.fail("session must open with identification"));
            }
            let session = NegotiationSession::new(envelope.session, ctx.did_of(from)?, me, self.policy.clone())
                .map_err(|e| ctx.fail(e))?;
            self.sessions.insert(envelope.session, (from.to_owned(), session));
        }
        let (peer, session) = self.sessions.get_mut(&envelope.session).expect("inserted above");
        if peer != from {
            return Err(ctx.fail(format!("{from} spoke in a session with {peer}")));
        }
        let peer = peer.clone();
        let stage = session.phase();
        if let Err(e) = apply(session, &envelope, ctx) {
            if matches!(e, AgreementError::IdentificationFailed { .. }) {
                say(session, &keys, Role::Responder, Message::Abort { reason: e.to_string() }, &peer, ctx)?;
                ended(ctx, &peer, session, stage, e.to_string());
                return Ok(());
            }
            return Err(ctx.fail(format!("rejected {}: {e}", envelope.body.kind())));
        }
        match &envelope.body {
            Message::Identify { .. } => {
                let own = identify(session, Role::Responder, &self.wallet, &self.compliance, ctx.clock, ctx.registry)
                    .map_err(|e| ctx.fail(e))?;
                // The initiator judges our identification; a rejection here
                // just means the peer will abort.
                if apply(session, &own, ctx).is_ok() {
                    ctx.send(&peer, Payload::Negotiation { envelope: own });
                    say(session, &keys, Role::Responder, Message::Propose { clauses: self.template.clone() }, &peer, ctx)?;
                } else {
                    ctx.send(&peer, Payload::Negotiation { envelope: own });
                }
            }
            Message::AcceptAll { .. } if !session.acceptances().contains(&Role::Responder) => {
                let accept = accept_message(session, Role::Responder, &keys);
                send_envelope(session, accept, &peer, ctx)?;
                let sign = sign_message(session, Role::Responder, &keys, ctx.registry).map_err(|e| ctx.fail(e))?;
                send_envelope(session, sign, &peer, ctx)?;
            }
            Message::Sign { .. } if session.phase() == Phase::Signed => {
                let agreement = session.agreement().expect("signed").clone();
                let owner = session.party(Role::Initiator);
                let leaf_index = self.log.append(agreement.leaf());
                let root = self.log.signed_root(&keys);
                ctx.bulletin.roots.insert(me, root.clone());
                let inclusion = self.log.prove_inclusion(leaf_index).map_err(|e| ctx.fail(e))?;
                let address = mailbox_address(&owner);
                self.mailboxes.entry(address.clone()).or_insert_with(|| vec![format!("welcome to {}", ctx.label)]);
                ended(ctx, &peer, session, Phase::Agreed, agreement.hash.to_hex());
                let event = Event::AgreementLogged {
                    operator: ctx.label.to_owned(),
                    counterparty: peer.clone(),
                    hash: agreement.hash,
                    leaf_index,
                };
                ctx.record(event);
                self.model.set_agreement(owner, agreement);
                ctx.send(&peer, Payload::AgreementReceipt { leaf_index, inclusion, root });
            }
            Message::Abort { reason } => ended(ctx, &peer, session, stage, reason.clone()),
            _ => {}
        }
        Ok(())
    }
}

/// Audits providers against the regulations it owns and logs every verdict.
pub struct AuthorityAgent {
    pub did: Did,
    pub keys: KeyPair,
    pub regulations: Vec<Regulation>,
    pub log: OperatedLog,
}

impl AuthorityAgent {
    pub fn new(did: Did, keys: KeyPair, regulations: Vec<Regulation>) -> AuthorityAgent {
        AuthorityAgent { did, keys, regulations, log: OperatedLog::new(did) }
    }

    fn on_message(&mut self, from: &str, payload: Payload, ctx: &mut Ctx<'_>) -> Result<(), SimError> {
        match payload {
            Payload::AuditRequest { regulation, evidence } => {
                let Some(reg) = self.regulations.iter().find(|r| r.id == regulation) else {
                    let detail = format!("{} does not audit {regulation}", ctx.label);
                    ctx.send(from, Payload::Decision { accepted: false, detail });
                    return Ok(());
                };
                let provider = ctx.did_of(from)?;
                let outcome = conduct_audit(
                    &self.did,
                    &self.keys,
                    &provider,
                    reg,
                    &evidence,
                    &mut self.log,
                    ctx.registry,
                    ctx.clock,
                    ctx.rng,
                );
                let outcome = match outcome {
                    Ok(o) => o,
                    Err(e) => {
                        ctx.send(from, Payload::Decision { accepted: false, detail: e.to_string() });
                        return Ok(());
                    }
                };
                ctx.bulletin.roots.insert(self.did, self.log.signed_root(&self.keys));
                let inclusion = self.log.prove_inclusion(outcome.record.leaf_index).map_err(|e| ctx.fail(e))?;
                let event = Event::Audited {
                    authority: ctx.label.to_owned(),
                    provider: from.to_owned(),
                    regulation,
                    verdict: outcome.record.verdict,
                    leaf_index: outcome.record.leaf_index,
                };
                ctx.record(event);
                let reply = Payload::AuditResult { record: outcome.record, credential: outcome.credential, inclusion };
                ctx.send(from, reply);
            }
            other => return Err(unexpected(ctx, from, &other)),
        }
        Ok(())
    }
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}({})", self.role(), self.did())
    }
}
