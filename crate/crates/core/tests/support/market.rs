//! A user, an email provider, their issuers, and an audit authority, wired up
//! for negotiation tests.

use std::collections::{BTreeMap, BTreeSet};

use didtrust_core::agreements::{
    accept_message, sign_message, start_session, two_clause_template, ClauseEdit, ComplianceMaterial,
    ComplianceRequirement, Environment, Message, NegotiationSession, Participant, Phase, Role, SessionPolicy,
    AD_PERSONALIZATION, DATA_SHARING,
};
use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{issue, ClaimSet, ClaimValue, IssueOptions, Predicate, RevocationList};
use didtrust_core::digest::{Digest, Nonce};
use didtrust_core::governance::{conduct_audit, shipped_regulations, Evidence, CONSENT_REGULATION};
use didtrust_core::identity::{generate_did, Did, KeyPair, Registry, Signature};
use didtrust_core::verification::{RevocationSnapshots, TrustAnchorSet, VerifierContext};
use didtrust_core::vlog::{OperatedLog, SignedRoot};
use didtrust_core::wallet::{ClaimRequirement, RequestItem, Wallet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Party {
    pub did: Did,
    pub keys: KeyPair,
}

fn party(registry: &Registry, seed: u8) -> Party {
    let (did, keys, doc) = generate_did(&[seed; 32]).unwrap();
    registry.register(doc).unwrap();
    Party { did, keys }
}

pub struct Market {
    pub registry: Registry,
    pub government: Party,
    pub chamber: Party,
    pub authority: Party,
    pub user: Party,
    pub provider: Party,
    pub stranger: Party,
    pub user_wallet: Wallet,
    pub provider_wallet: Wallet,
    pub snapshots: RevocationSnapshots,
    pub audit_log: OperatedLog,
    pub audit_roots: BTreeMap<Did, SignedRoot>,
    pub material: Vec<ComplianceMaterial>,
    pub now: Timestamp,
}

impl Market {
    /// With `audited`, the provider has passed the consent audit and holds the
    /// compliance credential.
    pub fn new(audited: bool) -> Market {
        let registry = Registry::in_memory();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let government = party(&registry, 10);
        let chamber = party(&registry, 11);
        let authority = party(&registry, 12);
        let user = party(&registry, 13);
        let provider = party(&registry, 14);
        let stranger = party(&registry, 15);
        let now = Timestamp(1500);

        let id_claims = ClaimSet::from_pairs([
            ("name", ClaimValue::text("Robin Roe")),
            ("birthdate", ClaimValue::date(1990, 3, 4)),
        ])
        .unwrap();
        let options = IssueOptions { expires_at: None, predicates: vec![Predicate::age_over(18)] };
        let (c, b) = issue(
            &government.keys, &government.did, &user.did, "government_id", &id_claims, &options, &registry, now, &mut rng,
        )
        .unwrap();
        let mut user_wallet = Wallet::new(user.did, user.keys.clone());
        user_wallet.store(c, b, &registry).unwrap();

        let reg_claims = ClaimSet::from_pairs([("legal_name", ClaimValue::text("Mailbox Ltd"))]).unwrap();
        let (c, b) = issue(
            &chamber.keys,
            &chamber.did,
            &provider.did,
            "business_registration",
            &reg_claims,
            &IssueOptions::default(),
            &registry,
            now,
            &mut rng,
        )
        .unwrap();
        let mut provider_wallet = Wallet::new(provider.did, provider.keys.clone());
        provider_wallet.store(c, b, &registry).unwrap();

        let mut audit_log = OperatedLog::new(authority.did);
        let mut material = Vec::new();
        if audited {
            let regulation = shipped_regulations(authority.did).into_iter().find(|r| r.id == CONSENT_REGULATION).unwrap();
            let evidence = Evidence::new().with(
                "consent",
                [("records_with_consent", ClaimValue::Integer(12)), ("records_total", ClaimValue::Integer(12))],
            );
            let outcome = conduct_audit(
                &authority.did, &authority.keys, &provider.did, &regulation, &evidence, &mut audit_log, &registry, now,
                &mut rng,
            )
            .unwrap();
            let (c, b) = outcome.credential.unwrap();
            let credential_id = c.id.clone();
            provider_wallet.store(c, b, &registry).unwrap();
            material.push(ComplianceMaterial {
                credential_id,
                inclusion: audit_log.prove_inclusion(outcome.record.leaf_index).unwrap(),
                record: outcome.record,
            });
        }
        let mut audit_roots = BTreeMap::new();
        audit_roots.insert(authority.did, audit_log.signed_root(&authority.keys));

        let mut snapshots = RevocationSnapshots::default();
        for p in [&government, &chamber, &authority] {
            snapshots.insert(RevocationList::new(p.did, &p.keys, &registry).unwrap(), now);
        }

        Market {
            registry,
            government,
            chamber,
            authority,
            user,
            provider,
            stranger,
            user_wallet,
            provider_wallet,
            snapshots,
            audit_log,
            audit_roots,
            material,
            now,
        }
    }

    /// User initiates; provider responds. With `require_compliance`, the
    /// provider must prove the consent audit.
    pub fn policy(&self, require_compliance: bool) -> SessionPolicy {
        SessionPolicy {
            initiator_request: vec![RequestItem::new(
                "government_id",
                vec![ClaimRequirement::equals("age_over_18", ClaimValue::Boolean(true))],
            )],
            initiator_anchors: TrustAnchorSet::new("provider").with("government_id", self.government.did),
            responder_request: vec![RequestItem::new("business_registration", vec![ClaimRequirement::any("legal_name")])],
            responder_anchors: TrustAnchorSet::new("user").with("business_registration", self.chamber.did),
            compliance: if require_compliance {
                vec![ComplianceRequirement { role: Role::Responder, regulation: CONSENT_REGULATION.into() }]
            } else {
                vec![]
            },
            authority_anchors: TrustAnchorSet::new("regulators").with("compliance", self.authority.did),
        }
    }

    pub fn env(&self) -> Environment<'_> {
        Environment {
            verifier: VerifierContext::new(&self.registry, &self.snapshots, self.now),
            audit_roots: &self.audit_roots,
        }
    }

    pub fn keys(&self, role: Role) -> &KeyPair {
        match role {
            Role::Initiator => &self.user.keys,
            Role::Responder => &self.provider.keys,
        }
    }

    pub fn identified(&self, id: Nonce, require_compliance: bool) -> NegotiationSession {
        start_session(
            id,
            Participant { wallet: &self.user_wallet, compliance: &[] },
            Participant { wallet: &self.provider_wallet, compliance: &self.material },
            self.policy(require_compliance),
            &self.env(),
        )
        .unwrap()
    }

    /// Applies `body` from `role`, panicking on rejection.
    pub fn send(&self, session: &mut NegotiationSession, role: Role, body: Message) {
        let e = session.message(session.party(role), self.keys(role), body);
        session.apply(&e, &self.env()).unwrap_or_else(|err| panic!("{role} message rejected: {err}"));
    }

    pub fn accept(&self, session: &mut NegotiationSession, role: Role) {
        let e = accept_message(session, role, self.keys(role));
        session.apply(&e, &self.env()).unwrap();
    }

    pub fn sign(&self, session: &mut NegotiationSession, role: Role) {
        let e = sign_message(session, role, self.keys(role), &self.registry).unwrap();
        session.apply(&e, &self.env()).unwrap();
    }
}

/// Drives an identified session to Signed along a randomized path whose
/// resolved clause set is always: data sharing `none`, personalized ads
/// rejected, and every fixed clause of `template` kept.
pub fn random_negotiation(
    market: &Market,
    mut session: NegotiationSession,
    template: &[didtrust_core::agreements::ClauseSpec],
    rng: &mut ChaCha20Rng,
) -> NegotiationSession {
    let provider = Role::Responder;
    let user = Role::Initiator;
    let mut pending: Vec<_> = template.to_vec();
    pending.shuffle(rng);
    let first = rng.gen_range(1..=pending.len());
    let rest = pending.split_off(first);
    market.send(&mut session, provider, Message::Propose { clauses: pending });
    let mut rest = rest;

    // A detour: the user first picks a different data-sharing level, and the
    // provider re-offers the choice, which reopens it.
    let mut detour = rng.gen_bool(0.5);
    loop {
        let open: Vec<String> = session.open_clauses();
        let mut moves: Vec<u8> = Vec::new();
        if !rest.is_empty() {
            moves.push(0);
        }
        if !open.is_empty() {
            moves.push(1);
        }
        if moves.is_empty() {
            break;
        }
        match *moves.choose(rng).unwrap() {
            0 => {
                let take = rng.gen_range(1..=rest.len());
                let added: Vec<ClauseEdit> = rest.drain(..take).map(|clause| ClauseEdit::Add { clause }).collect();
                market.send(&mut session, provider, Message::Counter { edits: added });
            }
            _ => {
                let id = open.choose(rng).unwrap().clone();
                if id == DATA_SHARING {
                    if detour {
                        detour = false;
                        let wrong = ["aggregate", "full"].choose(rng).unwrap();
                        market.send(&mut session, user, Message::SelectChoice { clause: id.clone(), alternative: (*wrong).into() });
                        let spec = template.iter().find(|c| c.id == DATA_SHARING).unwrap().clone();
                        market.send(&mut session, provider, Message::Counter { edits: vec![ClauseEdit::Replace { clause: spec }] });
                    } else {
                        market.send(&mut session, user, Message::SelectChoice { clause: id, alternative: "none".into() });
                    }
                } else if id == AD_PERSONALIZATION {
                    market.send(&mut session, user, Message::RespondOption { clause: id, accept: false });
                }
            }
        }
    }
    let mut order = Role::BOTH;
    order.shuffle(rng);
    for r in order {
        market.accept(&mut session, r);
    }
    order.shuffle(rng);
    for r in order {
        market.sign(&mut session, r);
    }
    assert_eq!(session.phase(), Phase::Signed);
    session
}

pub fn default_template() -> Vec<didtrust_core::agreements::ClauseSpec> {
    two_clause_template()
}

/// Outcome of an exhaustive exploration.
#[derive(Debug, Default)]
pub struct ModelCheck {
    pub states: usize,
    pub transitions: usize,
    pub signed_states: usize,
    pub violations: Vec<String>,
}

/// Every message the explorer may send in a state: honest moves from both
/// parties, malformed variants, messages from a third party, and messages
/// claiming a party's DID but signed with the wrong key.
pub fn alphabet(market: &Market, session: &NegotiationSession, identify: &BTreeMap<Role, Message>, bad_identify: &Message) -> Vec<(bool, didtrust_core::agreements::Envelope)> {
    let template = default_template();
    let draft_hash = session.draft().map(|d| d.hash).unwrap_or(Digest::ZERO);
    let bodies = |role: Role| -> Vec<(bool, Message)> {
        let sig = market.keys(role).sign(&didtrust_core::agreements::agreement_signing_payload(&draft_hash));
        vec![
            (true, identify[&role].clone()),
            (false, bad_identify.clone()),
            (true, Message::Propose { clauses: template.clone() }),
            (true, Message::Counter { edits: vec![ClauseEdit::Replace { clause: template[1].clone() }] }),
            (true, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "none".into() }),
            (false, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "everything".into() }),
            (true, Message::RespondOption { clause: AD_PERSONALIZATION.into(), accept: false }),
            (true, Message::RespondOption { clause: AD_PERSONALIZATION.into(), accept: true }),
            (true, Message::AcceptAll { terms: session.terms_digest() }),
            (false, Message::AcceptAll { terms: Digest::ZERO }),
            (true, Message::Sign { key_version: 1, signature: sig }),
            (false, Message::Sign { key_version: 1, signature: Signature([7; 64]) }),
            (true, Message::Abort { reason: "walk away".into() }),
        ]
    };
    let seq = session.history().len() as u64;
    let mut out = Vec::new();
    for role in Role::BOTH {
        let did = session.party(role);
        for (honest, body) in bodies(role) {
            out.push((honest, session.message(did, market.keys(role), body.clone())));
            out.push((false, session.message(did, &market.stranger.keys, body.clone())));
            out.push((false, session.message(market.stranger.did, &market.stranger.keys, body.clone())));
        }
        let skip = Message::Abort { reason: "early".into() };
        out.push((false, didtrust_core::agreements::Envelope::seal(session.id(), did, seq + 1, skip, market.keys(role))));
    }
    out
}

/// Explores every accepted message sequence of length at most `depth` from
/// `start`. A rejected message leaves the session unchanged, so any sequence
/// containing one reaches a state already reached by a shorter sequence;
/// exploring accepted extensions therefore covers all sequences.
pub fn model_check(market: &Market, start: &NegotiationSession, depth: usize) -> ModelCheck {
    let mut identify = BTreeMap::new();
    for role in Role::BOTH {
        let wallet = if role == Role::Initiator { &market.user_wallet } else { &market.provider_wallet };
        let compliance = if role == Role::Responder { market.material.as_slice() } else { &[] };
        let e = didtrust_core::agreements::identify(start, role, wallet, compliance, market.now, &market.registry).unwrap();
        identify.insert(role, e.body);
    }
    // The user's presentation answering the provider's challenge.
    let bad_identify = {
        let request = start.identification_request(Role::Responder);
        let mut request = request;
        request.items = start.identification_request(Role::Initiator).items;
        let presentation = market.user_wallet.build_presentation(&request, market.now, &market.registry).unwrap();
        Message::Identify { presentation, compliance: vec![] }
    };
    let valid_presentations: BTreeSet<Digest> = identify
        .values()
        .map(|m| match m {
            Message::Identify { presentation, .. } => presentation.digest(),
            _ => unreachable!(),
        })
        .collect();

    let mut result = ModelCheck::default();
    let mut seen: BTreeSet<(Digest, usize)> = BTreeSet::new();
    let mut stack = vec![(start.clone(), 0usize)];
    let env = market.env();
    while let Some((session, d)) = stack.pop() {
        if !seen.insert((session.state_digest(), d)) {
            continue;
        }
        result.states += 1;
        if session.phase() == Phase::Signed {
            result.signed_states += 1;
            check_signed(market, &session, &valid_presentations, &mut result.violations);
        }
        if d == depth {
            continue;
        }
        for (honest, envelope) in alphabet(market, &session, &identify, &bad_identify) {
            let mut next = session.clone();
            match next.apply(&envelope, &env) {
                Ok(()) => {
                    result.transitions += 1;
                    if !honest {
                        result.violations.push(format!("accepted a forged, malformed, or out-of-order {}", envelope.body.kind()));
                    }
                    if next.phase() != session.phase() && !session.phase().may_advance_to(next.phase()) {
                        result.violations.push(format!("illegal transition {:?} -> {:?}", session.phase(), next.phase()));
                    }
                    stack.push((next, d + 1));
                }
                Err(_) => {
                    if next != session {
                        result.violations.push(format!("rejected {} changed the session", envelope.body.kind()));
                    }
                }
            }
        }
    }
    result
}

fn check_signed(market: &Market, s: &NegotiationSession, valid: &BTreeSet<Digest>, out: &mut Vec<String>) {
    for role in Role::BOTH {
        match s.identification(role) {
            Some(i) if valid.contains(&i.presentation) => {}
            _ => out.push(format!("signed without a verified {role} identification")),
        }
    }
    if !s.open_clauses().is_empty() || s.clauses().is_empty() {
        out.push("signed with unresolved clauses".into());
    }
    match s.agreement() {
        Some(a) if a.signatures.len() == 2 && a.verify(&market.registry).is_ok() => {}
        _ => out.push("signed without two valid signatures".into()),
    }
}
