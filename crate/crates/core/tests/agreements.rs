#[allow(dead_code)]
#[path = "support/market.rs"]
mod market;

use std::collections::BTreeSet;

use didtrust_core::agreements::{
    email_service_template, evaluate_terms, finalize_and_sign, history_digest, identify, start_session,
    two_clause_template, AgreementError, ClauseEdit, Message, NegotiationSession, Obligation, Participant, Phase,
    RicardianAgreement, Role, ACCOUNT_MIGRATION, AD_PERSONALIZATION, DATA_EXPORT, DATA_SHARING, MODEL_TRAINING,
};
use didtrust_core::canonical::canonical_bytes;
use didtrust_core::digest::Nonce;
use didtrust_core::vlog::{verify_inclusion, OperatedLog};
use market::{model_check, random_negotiation, Market};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const SESSION: Nonce = Nonce([0x51; 32]);

fn proposed(m: &Market) -> NegotiationSession {
    let mut s = m.identified(SESSION, false);
    m.send(&mut s, Role::Responder, Message::Propose { clauses: two_clause_template() });
    s
}

fn agreed(m: &Market, sharing: &str, ads: bool) -> NegotiationSession {
    let mut s = proposed(m);
    m.send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: sharing.into() });
    m.send(&mut s, Role::Initiator, Message::RespondOption { clause: AD_PERSONALIZATION.into(), accept: ads });
    m.accept(&mut s, Role::Responder);
    m.accept(&mut s, Role::Initiator);
    assert_eq!(s.phase(), Phase::Agreed);
    s
}

#[test]
fn mutual_identification_reaches_identified() {
    let m = Market::new(false);
    let s = m.identified(SESSION, false);
    assert_eq!(s.phase(), Phase::Identified);
    assert!(s.identification(Role::Initiator).is_some());
    assert!(s.identification(Role::Responder).is_some());
    assert_eq!(s.history().len(), 2);
}

#[test]
fn third_party_messages_leave_the_session_unchanged() {
    let m = Market::new(false);
    let s = NegotiationSession::new(SESSION, m.user.did, m.provider.did, m.policy(false)).unwrap();
    let good = identify(&s, Role::Initiator, &m.user_wallet, &[], m.now, &m.registry).unwrap();
    let mut intruder = s.clone();
    let from_stranger = s.message(m.stranger.did, &m.stranger.keys, good.body.clone());
    assert!(matches!(intruder.apply(&from_stranger, &m.env()), Err(AgreementError::Unauthorized(_))));
    let forged = s.message(m.user.did, &m.stranger.keys, good.body.clone());
    assert!(matches!(intruder.apply(&forged, &m.env()), Err(AgreementError::Unauthorized(_))));
    assert_eq!(intruder, s);
}

#[test]
fn compliance_policy_blocks_unaudited_providers() {
    let m = Market::new(false);
    let err = start_session(
        SESSION,
        Participant { wallet: &m.user_wallet, compliance: &[] },
        Participant { wallet: &m.provider_wallet, compliance: &[] },
        m.policy(true),
        &m.env(),
    )
    .unwrap_err();
    assert!(matches!(err, AgreementError::IdentificationFailed { role: Role::Responder, .. }), "{err}");

    let audited = Market::new(true);
    assert_eq!(audited.identified(SESSION, true).phase(), Phase::Identified);
    let s = audited.identified(SESSION, true);
    assert_eq!(s.identification(Role::Responder).unwrap().compliance.len(), 1);
}

#[test]
fn choice_and_option_rules() {
    let m = Market::new(false);
    let mut s = proposed(&m);
    let env = m.env();
    let try_send = |s: &mut NegotiationSession, role: Role, body: Message| {
        let e = s.message(s.party(role), m.keys(role), body);
        s.apply(&e, &env)
    };
    assert!(matches!(
        try_send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "some".into() }),
        Err(AgreementError::UnknownAlternative { .. })
    ));
    assert!(matches!(
        try_send(&mut s, Role::Responder, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "full".into() }),
        Err(AgreementError::Unauthorized(_))
    ));
    assert!(matches!(
        try_send(&mut s, Role::Initiator, Message::SelectChoice { clause: "nope".into(), alternative: "full".into() }),
        Err(AgreementError::UnknownClause(_))
    ));
    assert!(matches!(
        try_send(&mut s, Role::Initiator, Message::RespondOption { clause: DATA_SHARING.into(), accept: true }),
        Err(AgreementError::KindMismatch { .. })
    ));
    try_send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "none".into() })
        .unwrap();
    assert!(matches!(
        try_send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "full".into() }),
        Err(AgreementError::AlreadyResolved(_))
    ));
    let terms = s.terms_digest();
    assert!(matches!(
        try_send(&mut s, Role::Initiator, Message::AcceptAll { terms }),
        Err(AgreementError::IncompleteTerms(open)) if open == vec![AD_PERSONALIZATION.to_owned()]
    ));
}

#[test]
fn counters_reopen_and_reset_acceptance() {
    let m = Market::new(false);
    let mut s = proposed(&m);
    m.send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "full".into() });
    m.send(&mut s, Role::Initiator, Message::RespondOption { clause: AD_PERSONALIZATION.into(), accept: true });
    m.accept(&mut s, Role::Responder);
    assert_eq!(s.acceptances().len(), 1);
    m.send(&mut s, Role::Initiator, Message::Counter { edits: vec![ClauseEdit::Remove { id: AD_PERSONALIZATION.into() }] });
    assert!(s.acceptances().is_empty());
    assert_eq!(s.clauses().len(), 1);
    let stale = Message::AcceptAll { terms: didtrust_core::digest::Digest::ZERO };
    let e = s.message(m.user.did, &m.user.keys, stale);
    assert_eq!(s.clone().apply(&e, &m.env()), Err(AgreementError::StaleTerms));
}

#[test]
fn signing_requires_resolved_terms_and_the_right_phase() {
    let m = Market::new(false);
    let mut log = OperatedLog::new(m.authority.did);
    let mut s = proposed(&m);
    let err = finalize_and_sign(&mut s, &m.user.keys, &m.provider.keys, &m.env(), &mut log).unwrap_err();
    assert!(matches!(err, AgreementError::IncompleteTerms(_)));

    let mut s = agreed(&m, "none", false);
    let (agreement, index) = finalize_and_sign(&mut s, &m.user.keys, &m.provider.keys, &m.env(), &mut log).unwrap();
    assert_eq!(s.phase(), Phase::Signed);
    agreement.verify(&m.registry).unwrap();
    let root = log.signed_root(&m.authority.keys);
    assert!(verify_inclusion(&agreement.leaf(), index, &log.prove_inclusion(index).unwrap(), &root));

    let late = s.message(m.provider.did, &m.provider.keys, Message::Counter { edits: vec![] });
    assert!(matches!(s.clone().apply(&late, &m.env()), Err(AgreementError::WrongPhase { phase: Phase::Signed, .. })));
    let err = finalize_and_sign(&mut s, &m.user.keys, &m.provider.keys, &m.env(), &mut log).unwrap_err();
    assert!(matches!(err, AgreementError::WrongPhase { .. }));
}

#[test]
fn abort_is_terminal() {
    let m = Market::new(false);
    let mut s = proposed(&m);
    m.send(&mut s, Role::Initiator, Message::Abort { reason: "no".into() });
    assert_eq!(s.phase(), Phase::Aborted);
    let e = s.message(m.provider.did, &m.provider.keys, Message::Propose { clauses: two_clause_template() });
    assert!(matches!(s.apply(&e, &m.env()), Err(AgreementError::WrongPhase { .. })));
}

#[test]
fn history_digest_covers_every_message() {
    let m = Market::new(false);
    let s = agreed(&m, "aggregate", true);
    assert_eq!(history_digest(s.history()), s.history_digest());
    let mut replaced = s.history().to_vec();
    replaced[3] = s.history()[4].clone();
    assert_ne!(history_digest(&replaced), s.history_digest());
}

#[test]
fn terms_evaluate_to_obligations() {
    let m = Market::new(false);
    let mut log = OperatedLog::new(m.authority.did);
    let sign = |sharing: &str, ads: bool, log: &mut OperatedLog| -> RicardianAgreement {
        let mut s = agreed(&m, sharing, ads);
        finalize_and_sign(&mut s, &m.user.keys, &m.provider.keys, &m.env(), log).unwrap().0
    };
    let none = sign("none", false, &mut log);
    assert_eq!(evaluate_terms(&none, DATA_EXPORT).unwrap(), vec![Obligation::Deny]);
    assert_eq!(evaluate_terms(&none, MODEL_TRAINING).unwrap(), vec![Obligation::Deny]);
    assert_eq!(evaluate_terms(&none, AD_PERSONALIZATION).unwrap(), vec![Obligation::Deny]);
    assert_eq!(evaluate_terms(&none, ACCOUNT_MIGRATION).unwrap(), vec![Obligation::CeaseDataUse]);
    let aggregate = sign("aggregate", true, &mut log);
    assert_eq!(evaluate_terms(&aggregate, DATA_EXPORT).unwrap(), vec![Obligation::AllowAggregated]);
    assert_eq!(evaluate_terms(&aggregate, AD_PERSONALIZATION).unwrap(), vec![Obligation::Allow]);
    assert!(matches!(evaluate_terms(&aggregate, "weather"), Err(AgreementError::UnknownEvent(_))));
    assert!(none.text.contains("Selected: none."));
    assert!(!none.text.contains("Personalized advertising"));
}

#[test]
fn rendering_ignores_message_order() {
    let m = Market::new(false);
    let base = m.identified(SESSION, false);
    let template = email_service_template();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut hashes = BTreeSet::new();
    let mut texts = BTreeSet::new();
    for _ in 0..20 {
        let s = random_negotiation(&m, base.clone(), &template, &mut rng);
        let a = s.agreement().unwrap();
        hashes.insert(a.hash);
        texts.insert(a.text.clone());
    }
    assert_eq!(hashes.len(), 1);
    assert_eq!(texts.len(), 1);
}

#[test]
fn single_byte_mutations_of_an_agreement_never_verify() {
    use rand::Rng;
    let m = Market::new(true);
    let mut s = m.identified(SESSION, true);
    m.send(&mut s, Role::Responder, Message::Propose { clauses: two_clause_template() });
    m.send(&mut s, Role::Initiator, Message::SelectChoice { clause: DATA_SHARING.into(), alternative: "none".into() });
    m.send(&mut s, Role::Initiator, Message::RespondOption { clause: AD_PERSONALIZATION.into(), accept: false });
    m.accept(&mut s, Role::Initiator);
    m.accept(&mut s, Role::Responder);
    let mut log = OperatedLog::new(m.authority.did);
    let (agreement, _) = finalize_and_sign(&mut s, &m.user.keys, &m.provider.keys, &m.env(), &mut log).unwrap();
    let bytes = canonical_bytes(&agreement);
    assert!(RicardianAgreement::from_canonical(&bytes).unwrap().verify(&m.registry).is_ok());
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let mut b = bytes.clone();
        let i = rng.gen_range(0..b.len());
        b[i] ^= rng.gen_range(1..=255u8);
        let ok = RicardianAgreement::from_canonical(&b).is_ok_and(|a| a.verify(&m.registry).is_ok());
        assert!(!ok, "mutation at {i} verified");
    }
}

#[test]
fn bounded_model_check_from_identified() {
    let m = Market::new(false);
    let start = m.identified(SESSION, false);
    let result = model_check(&m, &start, 4);
    assert!(result.violations.is_empty(), "{:?}", result.violations);
    assert!(result.states > 10);
}
