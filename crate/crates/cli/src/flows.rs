//! Self-contained negotiation and audit runs over freshly generated parties.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Result};
use didtrust_core::agreements::{
    accept_message, email_service_template, evaluate_terms, finalize_and_sign, start_session, two_clause_template,
    ComplianceMaterial, ComplianceRequirement, Environment, Message, Participant, Phase, RicardianAgreement, Role,
    SessionPolicy, AD_PERSONALIZATION, AD_SERVING, DATA_EXPORT, DATA_SHARING, MODEL_TRAINING,
};
use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{issue, ClaimSet, ClaimValue, IssueOptions, Predicate, RevocationList};
use didtrust_core::digest::Nonce;
use didtrust_core::governance::{
    conduct_audit, shipped_regulations, AuditOutcome, Evidence, EvidenceRecord, CONSENT_REGULATION,
};
use didtrust_core::identity::{generate_and_register, Did, KeyPair, Registry};
use didtrust_core::verification::{RevocationSnapshots, TrustAnchorSet, VerifierContext};
use didtrust_core::vlog::{verify_inclusion, OperatedLog, SignedRoot};
use didtrust_core::wallet::{ClaimRequirement, RequestItem, Wallet};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct AgreeOptions {
    pub seed: u64,
    pub template: String,
    pub sharing: String,
    pub ads: bool,
    pub require_compliance: bool,
    pub audited: bool,
    pub now: Timestamp,
}

pub enum AgreeOutcome {
    Signed { agreement: RicardianAgreement, leaf_index: u64, obligations: BTreeMap<String, Vec<String>> },
    Aborted { stage: Phase, reason: String },
}

fn party(rng: &mut ChaCha20Rng, registry: &Registry) -> Result<(Did, KeyPair)> {
    let (did, keys, _) = generate_and_register(rng, registry)?;
    Ok((did, keys))
}

/// A user and a provider, each holding one credential from its own issuer,
/// negotiate over `template` and sign.
pub fn agree(opts: &AgreeOptions) -> Result<AgreeOutcome> {
    let template = match opts.template.as_str() {
        "two-clause" => two_clause_template(),
        "email" => email_service_template(),
        other => bail!("unknown template {other:?}; expected two-clause or email"),
    };
    let registry = Registry::in_memory();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let now = opts.now;
    let (government, government_keys) = party(&mut rng, &registry)?;
    let (chamber, chamber_keys) = party(&mut rng, &registry)?;
    let (authority, authority_keys) = party(&mut rng, &registry)?;
    let (user, user_keys) = party(&mut rng, &registry)?;
    let (provider, provider_keys) = party(&mut rng, &registry)?;

    let id_claims = ClaimSet::from_pairs([("birthdate", ClaimValue::date(1990, 1, 1))])?;
    let options = IssueOptions { expires_at: None, predicates: vec![Predicate::age_over(18)] };
    let (c, b) = issue(&government_keys, &government, &user, "government_id", &id_claims, &options, &registry, now, &mut rng)?;
    let mut user_wallet = Wallet::new(user, user_keys.clone());
    user_wallet.store(c, b, &registry)?;

    let reg_claims = ClaimSet::from_pairs([("legal_name", ClaimValue::text("Example Provider Ltd"))])?;
    let (c, b) = issue(
        &chamber_keys,
        &chamber,
        &provider,
        "business_registration",
        &reg_claims,
        &IssueOptions::default(),
        &registry,
        now,
        &mut rng,
    )?;
    let mut provider_wallet = Wallet::new(provider, provider_keys.clone());
    provider_wallet.store(c, b, &registry)?;

    let mut audit_log = OperatedLog::new(authority);
    let mut material = Vec::new();
    if opts.audited {
        let evidence = consent_evidence(12, 12);
        let outcome = run_audit(&authority, &authority_keys, &provider, CONSENT_REGULATION, &evidence, &mut audit_log, &registry, now, &mut rng)?;
        let (c, b) = outcome.credential.ok_or_else(|| anyhow!("consent audit did not pass"))?;
        let credential_id = c.id.clone();
        provider_wallet.store(c, b, &registry)?;
        material.push(ComplianceMaterial {
            credential_id,
            inclusion: audit_log.prove_inclusion(outcome.record.leaf_index)?,
            record: outcome.record,
        });
    }
    let audit_roots = BTreeMap::from([(authority, audit_log.signed_root(&authority_keys))]);
    let mut snapshots = RevocationSnapshots::default();
    for (did, keys) in [(&government, &government_keys), (&chamber, &chamber_keys), (&authority, &authority_keys)] {
        snapshots.insert(RevocationList::new(*did, keys, &registry)?, now);
    }

    let policy = SessionPolicy {
        initiator_request: vec![RequestItem::new(
            "government_id",
            vec![ClaimRequirement::equals("age_over_18", ClaimValue::Boolean(true))],
        )],
        initiator_anchors: TrustAnchorSet::new("provider").with("government_id", government),
        responder_request: vec![RequestItem::new("business_registration", vec![ClaimRequirement::any("legal_name")])],
        responder_anchors: TrustAnchorSet::new("user").with("business_registration", chamber),
        compliance: if opts.require_compliance {
            vec![ComplianceRequirement { role: Role::Responder, regulation: CONSENT_REGULATION.into() }]
        } else {
            vec![]
        },
        authority_anchors: TrustAnchorSet::new("regulators").with("compliance", authority),
    };
    let env = Environment { verifier: VerifierContext::new(&registry, &snapshots, now), audit_roots: &audit_roots };
    let mut id = [0u8; 32];
    rng.fill_bytes(&mut id);
    let mut session = match start_session(
        Nonce(id),
        Participant { wallet: &user_wallet, compliance: &[] },
        Participant { wallet: &provider_wallet, compliance: &material },
        policy,
        &env,
    ) {
        Ok(s) => s,
        Err(e) => return Ok(AgreeOutcome::Aborted { stage: Phase::Init, reason: e.to_string() }),
    };

    let send = |session: &mut didtrust_core::agreements::NegotiationSession, role: Role, body: Message| -> Result<()> {
        let keys = if role == Role::Initiator { &user_keys } else { &provider_keys };
        let envelope = session.message(session.party(role), keys, body);
        session.apply(&envelope, &env)?;
        Ok(())
    };
    send(&mut session, Role::Responder, Message::Propose { clauses: template })?;
    for clause in session.open_clauses() {
        let body = match clause.as_str() {
            DATA_SHARING => Message::SelectChoice { clause, alternative: opts.sharing.clone() },
            AD_PERSONALIZATION => Message::RespondOption { clause, accept: opts.ads },
            other => bail!("template clause {other:?} needs a decision this command cannot make"),
        };
        send(&mut session, Role::Initiator, body)?;
    }
    for (role, keys) in [(Role::Initiator, &user_keys), (Role::Responder, &provider_keys)] {
        let envelope = accept_message(&session, role, keys);
        session.apply(&envelope, &env)?;
    }
    let mut log = OperatedLog::new(provider);
    let (agreement, leaf_index) = finalize_and_sign(&mut session, &user_keys, &provider_keys, &env, &mut log)?;
    let root = log.signed_root(&provider_keys);
    let proof = log.prove_inclusion(leaf_index)?;
    if !verify_inclusion(&didtrust_core::canonical::canonical_bytes(&agreement), leaf_index, &proof, &root) {
        bail!("agreement is missing from the provider's log");
    }
    let mut obligations = BTreeMap::new();
    for event in [MODEL_TRAINING, DATA_EXPORT, AD_SERVING] {
        let list = evaluate_terms(&agreement, event)?.iter().map(ToString::to_string).collect();
        obligations.insert(event.to_owned(), list);
    }
    Ok(AgreeOutcome::Signed { agreement, leaf_index, obligations })
}

pub fn consent_evidence(with: i64, total: i64) -> Evidence {
    Evidence::new().with(
        "consent",
        [("records_with_consent", ClaimValue::Integer(with)), ("records_total", ClaimValue::Integer(total))],
    )
}

/// Parses `record.field=value` items into evidence records.
pub fn parse_evidence(items: &[String]) -> Result<Evidence> {
    let mut records: BTreeMap<String, BTreeMap<String, ClaimValue>> = BTreeMap::new();
    for item in items {
        let (path, value) = item.split_once('=').ok_or_else(|| anyhow!("evidence {item:?} is not record.field=value"))?;
        let (record, field) = path.split_once('.').ok_or_else(|| anyhow!("evidence {item:?} is not record.field=value"))?;
        records.entry(record.to_owned()).or_default().insert(field.to_owned(), ClaimValue::infer(value));
    }
    Ok(Evidence { records: records.into_iter().map(|(name, fields)| EvidenceRecord { name, fields }).collect() })
}

#[allow(clippy::too_many_arguments)]
fn run_audit(
    authority: &Did,
    keys: &KeyPair,
    provider: &Did,
    regulation: &str,
    evidence: &Evidence,
    log: &mut OperatedLog,
    registry: &Registry,
    now: Timestamp,
    rng: &mut ChaCha20Rng,
) -> Result<AuditOutcome> {
    let regulations = shipped_regulations(*authority);
    let Some(regulation) = regulations.iter().find(|r| r.id == regulation) else {
        let known: Vec<&str> = regulations.iter().map(|r| r.id.as_str()).collect();
        bail!("unknown regulation {regulation:?}; known: {}", known.join(", "));
    };
    Ok(conduct_audit(authority, keys, provider, regulation, evidence, log, registry, now, rng)?)
}

pub struct AuditRun {
    pub outcome: AuditOutcome,
    pub root: SignedRoot,
    pub logged: bool,
}

/// An authority audits a generated provider and logs the verdict.
pub fn audit(seed: u64, regulation: &str, evidence: &Evidence, now: Timestamp) -> Result<AuditRun> {
    let registry = Registry::in_memory();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (authority, authority_keys) = party(&mut rng, &registry)?;
    let (provider, _) = party(&mut rng, &registry)?;
    let mut log = OperatedLog::new(authority);
    let outcome = run_audit(&authority, &authority_keys, &provider, regulation, evidence, &mut log, &registry, now, &mut rng)?;
    let root = log.signed_root(&authority_keys);
    let proof = log.prove_inclusion(outcome.record.leaf_index)?;
    let logged = root.verify_with(&registry) && verify_inclusion(&outcome.record.leaf(), outcome.record.leaf_index, &proof, &root);
    Ok(AuditRun { outcome, root, logged })
}
