use std::collections::{BTreeMap, BTreeSet};

use super::agents::{
    mailbox_address, Agent, AuthorityAgent, Command, HolderAgent, HostedArtifact, IssuerAgent, Preferences,
    ProviderAgent, VerifierAgent,
};
use super::model::{train_and_serve, DataRecord};
use super::world::{Event, Transcript, World};
use super::SimError;
use crate::agreements::{
    email_service_template, evaluate_terms, two_clause_template, ComplianceRequirement, Obligation, Phase,
    SessionPolicy, DATA_EXPORT, MODEL_TRAINING,
};
use crate::clock::Timestamp;
use crate::credentials::{ClaimSet, ClaimValue, IssueOptions, Predicate};
use crate::digest::sha256;
use crate::governance::{
    attest_artifact, shipped_regulations, ArtifactKind, AuditVerdict, Evidence, COMPLIANCE_SCHEMA, CONSENT_REGULATION,
};
use crate::identity::Did;
use crate::verification::TrustAnchorSet;
use crate::vlog::OperatedLog;
use crate::wallet::{ClaimRequirement, RequestItem};

pub const SCENARIOS: [&str; 5] =
    ["job_application", "bar_age_check", "email_negotiation", "audit_compliance", "artifact_attestation"];

/// 2025-06-23.
const START: Timestamp = Timestamp(2000);
const MAX_STEPS: u64 = 10_000;

/// Runs a built-in scenario and returns the finished world, or the first
/// violated assertion.
pub fn simulate(name: &str, seed: u64) -> Result<World, SimError> {
    let mut world = World::new(name, seed, START);
    match name {
        "job_application" => job_application(&mut world)?,
        "bar_age_check" => bar_age_check(&mut world)?,
        "email_negotiation" => email_negotiation(&mut world)?,
        "audit_compliance" => audit_compliance(&mut world)?,
        "artifact_attestation" => artifact_attestation(&mut world)?,
        other => return Err(SimError::UnknownScenario(other.to_owned())),
    }
    Ok(world)
}

pub fn run_scenario(name: &str, seed: u64) -> Result<Transcript, SimError> {
    simulate(name, seed).map(World::into_transcript)
}

fn claims(pairs: &[(&str, ClaimValue)]) -> ClaimSet {
    ClaimSet::from_pairs(pairs.iter().cloned()).expect("scenario claims are well formed")
}

fn add_issuer(world: &mut World, label: &str, schema: &str, predicates: Vec<Predicate>) -> Did {
    let (did, keys) = world.new_identity();
    let agent = IssuerAgent::new(did, keys, schema, IssueOptions { expires_at: None, predicates });
    let list = agent.revocation_list(world.registry());
    world.bulletin_mut().revocations.insert(did, list);
    world.add_agent(label, Agent::Issuer(agent));
    did
}

fn enroll(world: &mut World, issuer: &str, subject: &str, claims: ClaimSet) {
    let subject = world.did_of(subject).expect("subject exists");
    match world.agent_mut(issuer) {
        Some(Agent::Issuer(a)) => a.enroll(subject, claims),
        _ => panic!("{issuer} is not an issuer"),
    }
}

/// Issues and stores a credential before the event loop starts, so none of
/// its values cross a channel.
fn issue_in_setup(world: &mut World, issuer: &str, holder: &str) -> Result<(), SimError> {
    let subject = world.did_of(holder).ok_or_else(|| SimError::UnknownAgent(holder.to_owned()))?;
    let parts = world.parts();
    let Some(Agent::Issuer(i)) = parts.agents.get(issuer) else {
        return Err(SimError::UnknownAgent(issuer.to_owned()));
    };
    let (credential, bundle) =
        i.issue_to(&subject, parts.registry, parts.clock, parts.rng).map_err(|e| SimError::agent(issuer, e))?;
    let wallet = parts.agents.get_mut(holder).and_then(Agent::wallet_mut).ok_or_else(|| SimError::UnknownAgent(holder.to_owned()))?;
    wallet.store(credential, bundle, parts.registry).map_err(|e| SimError::agent(holder, e))?;
    Ok(())
}

fn add_holder(world: &mut World, label: &str, preferences: Preferences) -> Did {
    let (did, keys) = world.new_identity();
    world.add_agent(label, Agent::Holder(HolderAgent::new(did, keys, preferences)));
    did
}

fn holder<'w>(world: &'w World, label: &str) -> &'w HolderAgent {
    world.agent(label).and_then(Agent::as_holder).expect("holder exists")
}

fn provider<'w>(world: &'w World, label: &str) -> &'w ProviderAgent {
    world.agent(label).and_then(Agent::as_provider).expect("provider exists")
}

fn quiet(world: &mut World) -> Result<(), SimError> {
    world.run_until_quiet(MAX_STEPS).map(|_| ())
}

fn private() -> Preferences {
    Preferences { data_sharing: "none".into(), ad_personalization: false }
}

fn verified(world: &World, verifier: &str, holder: &str) -> Option<(bool, BTreeSet<String>, u64, u64)> {
    world.events().iter().rev().find_map(|e| match e {
        Event::Verified { verifier: v, holder: h, accepted, disclosed, requested_at, decided_at, .. }
            if v == verifier && h == holder =>
        {
            Some((*accepted, disclosed.clone(), *requested_at, *decided_at))
        }
        _ => None,
    })
}

fn negotiations<'w>(world: &'w World, label: &str, peer: &str) -> Vec<(Phase, Phase, &'w str)> {
    world
        .events()
        .iter()
        .filter_map(|e| match e {
            Event::NegotiationEnded { label: l, peer: p, phase, stage, detail, .. } if l == label && p == peer => {
                Some((*phase, *stage, detail.as_str()))
            }
            _ => None,
        })
        .collect()
}

/// A college issues a diploma, the applicant stores it, and a company checks
/// it without ever talking to the college.
fn job_application(world: &mut World) -> Result<(), SimError> {
    add_issuer(world, "abcd", "diploma", vec![]);
    add_issuer(world, "gov", "government_id", vec![Predicate::age_over(18)]);
    add_holder(world, "1234", private());
    enroll(
        world,
        "abcd",
        "1234",
        claims(&[
            ("degree", ClaimValue::text("BSc Computer Science")),
            ("graduation_year", ClaimValue::Integer(2019)),
            ("gpa", ClaimValue::text("3.7")),
        ]),
    );
    enroll(
        world,
        "gov",
        "1234",
        claims(&[
            ("name", ClaimValue::text("Alex Moreno")),
            ("birthdate", ClaimValue::date(1997, 2, 11)),
            ("address", ClaimValue::text("4 Orchard Row, Leeds")),
        ]),
    );
    let (company, _) = world.new_identity();
    let anchors = TrustAnchorSet::new("hiring")
        .with("diploma", world.did_of("abcd").expect("issuer"))
        .with("government_id", world.did_of("gov").expect("issuer"));
    let request = vec![
        RequestItem::new("diploma", vec![ClaimRequirement::any("degree"), ClaimRequirement::any("graduation_year")]),
        RequestItem::new("government_id", vec![ClaimRequirement::equals("age_over_18", ClaimValue::Boolean(true))]),
    ];
    world.add_agent("wxyz", Agent::Verifier(VerifierAgent::new(company, "job-application", request, anchors)));

    world.command("1234", Command::RequestCredential { issuer: "abcd".into(), schema: "diploma".into() })?;
    world.command("1234", Command::RequestCredential { issuer: "gov".into(), schema: "government_id".into() })?;
    quiet(world)?;
    let stored = world.events().iter().filter(|e| matches!(e, Event::CredentialStored { holder, .. } if holder == "1234")).count();
    world.check("applicant stores both credentials", stored == 2)?;

    world.command("1234", Command::RequestService { verifier: "wxyz".into(), service: "job-application".into() })?;
    quiet(world)?;
    let outcome = verified(world, "wxyz", "1234");
    world.check("company accepts the diploma presentation", outcome.as_ref().is_some_and(|o| o.0))?;
    let expected: BTreeSet<String> = ["age_over_18", "degree", "graduation_year"].map(String::from).into();
    world.check("company sees exactly the requested claims", outcome.as_ref().is_some_and(|o| o.1 == expected))?;
    let issuer_contact =
        world.transcript().between("wxyz", "abcd").count() + world.transcript().between("wxyz", "gov").count();
    world.check("company never messages an issuer", issuer_contact == 0)?;
    let decided = holder(world, "1234").decisions.iter().any(|(v, ok)| v == "wxyz" && *ok);
    world.check("applicant is told the application passed", decided)
}

/// The bar learns that the customer is over 21 and nothing else.
fn bar_age_check(world: &mut World) -> Result<(), SimError> {
    add_issuer(world, "dmv", "drivers_license", vec![Predicate::age_over(21)]);
    add_holder(world, "1234", private());
    enroll(
        world,
        "dmv",
        "1234",
        claims(&[
            ("name", ClaimValue::text("Jordan Blake")),
            ("birthdate", ClaimValue::date(1995, 7, 14)),
            ("address", ClaimValue::text("12 Harbour Lane, Portsmouth")),
            ("license_number", ClaimValue::text("BLAKE907145J")),
        ]),
    );
    issue_in_setup(world, "dmv", "1234")?;
    let (bar, _) = world.new_identity();
    let anchors = TrustAnchorSet::new("bar").with("drivers_license", world.did_of("dmv").expect("issuer"));
    let request =
        vec![RequestItem::new("drivers_license", vec![ClaimRequirement::equals("age_over_21", ClaimValue::Boolean(true))])];
    world.add_agent("mnop", Agent::Verifier(VerifierAgent::new(bar, "drink", request, anchors)));

    world.command("1234", Command::RequestService { verifier: "mnop".into(), service: "drink".into() })?;
    quiet(world)?;
    let outcome = verified(world, "mnop", "1234");
    world.check("bar serves the customer", outcome.as_ref().is_some_and(|o| o.0))?;
    let only_age: BTreeSet<String> = ["age_over_21".to_owned()].into();
    world.check("bar sees only age_over_21", outcome.is_some_and(|o| o.1 == only_age))?;
    let secrets: [&[u8]; 3] = [b"1995-07-14", b"Harbour Lane", b"BLAKE907145J"];
    let leaked = world.payloads().iter().any(|p| secrets.iter().any(|s| p.windows(s.len()).any(|w| w == *s)));
    world.check("no payload carries birthdate, address, or license number", !leaked)
}

fn market_policy(gov: Did, chamber: Did, authority: Option<Did>) -> SessionPolicy {
    SessionPolicy {
        initiator_request: vec![RequestItem::new(
            "government_id",
            vec![ClaimRequirement::equals("age_over_18", ClaimValue::Boolean(true))],
        )],
        initiator_anchors: TrustAnchorSet::new("provider").with("government_id", gov),
        responder_request: vec![RequestItem::new("business_registration", vec![ClaimRequirement::any("legal_name")])],
        responder_anchors: TrustAnchorSet::new("user").with("business_registration", chamber),
        compliance: match authority {
            Some(_) => vec![ComplianceRequirement { role: crate::agreements::Role::Responder, regulation: CONSENT_REGULATION.into() }],
            None => vec![],
        },
        authority_anchors: match authority {
            Some(a) => TrustAnchorSet::new("regulators").with(COMPLIANCE_SCHEMA, a),
            None => TrustAnchorSet::new("regulators"),
        },
    }
}

/// Issuers, one user per entry of `users`, and one provider per entry of
/// `providers`, all holding their identity credentials.
fn market(
    world: &mut World,
    users: &[(&str, Preferences)],
    providers: &[(&str, &str)],
    authority: Option<&str>,
    template: fn() -> Vec<crate::agreements::ClauseSpec>,
) -> Result<(), SimError> {
    let gov = add_issuer(world, "gov", "government_id", vec![Predicate::age_over(18)]);
    let chamber = add_issuer(world, "chamber", "business_registration", vec![]);
    let authority_did = authority.map(|label| {
        let (did, keys) = world.new_identity();
        let agent = AuthorityAgent::new(did, keys, shipped_regulations(did));
        let list = crate::credentials::RevocationList::new(did, &agent.keys, world.registry()).expect("authority resolves");
        world.bulletin_mut().revocations.insert(did, list);
        world.add_agent(label, Agent::Authority(agent));
        did
    });
    let policy = market_policy(gov, chamber, authority_did);
    for (i, (label, prefs)) in users.iter().enumerate() {
        add_holder(world, label, prefs.clone());
        if let Some(Agent::Holder(h)) = world.agent_mut(label) {
            h.policy = Some(policy.clone());
        }
        enroll(
            world,
            "gov",
            label,
            claims(&[
                ("name", ClaimValue::text(format!("User {}", i + 1))),
                ("birthdate", ClaimValue::date(1988 + i as i32, 5, 1)),
            ]),
        );
        issue_in_setup(world, "gov", label)?;
    }
    for (label, legal_name) in providers {
        let (did, keys) = world.new_identity();
        let program = sha256(format!("{label} recommender v1").as_bytes());
        let agent = ProviderAgent::new(did, keys, policy.clone(), template(), program);
        world.add_agent(label, Agent::Provider(agent));
        enroll(world, "chamber", label, claims(&[("legal_name", ClaimValue::text(*legal_name))]));
        issue_in_setup(world, "chamber", label)?;
    }
    Ok(())
}

fn records(owner: Did, items: &[&str]) -> Vec<DataRecord> {
    items.iter().map(|i| DataRecord { owner, topic: "genre".into(), item: (*i).to_owned() }).collect()
}

/// Negotiation with an email provider, data contribution under the agreed
/// terms, then migration to a second provider under the same address.
fn email_negotiation(world: &mut World) -> Result<(), SimError> {
    let sharer = Preferences { data_sharing: "full".into(), ad_personalization: true };
    market(
        world,
        &[("1234", private()), ("5678", sharer)],
        &[("qrst", "Quartz Mail Ltd"), ("ijkl", "Inkwell Post GmbH")],
        None,
        email_service_template,
    )?;
    let user = world.did_of("1234").expect("user");
    let other = world.did_of("5678").expect("user");

    for label in ["1234", "5678"] {
        world.command(label, Command::Negotiate { provider: "qrst".into() })?;
        quiet(world)?;
        let signed = negotiations(world, label, "qrst").last().is_some_and(|n| n.0 == Phase::Signed);
        world.check(&format!("{label} and qrst sign an agreement"), signed)?;
        let h = holder(world, label);
        let same = h.agreements.get("qrst").map(|a| a.hash)
            == provider(world, "qrst").model.agreement(&world.did_of(label).expect("user")).map(|a| a.hash);
        let receipt = h.receipts.get("qrst") == Some(&true);
        world.check(&format!("{label} and qrst hold the same agreement"), same)?;
        world.check(&format!("{label} verifies qrst logged the agreement"), receipt)?;
    }

    world.command("1234", Command::SubmitData { provider: "qrst".into(), records: records(user, &["jazz", "jazz", "folk"]) })?;
    world.command("5678", Command::SubmitData { provider: "qrst".into(), records: records(other, &["rock", "rock", "jazz"]) })?;
    quiet(world)?;
    let q = provider(world, "qrst");
    let learned = q.model.learned();
    let answer = train_and_serve(&q.model, "genre");
    let expected = BTreeMap::from([("genre".to_owned(), BTreeMap::from([("jazz".to_owned(), 1), ("rock".to_owned(), 2)]))]);
    world.check("model learns only from records whose terms permit training", learned == expected)?;
    world.check("service recommends from permitted data", answer == "rock")?;

    world.command("1234", Command::Negotiate { provider: "ijkl".into() })?;
    quiet(world)?;
    let signed = negotiations(world, "1234", "ijkl").last().is_some_and(|n| n.0 == Phase::Signed);
    world.check("1234 and ijkl sign an agreement", signed)?;

    let address = holder(world, "1234").address.clone();
    world.command("1234", Command::Migrate { from: "qrst".into(), to: "ijkl".into() })?;
    quiet(world)?;
    world.check("address is unchanged by migration", address == mailbox_address(&user) && holder(world, "1234").address == address)?;
    world.check("ijkl now hosts the address", provider(world, "ijkl").mailboxes.get(&address).is_some_and(|m| !m.is_empty()))?;
    let old = holder(world, "1234").agreements.get("qrst").cloned().expect("agreement with qrst");
    let ceases = world.events().iter().any(|e| {
        matches!(e, Event::DataUseCeased { provider, owner, obligations }
            if provider == "qrst" && owner == "1234" && obligations.contains(&Obligation::CeaseDataUse))
    });
    world.check("old agreement obliges qrst to cease data use", ceases)?;
    let forbids = evaluate_terms(&old, MODEL_TRAINING).is_ok_and(|o| o == [Obligation::Deny])
        && evaluate_terms(&old, DATA_EXPORT).is_ok_and(|o| o == [Obligation::Deny]);
    world.check("old agreement forbids further data use", forbids)?;
    let q = provider(world, "qrst");
    let purged = !q.mailboxes.contains_key(&address)
        && q.model.records().iter().all(|r| r.owner != user)
        && q.model.agreement(&user).is_none();
    let unchanged = q.model.learned() == expected;
    world.check("qrst holds nothing of 1234 after migration", purged)?;
    world.check("model is unchanged by the departure", unchanged)
}

/// An unaudited provider is turned away at identification; after a failed and
/// then a passing audit, the same negotiation is signed.
fn audit_compliance(world: &mut World) -> Result<(), SimError> {
    market(world, &[("1234", private())], &[("qrst", "Quartz Mail Ltd")], Some("reg"), two_clause_template)?;
    let consent = |with: i64| {
        Evidence::new().with(
            "consent",
            [("records_with_consent", ClaimValue::Integer(with)), ("records_total", ClaimValue::Integer(12))],
        )
    };

    world.command("1234", Command::Negotiate { provider: "qrst".into() })?;
    quiet(world)?;
    let first = negotiations(world, "1234", "qrst");
    let gated = first.len() == 1
        && first[0].0 == Phase::Aborted
        && first[0].1 == Phase::Init
        && first[0].2.contains("identification failed");
    world.check("unaudited provider is rejected at identification", gated)?;

    for with in [11, 12] {
        let evidence = consent(with);
        let command = Command::RequestAudit { authority: "reg".into(), regulation: CONSENT_REGULATION.into(), evidence };
        world.command("qrst", command)?;
        quiet(world)?;
    }
    let verdicts: Vec<AuditVerdict> = world
        .events()
        .iter()
        .filter_map(|e| match e {
            Event::Audited { verdict, .. } => Some(*verdict),
            _ => None,
        })
        .collect();
    world.check("both audits are recorded", verdicts == [AuditVerdict::Fail, AuditVerdict::Pass])?;
    let logged = world.agent("reg").and_then(Agent::as_authority).is_some_and(|a| a.log.size() == 2);
    world.check("audit log holds every verdict", logged)?;
    world.check("provider holds one compliance credential", provider(world, "qrst").compliance.len() == 1)?;

    world.command("1234", Command::Negotiate { provider: "qrst".into() })?;
    quiet(world)?;
    let second = negotiations(world, "1234", "qrst");
    world.check("audited provider reaches a signed agreement", second.len() == 2 && second[1].0 == Phase::Signed)
}

/// A publisher attests a model and its code; a consumer accepts them from the
/// publisher and rejects a tampered copy from a mirror.
fn artifact_attestation(world: &mut World) -> Result<(), SimError> {
    market(world, &[("1234", private())], &[("qrst", "Quartz Mail Ltd"), ("mirr", "Mirror Hosting")], None, two_clause_template)?;
    let publisher = world.did_of("qrst").expect("publisher");
    let model = b"recommender weights: jazz=0.25 rock=0.50 folk=0.25".to_vec();
    let code = b"fn recommend(table) { argmax(table) }".to_vec();
    let props = BTreeMap::from([("license".to_owned(), "apache-2.0".to_owned())]);

    let parts = world.parts();
    let Some(Agent::Provider(p)) = parts.agents.get_mut("qrst") else {
        return Err(SimError::UnknownAgent("qrst".into()));
    };
    let keys = p.wallet.keys().clone();
    let mut attest = |bytes: &[u8], kind, log: &mut OperatedLog| {
        attest_artifact(&publisher, &keys, bytes, kind, &props, parts.registry, log, parts.clock, parts.rng)
            .map_err(|e| SimError::agent("qrst", e))
    };
    let model_att = attest(&model, ArtifactKind::Model, &mut p.log)?;
    let code_att = attest(&code, ArtifactKind::Code, &mut p.log)?;
    parts.bulletin.roots.insert(publisher, p.log.signed_root(&keys));
    p.model.program = sha256(&code);
    let inclusion = p.log.prove_inclusion(model_att.leaf_index).map_err(|e| SimError::agent("qrst", e))?;
    p.artifacts.insert(
        ArtifactKind::Model,
        HostedArtifact { bytes: model.clone(), attestation: model_att.clone(), inclusion: inclusion.clone() },
    );
    let code_inclusion = p.log.prove_inclusion(code_att.leaf_index).map_err(|e| SimError::agent("qrst", e))?;
    p.artifacts.insert(ArtifactKind::Code, HostedArtifact { bytes: code.clone(), attestation: code_att, inclusion: code_inclusion });

    let mut tampered = model.clone();
    let at = tampered.len() - 2;
    tampered[at] = b'9';
    if let Some(Agent::Provider(m)) = parts.agents.get_mut("mirr") {
        m.artifacts.insert(ArtifactKind::Model, HostedArtifact { bytes: tampered, attestation: model_att, inclusion });
    }
    if let Some(Agent::Holder(h)) = parts.agents.get_mut("1234") {
        h.artifact_anchors.add(crate::governance::ARTIFACT_SCHEMA, publisher);
    }

    for (from, kind) in [("qrst", ArtifactKind::Model), ("mirr", ArtifactKind::Model), ("qrst", ArtifactKind::Code)] {
        world.command("1234", Command::RequestArtifact { from: from.into(), kind })?;
    }
    quiet(world)?;
    let checks: Vec<(String, bool)> = world
        .events()
        .iter()
        .filter_map(|e| match e {
            Event::ArtifactChecked { source, accepted, .. } => Some((source.clone(), *accepted)),
            _ => None,
        })
        .collect();
    let from_publisher = checks.iter().filter(|(s, _)| s == "qrst").collect::<Vec<_>>();
    world.check("publisher's model and code verify", from_publisher.len() == 2 && from_publisher.iter().all(|c| c.1))?;
    world.check("mirror's tampered model is rejected", checks.iter().any(|(s, ok)| s == "mirr" && !ok))?;
    world.check("service runs the attested code", provider(world, "qrst").model.program == sha256(&code))
}
