#[allow(dead_code)]
#[path = "support/fixture.rs"]
mod fixture;

use std::collections::BTreeSet;

use didtrust_core::canonical::canonical_bytes;
use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{issue, revoke, ClaimSet, ClaimValue, IssueOptions, Predicate};
use didtrust_core::digest::Nonce;
use didtrust_core::identity::{rotate_key, KeyPair};
use didtrust_core::verification::{
    verify_presentation, verify_presentation_bytes, Check, RevocationSnapshots, VerificationError, VerifierContext,
    VerifierPolicy,
};
use didtrust_core::wallet::{ClaimRequirement, Presentation, PresentationRequest, RequestItem, Wallet};
use fixture::Fixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const CHALLENGE: Nonce = Nonce([5; 32]);

fn job_request() -> PresentationRequest {
    PresentationRequest::new(
        CHALLENGE,
        vec![
            RequestItem::new(
                "government_id",
                vec![ClaimRequirement::any("name"), ClaimRequirement::equals("age_over_18", ClaimValue::Boolean(true))],
            ),
            RequestItem::new("degree", vec![ClaimRequirement::any("degree")]),
        ],
    )
}

fn present(f: &Fixture) -> Presentation {
    f.wallet.build_presentation(&job_request(), f.now, &f.registry).unwrap()
}

fn failed(f: &Fixture, p: &Presentation, snapshots: &RevocationSnapshots, clock: Timestamp) -> BTreeSet<Check> {
    verify_presentation(p, &CHALLENGE, &f.anchors(), &f.registry, snapshots, clock)
        .unwrap()
        .failed_kinds()
}

#[test]
fn honest_presentation_is_accepted_offline() {
    let f = Fixture::new();
    let p = present(&f);
    let report = verify_presentation(&p, &CHALLENGE, &f.anchors(), &f.registry, &f.snapshots(), f.now).unwrap();
    assert!(report.accepted(), "{:?}", report.failed().collect::<Vec<_>>());
    assert!(report.satisfies_exactly(&job_request()));
    assert_eq!(report.disclosed_names(), BTreeSet::from(["age_over_18", "degree", "name"]));
    let name = report.disclosed.iter().find(|d| d.name == "name").unwrap();
    assert_eq!(name.value, ClaimValue::text("John Doe"));
}

#[test]
fn wrong_challenge_is_a_replay() {
    let f = Fixture::new();
    let p = present(&f);
    let report = verify_presentation(&p, &Nonce([6; 32]), &f.anchors(), &f.registry, &f.snapshots(), f.now).unwrap();
    assert_eq!(report.failed_kinds(), BTreeSet::from([Check::Challenge]));
}

#[test]
fn issuers_outside_the_anchor_set_are_rejected() {
    let f = Fixture::new();
    let p = present(&f);
    let anchors = didtrust_core::verification::TrustAnchorSet::new("strict").with("government_id", f.government.did);
    let report = verify_presentation(&p, &CHALLENGE, &anchors, &f.registry, &f.snapshots(), f.now).unwrap();
    assert_eq!(report.failed_kinds(), BTreeSet::from([Check::AnchorMembership]));
}

#[test]
fn revocation_expiry_and_snapshot_freshness() {
    let f = Fixture::new();
    let p = present(&f);

    let deg = f.credential_id("degree");
    let list = revoke(&f.university.keys, &deg, &f.uni_list, &f.registry).unwrap();
    let mut revoked = f.snapshots();
    revoked.insert(list, f.now);
    assert_eq!(failed(&f, &p, &revoked, f.now), BTreeSet::from([Check::Revocation]));

    let mut missing = RevocationSnapshots::default();
    missing.insert(f.gov_list.clone(), f.now);
    assert_eq!(failed(&f, &p, &missing, f.now), BTreeSet::from([Check::Revocation]));

    let later = f.now.plus_days(1);
    assert_eq!(failed(&f, &p, &f.snapshots(), later), BTreeSet::from([Check::Revocation]));
    let ctx = VerifierContext {
        registry: &f.registry,
        revocations: &f.snapshots(),
        clock: later,
        policy: VerifierPolicy { revocation_staleness: 1 },
    };
    let bytes = canonical_bytes(&p);
    assert!(verify_presentation_bytes(&bytes, &CHALLENGE, &f.anchors(), &ctx).unwrap().accepted());

    let before = Timestamp(f.now.0 - 1);
    let mut early = RevocationSnapshots::default();
    early.insert(f.gov_list.clone(), before);
    early.insert(f.uni_list.clone(), before);
    assert_eq!(failed(&f, &p, &early, before), BTreeSet::from([Check::Expiry]));
}

#[test]
fn expired_credentials_fail_at_the_boundary() {
    let mut f = Fixture::new();
    let claims = ClaimSet::from_pairs([("degree", ClaimValue::text("MSc"))]).unwrap();
    let options = IssueOptions { expires_at: Some(f.now.plus_days(3)), predicates: vec![] };
    let (cred, bundle) = issue(
        &f.university.keys,
        &f.university.did,
        &f.holder.did,
        "degree",
        &claims,
        &options,
        &f.registry,
        f.now.plus_days(1),
        &mut f.rng,
    )
    .unwrap();
    let mut w = Wallet::new(f.holder.did, f.holder.keys.clone());
    w.store(cred, bundle, &f.registry).unwrap();
    let req = PresentationRequest::new(CHALLENGE, vec![RequestItem::new("degree", vec![ClaimRequirement::any("degree")])]);
    let p = w.build_presentation(&req, f.now.plus_days(2), &f.registry).unwrap();
    for (day, ok) in [(2, true), (3, false)] {
        let clock = f.now.plus_days(day);
        let mut s = RevocationSnapshots::default();
        s.insert(f.uni_list.clone(), clock);
        let r = verify_presentation(&p, &CHALLENGE, &f.anchors(), &f.registry, &s, clock).unwrap();
        assert_eq!(r.accepted(), ok, "day {day}");
    }
}

#[test]
fn a_thief_cannot_present_someone_elses_credential() {
    let f = Fixture::new();
    let mut stolen = Wallet::new(f.other.did, f.other.keys.clone());
    // The wallet refuses the credential, so relabel an honest presentation instead.
    let honest = present(&f);
    let mut thief_view = honest.clone();
    thief_view.holder = f.other.did;
    let report = verify_presentation(&thief_view, &CHALLENGE, &f.anchors(), &f.registry, &f.snapshots(), f.now).unwrap();
    assert!(report.failed_kinds().contains(&Check::HolderSignature));
    assert!(report.failed_kinds().contains(&Check::SubjectBinding));
    assert!(stolen.store(honest.credentials[0].credential.clone(), f.wallet.stored().next().unwrap().bundle.clone(), &f.registry).is_err());
}

#[test]
fn tampered_openings_break_the_paths() {
    let f = Fixture::new();
    let honest = present(&f);

    let mut changed = honest.clone();
    changed.credentials[0].disclosed[0].value = ClaimValue::text("Jane Doe");
    assert!(failed(&f, &changed, &f.snapshots(), f.now).contains(&Check::MerklePaths));

    let mut dropped = honest.clone();
    dropped.credentials[0].withheld.pop();
    assert!(failed(&f, &dropped, &f.snapshots(), f.now).contains(&Check::MerklePaths));

    let mut duplicated = honest.clone();
    let first = duplicated.credentials[0].disclosed[0].clone();
    duplicated.credentials[0].disclosed.push(first);
    assert!(failed(&f, &duplicated, &f.snapshots(), f.now).contains(&Check::MerklePaths));

    let mut empty = honest;
    empty.credentials.clear();
    assert!(matches!(
        verify_presentation(&empty, &CHALLENGE, &f.anchors(), &f.registry, &f.snapshots(), f.now),
        Err(VerificationError::MalformedPresentation(_))
    ));
}

#[test]
fn holder_key_rotation_invalidates_old_presentations() {
    let f = Fixture::new();
    let p = present(&f);
    rotate_key(&f.holder.did, &f.holder.keys, KeyPair::from_seed(&[50; 32]).public_key(), &f.registry).unwrap();
    assert_eq!(failed(&f, &p, &f.snapshots(), f.now), BTreeSet::from([Check::HolderSignature]));
}

#[test]
fn issuer_key_rotation_keeps_earlier_credentials_valid() {
    let f = Fixture::new();
    rotate_key(&f.government.did, &f.government.keys, KeyPair::from_seed(&[51; 32]).public_key(), &f.registry)
        .unwrap();
    let p = present(&f);
    assert!(failed(&f, &p, &f.snapshots(), f.now).is_empty());
}

#[test]
fn single_byte_mutations_never_verify() {
    let f = Fixture::new();
    let p = present(&f);
    let bytes = canonical_bytes(&p);
    let snapshots = f.snapshots();
    let ctx = VerifierContext::new(&f.registry, &snapshots, f.now);
    assert!(verify_presentation_bytes(&bytes, &CHALLENGE, &f.anchors(), &ctx).unwrap().accepted());
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let mut m = bytes.clone();
        let i = rng.gen_range(0..m.len());
        let delta: u8 = rng.gen_range(1..=255);
        m[i] ^= delta;
        let accepted = verify_presentation_bytes(&m, &CHALLENGE, &f.anchors(), &ctx).is_ok_and(|r| r.accepted());
        assert!(!accepted, "mutation at byte {i} accepted");
    }
}

/// Whole years between two dates, counted independently of the library: the
/// age increments on the birthday, and a 29 February birthday is reached on
/// 1 March in non-leap years.
fn oracle_age(born: (i32, u32, u32), on: (i32, u32, u32)) -> i32 {
    let mut age = on.0 - born.0;
    if (on.1, on.2) < (born.1, born.2) {
        age -= 1;
    }
    age
}

#[test]
fn age_predicate_matches_an_independent_oracle() {
    let f = Fixture::new();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut issuer_rng = ChaCha20Rng::seed_from_u64(4);
    let mut cases: Vec<((i32, u32, u32), (i32, u32, u32))> = vec![
        ((2000, 2, 29), (2021, 2, 28)),
        ((2000, 2, 29), (2021, 3, 1)),
        ((2003, 1, 1), (2024, 1, 1)),
        ((2003, 1, 2), (2024, 1, 1)),
        ((2002, 12, 31), (2023, 12, 31)),
        ((2002, 12, 31), (2023, 12, 30)),
    ];
    for _ in 0..200 {
        let born = (rng.gen_range(1990..2010), rng.gen_range(1..=12), rng.gen_range(1..=28));
        let on = (rng.gen_range(2020..2030), rng.gen_range(1..=12), rng.gen_range(1..=28));
        cases.push((born, on));
    }
    for (born, on) in cases {
        let claims = ClaimSet::from_pairs([("birthdate", ClaimValue::date(born.0, born.1, born.2))]).unwrap();
        let options = IssueOptions { expires_at: None, predicates: vec![Predicate::age_over(21)] };
        let at = Timestamp::from_date(chrono::NaiveDate::from_ymd_opt(on.0, on.1, on.2).unwrap()).unwrap();
        let (_, bundle) = issue(
            &f.government.keys,
            &f.government.did,
            &f.holder.did,
            "government_id",
            &claims,
            &options,
            &f.registry,
            at,
            &mut issuer_rng,
        )
        .unwrap();
        let expected = oracle_age(born, on) >= 21;
        assert_eq!(
            bundle.claims["age_over_21"].value,
            ClaimValue::Boolean(expected),
            "born {born:?} on {on:?}"
        );
    }
}
