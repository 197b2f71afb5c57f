
//! A small population of issuers and holders shared by integration tests.

use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{issue, ClaimSet, ClaimValue, IssueOptions, Predicate, RevocationList};
use didtrust_core::identity::{generate_did, Did, KeyPair, Registry};
use didtrust_core::verification::{RevocationSnapshots, TrustAnchorSet};
use didtrust_core::wallet::Wallet;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub struct Party {
    pub did: Did,
    pub keys: KeyPair,
}

pub struct Fixture {
    pub registry: Registry,
    pub rng: ChaCha20Rng,
    pub government: Party,
    pub university: Party,
    pub holder: Party,
    pub other: Party,
    pub gov_list: RevocationList,
    pub uni_list: RevocationList,
    pub wallet: Wallet,
    pub now: Timestamp,
}

pub fn party(registry: &Registry, seed: u8) -> Party {
    let (did, keys, doc) = generate_did(&[seed; 32]).unwrap();
    registry.register(doc).unwrap();
    Party { did, keys }
}

impl Fixture {
    /// Holder born 1995-06-01 holds a government id (with age predicates) and a
    /// university degree. The clock sits at 2024-01-01.
    pub fn new() -> Fixture {
        let registry = Registry::in_memory();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let government = party(&registry, 1);
        let university = party(&registry, 2);
        let holder = party(&registry, 3);
        let other = party(&registry, 4);
        let now = Timestamp::from_date(chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()).unwrap();

        let id_claims = ClaimSet::from_pairs([
            ("name", ClaimValue::text("John Doe")),
            ("birthdate", ClaimValue::date(1995, 6, 1)),
            ("address", ClaimValue::text("12 Main Street")),
            ("nationality", ClaimValue::text("NL")),
        ])
        .unwrap();
        let options = IssueOptions { expires_at: None, predicates: vec![Predicate::age_over(18), Predicate::age_over(21)] };
        let (id_cred, id_bundle) = issue(
            &government.keys,
            &government.did,
            &holder.did,
            "government_id",
            &id_claims,
            &options,
            &registry,
            now,
            &mut rng,
        )
        .unwrap();

        let degree_claims = ClaimSet::from_pairs([
            ("degree", ClaimValue::text("BSc")),
            ("field", ClaimValue::text("Computer Science")),
            ("graduated", ClaimValue::Integer(2017)),
        ])
        .unwrap();
        let (deg_cred, deg_bundle) = issue(
            &university.keys,
            &university.did,
            &holder.did,
            "degree",
            &degree_claims,
            &IssueOptions::default(),
            &registry,
            now,
            &mut rng,
        )
        .unwrap();

        let mut wallet = Wallet::new(holder.did, holder.keys.clone());
        wallet.store(id_cred, id_bundle, &registry).unwrap();
        wallet.store(deg_cred, deg_bundle, &registry).unwrap();

        let gov_list = RevocationList::new(government.did, &government.keys, &registry).unwrap();
        let uni_list = RevocationList::new(university.did, &university.keys, &registry).unwrap();
        Fixture { registry, rng, government, university, holder, other, gov_list, uni_list, wallet, now }
    }

    pub fn anchors(&self) -> TrustAnchorSet {
        TrustAnchorSet::new("test")
            .with("government_id", self.government.did)
            .with("degree", self.university.did)
    }

    pub fn snapshots(&self) -> RevocationSnapshots {
        let mut s = RevocationSnapshots::default();
        s.insert(self.gov_list.clone(), self.now);
        s.insert(self.uni_list.clone(), self.now);
        s
    }

    pub fn credential_id(&self, schema: &str) -> String {
        self.wallet.list().find(|c| c.schema == schema).unwrap().id.clone()
    }
}
