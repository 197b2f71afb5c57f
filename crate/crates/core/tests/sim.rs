use std::collections::BTreeMap;

use didtrust_core::clock::Timestamp;
use didtrust_core::digest::Digest;
use didtrust_core::identity::Did;
use didtrust_core::sim::{
    learn, run_scenario, simulate, train_and_serve, Agent, AiServiceModel, DataRecord, Event, HolderAgent, Payload,
    SimError, SCENARIOS,
};
use proptest::prelude::*;

#[test]
fn every_scenario_passes_its_assertions() {
    for name in SCENARIOS {
        let t = run_scenario(name, 7).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!t.entries.is_empty(), "{name}");
        assert!(!t.assertions.is_empty(), "{name}");
    }
}

#[test]
fn unknown_scenarios_are_rejected() {
    assert_eq!(run_scenario("moon_landing", 1).unwrap_err(), SimError::UnknownScenario("moon_landing".into()));
}

#[test]
fn equal_seeds_give_identical_transcripts() {
    for name in SCENARIOS {
        let a = run_scenario(name, 42).unwrap().to_bytes();
        let b = run_scenario(name, 42).unwrap().to_bytes();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seeds_change_delivery_order_but_not_outcomes() {
    let a = run_scenario("job_application", 1).unwrap();
    let b = run_scenario("job_application", 2).unwrap();
    assert_eq!(a.assertions, b.assertions);
    assert_ne!(a.to_bytes(), b.to_bytes());
}

#[test]
fn per_step_state_digests_match_across_runs() {
    let trace = |seed| {
        let mut w = simulate("bar_age_check", seed).unwrap();
        let mut digests = vec![w.state_digest()];
        w.send("1234", "mnop", Payload::ServiceRequest { service: "drink".into() });
        while w.step().unwrap() {
            digests.push(w.state_digest());
        }
        digests
    };
    assert_eq!(trace(3), trace(3));
}

#[test]
fn an_empty_queue_leaves_the_world_unchanged() {
    let mut w = simulate("bar_age_check", 9).unwrap();
    let before = w.state_digest();
    let steps = w.steps();
    assert!(!w.step().unwrap());
    assert_eq!(w.state_digest(), before);
    assert_eq!(w.steps(), steps);
}

#[test]
fn messages_to_halted_agents_become_dead_letters() {
    let mut w = simulate("bar_age_check", 9).unwrap();
    let delivered = w.transcript().entries.len();
    let clock = w.clock();
    w.halt("mnop");
    w.send("1234", "mnop", Payload::ServiceRequest { service: "drink".into() });
    assert!(w.step().unwrap());
    assert_eq!(w.transcript().entries.len(), delivered);
    assert_eq!(w.transcript().dead_letters.len(), 1);
    assert_eq!(w.transcript().dead_letters[0].to, "mnop");
    assert_eq!(w.clock(), Timestamp(clock.0 + 1));
    assert_eq!(w.pending(), 0);
}

#[test]
fn verification_window_has_no_issuer_traffic() {
    let w = simulate("job_application", 11).unwrap();
    let (start, end) = w
        .events()
        .iter()
        .find_map(|e| match e {
            Event::Verified { verifier, accepted: true, requested_at, decided_at, .. } if verifier == "wxyz" => {
                Some((*requested_at, *decided_at))
            }
            _ => None,
        })
        .unwrap();
    assert!(start < end);
    let t = w.transcript();
    let in_window = t.entries.iter().filter(|e| (start..=end).contains(&e.step));
    let issuers = ["abcd", "gov"];
    assert_eq!(
        in_window.filter(|e| issuers.contains(&e.from.as_str()) || issuers.contains(&e.to.as_str())).count(),
        0
    );
}

#[test]
fn the_old_provider_forgets_a_departed_user() {
    let w = simulate("email_negotiation", 5).unwrap();
    let user = w.did_of("1234").unwrap();
    let old = w.agent("qrst").and_then(Agent::as_provider).unwrap();
    assert!(old.model.records().iter().all(|r| r.owner != user));
    let new = w.agent("ijkl").and_then(Agent::as_provider).unwrap();
    let holder: &HolderAgent = w.agent("1234").and_then(Agent::as_holder).unwrap();
    assert!(new.mailboxes.contains_key(&holder.address));
    assert!(holder.address.starts_with(&user.to_string()));
}

fn did(n: u8) -> Did {
    Did::from_id(Digest([n; 32]))
}

fn record(owner: u8, item: &str) -> DataRecord {
    DataRecord { owner: did(owner), topic: "genre".into(), item: item.into() }
}

#[test]
fn an_empty_model_answers_with_the_default() {
    let model = AiServiceModel::new(Digest::ZERO, "nothing yet");
    assert!(model.learned().is_empty());
    assert_eq!(train_and_serve(&model, "genre"), "nothing yet");
}

#[test]
fn records_without_an_agreement_never_train() {
    let mut model = AiServiceModel::new(Digest::ZERO, "-");
    model.ingest([record(1, "jazz"), record(2, "rock")]);
    assert!(model.learned().is_empty());
    assert_eq!(model.records().len(), 2);
}

#[test]
fn learned_table_counts_each_item() {
    let table = learn(&[record(1, "rock"), record(1, "jazz")]);
    assert_eq!(table["genre"], BTreeMap::from([("jazz".into(), 1), ("rock".into(), 1)]));
}

proptest! {
    #[test]
    fn learning_matches_a_brute_force_count(items in proptest::collection::vec(0usize..4, 0..40), extra in 0usize..4) {
        let names = ["folk", "jazz", "pop", "rock"];
        let mut records: Vec<DataRecord> = items.iter().map(|&i| record(1, names[i])).collect();
        let before = learn(&records);
        records.push(record(1, names[extra]));
        let after = learn(&records);
        for (i, name) in names.iter().enumerate() {
            let brute = items.iter().filter(|&&x| x == i).count() as u64 + u64::from(extra == i);
            prop_assert_eq!(after.get("genre").and_then(|m| m.get(*name)).copied().unwrap_or(0), brute);
        }
        let delta: u64 = after["genre"].values().sum::<u64>() - before.get("genre").map_or(0, |m| m.values().sum());
        prop_assert_eq!(delta, 1);
    }
}
