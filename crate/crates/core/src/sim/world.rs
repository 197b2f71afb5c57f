use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::agents::{Agent, Command};
use super::{Payload, SimError};
use crate::agreements::{Obligation, Phase};
use crate::canonical::{canonical_bytes, canonical_digest};
use crate::clock::Timestamp;
use crate::credentials::RevocationList;
use crate::digest::{sha256_concat, Digest, Nonce};
use crate::governance::AuditVerdict;
use crate::identity::{generate_and_register, Did, KeyPair, Registry};
use crate::verification::RevocationSnapshots;
use crate::vlog::SignedRoot;

/// Public, pull-only state: issuers' revocation lists and log operators'
/// latest signed roots. Reading it sends no message.
#[derive(Debug, Clone, Default)]
pub struct Bulletin {
    pub revocations: BTreeMap<Did, RevocationList>,
    pub roots: BTreeMap<Did, SignedRoot>,
}

impl Bulletin {
    /// Every published revocation list, as fetched at `now`.
    pub fn snapshots(&self, now: Timestamp) -> RevocationSnapshots {
        let mut out = RevocationSnapshots::default();
        for list in self.revocations.values() {
            out.insert(list.clone(), now);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub step: u64,
    pub from: String,
    pub to: String,
    pub kind: String,
    pub payload_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario: String,
    pub seed: u64,
    pub entries: Vec<TranscriptEntry>,
    /// Messages addressed to halted agents.
    pub dead_letters: Vec<TranscriptEntry>,
    /// Scenario assertions that held, in the order checked.
    pub assertions: Vec<String>,
}

impl Transcript {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_bytes(self)
    }

    pub fn between<'a>(&'a self, a: &'a str, b: &'a str) -> impl Iterator<Item = &'a TranscriptEntry> {
        self.entries
            .iter()
            .chain(&self.dead_letters)
            .filter(move |e| (e.from == a && e.to == b) || (e.from == b && e.to == a))
    }
}

/// Outcomes agents report as they act, for scenario assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    CredentialStored { holder: String, issuer: String, schema: String, credential_id: String },
    Verified {
        verifier: String,
        holder: String,
        accepted: bool,
        disclosed: BTreeSet<String>,
        failures: Vec<String>,
        requested_at: u64,
        decided_at: u64,
    },
    NegotiationEnded { label: String, peer: String, session: Nonce, phase: Phase, stage: Phase, detail: String },
    AgreementLogged { operator: String, counterparty: String, hash: Digest, leaf_index: u64 },
    DataIngested { provider: String, owner: String, admitted: usize, excluded: usize },
    DataUseCeased { provider: String, owner: String, obligations: Vec<Obligation> },
    MailboxOpened { provider: String, address: String, messages: usize },
    Audited { authority: String, provider: String, regulation: String, verdict: AuditVerdict, leaf_index: u64 },
    ArtifactChecked { label: String, source: String, accepted: bool },
}

/// What a handler sees of the world while it runs.
pub struct Ctx<'a> {
    pub label: &'a str,
    pub step: u64,
    pub clock: Timestamp,
    pub rng: &'a mut ChaCha20Rng,
    pub registry: &'a Registry,
    pub bulletin: &'a mut Bulletin,
    directory: &'a BTreeMap<String, Did>,
    events: &'a mut Vec<Event>,
    outbox: Vec<(String, Payload)>,
}

impl Ctx<'_> {
    pub fn send(&mut self, to: &str, payload: Payload) {
        self.outbox.push((to.to_owned(), payload));
    }

    pub fn record(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn did_of(&self, label: &str) -> Result<Did, SimError> {
        self.directory.get(label).copied().ok_or_else(|| SimError::UnknownAgent(label.to_owned()))
    }

    pub fn label_of(&self, did: &Did) -> Option<&str> {
        self.directory.iter().find(|(_, d)| *d == did).map(|(l, _)| l.as_str())
    }

    pub fn fail(&self, message: impl std::fmt::Display) -> SimError {
        SimError::agent(self.label, message)
    }
}

pub struct Parts<'a> {
    pub agents: &'a mut BTreeMap<String, Agent>,
    pub registry: &'a Registry,
    pub rng: &'a mut ChaCha20Rng,
    pub bulletin: &'a mut Bulletin,
    pub clock: Timestamp,
}

pub struct World {
    rng: ChaCha20Rng,
    registry: Registry,
    bulletin: Bulletin,
    directory: BTreeMap<String, Did>,
    agents: BTreeMap<String, Agent>,
    channels: BTreeMap<(String, String), VecDeque<Payload>>,
    halted: BTreeSet<String>,
    step: u64,
    clock: Timestamp,
    transcript: Transcript,
    wire: Vec<Vec<u8>>,
    events: Vec<Event>,
}

impl World {
    pub fn new(scenario: &str, seed: u64, start: Timestamp) -> World {
        World {
            rng: ChaCha20Rng::seed_from_u64(seed),
            registry: Registry::in_memory(),
            bulletin: Bulletin::default(),
            directory: BTreeMap::new(),
            agents: BTreeMap::new(),
            channels: BTreeMap::new(),
            halted: BTreeSet::new(),
            step: 0,
            clock: start,
            transcript: Transcript {
                scenario: scenario.to_owned(),
                seed,
                entries: Vec::new(),
                dead_letters: Vec::new(),
                assertions: Vec::new(),
            },
            wire: Vec::new(),
            events: Vec::new(),
        }
    }

    /// A fresh registered DID drawn from the world's random source.
    pub fn new_identity(&mut self) -> (Did, KeyPair) {
        let (did, keys, _) = generate_and_register(&mut self.rng, &self.registry).expect("fresh DID registers");
        (did, keys)
    }

    pub fn add_agent(&mut self, label: &str, agent: Agent) {
        self.directory.insert(label.to_owned(), agent.did());
        self.agents.insert(label.to_owned(), agent);
    }

    pub fn agent(&self, label: &str) -> Option<&Agent> {
        self.agents.get(label)
    }

    pub fn agent_mut(&mut self, label: &str) -> Option<&mut Agent> {
        self.agents.get_mut(label)
    }

    pub fn did_of(&self, label: &str) -> Option<Did> {
        self.directory.get(label).copied()
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn bulletin(&self) -> &Bulletin {
        &self.bulletin
    }

    pub fn bulletin_mut(&mut self) -> &mut Bulletin {
        &mut self.bulletin
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn clock(&self) -> Timestamp {
        self.clock
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Canonical bytes of every payload that crossed a channel, in delivery
    /// order, dead letters included.
    pub fn payloads(&self) -> &[Vec<u8>] {
        &self.wire
    }

    pub fn pending(&self) -> usize {
        self.channels.values().map(VecDeque::len).sum()
    }

    /// Stops delivering to `label`; later messages become dead letters.
    pub fn halt(&mut self, label: &str) {
        self.halted.insert(label.to_owned());
    }

    /// Digest of everything observable so far.
    pub fn state_digest(&self) -> Digest {
        let queued: Vec<_> = self
            .channels
            .iter()
            .map(|((from, to), q)| (from, to, q.iter().map(canonical_digest).collect::<Vec<_>>()))
            .collect();
        sha256_concat(&[
            canonical_digest(&self.transcript).as_bytes(),
            canonical_digest(&queued).as_bytes(),
            &self.step.to_be_bytes(),
            &self.clock.0.to_be_bytes(),
        ])
    }

    /// Mutable access to everything setup code needs at once, outside the
    /// event loop.
    pub fn parts(&mut self) -> Parts<'_> {
        Parts {
            agents: &mut self.agents,
            registry: &self.registry,
            rng: &mut self.rng,
            bulletin: &mut self.bulletin,
            clock: self.clock,
        }
    }

    /// Puts a message on the `from`→`to` channel.
    pub fn send(&mut self, from: &str, to: &str, payload: Payload) {
        self.channels.entry((from.to_owned(), to.to_owned())).or_default().push_back(payload);
    }

    /// Hands a local instruction to an agent; anything it sends is queued.
    pub fn command(&mut self, label: &str, command: Command) -> Result<(), SimError> {
        let agent = self.agents.get_mut(label).ok_or_else(|| SimError::UnknownAgent(label.to_owned()))?;
        let mut ctx = Ctx {
            label,
            step: self.step,
            clock: self.clock,
            rng: &mut self.rng,
            registry: &self.registry,
            bulletin: &mut self.bulletin,
            directory: &self.directory,
            events: &mut self.events,
            outbox: Vec::new(),
        };
        agent.on_command(command, &mut ctx)?;
        let outbox = ctx.outbox;
        for (to, payload) in outbox {
            self.send(label, &to, payload);
        }
        Ok(())
    }

    /// Delivers one message. Returns false, leaving the world untouched, when
    /// every channel is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let ready: Vec<(String, String)> =
            self.channels.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| k.clone()).collect();
        if ready.is_empty() {
            return Ok(false);
        }
        let (from, to) = ready[self.rng.gen_range(0..ready.len())].clone();
        let payload = self.channels.get_mut(&(from.clone(), to.clone())).and_then(VecDeque::pop_front).expect("non-empty");
        self.step += 1;
        self.clock = self.clock.plus_days(1);
        let bytes = canonical_bytes(&payload);
        let entry = TranscriptEntry {
            step: self.step,
            from: from.clone(),
            to: to.clone(),
            kind: payload.kind().to_owned(),
            payload_digest: crate::digest::sha256(&bytes),
        };
        self.wire.push(bytes);
        let Some(agent) = self.agents.get_mut(&to).filter(|_| !self.halted.contains(&to)) else {
            self.transcript.dead_letters.push(entry);
            return Ok(true);
        };
        self.transcript.entries.push(entry);
        let mut ctx = Ctx {
            label: &to,
            step: self.step,
            clock: self.clock,
            rng: &mut self.rng,
            registry: &self.registry,
            bulletin: &mut self.bulletin,
            directory: &self.directory,
            events: &mut self.events,
            outbox: Vec::new(),
        };
        agent.on_message(&from, payload, &mut ctx)?;
        let outbox = ctx.outbox;
        for (next, payload) in outbox {
            self.send(&to, &next, payload);
        }
        Ok(true)
    }

    /// Steps until every channel is empty.
    pub fn run_until_quiet(&mut self, max_steps: u64) -> Result<u64, SimError> {
        let mut n = 0;
        while self.step()? {
            n += 1;
            if n > max_steps {
                return Err(SimError::Stalled(max_steps));
            }
        }
        Ok(n)
    }

    /// Records `name` as a passed assertion, or fails the run.
    pub fn check(&mut self, name: &str, holds: bool) -> Result<(), SimError> {
        if !holds {
            return Err(SimError::AssertionFailed { scenario: self.transcript.scenario.clone(), assertion: name.to_owned() });
        }
        self.transcript.assertions.push(name.to_owned());
        Ok(())
    }
}
