use serde::{Deserialize, Serialize};

use super::did::Did;
use super::keys::{signing_input, KeyPair, PublicKey, Signature};
use super::IdentityError;
use crate::canonical::canonical_digest;
use crate::digest::Digest;

const KEY_EVENT_PURPOSE: &str = "didtrust/key-event";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventBody {
    /// Self-signed by `public_key`; the DID id is the digest of this key.
    Inception { public_key: PublicKey },
    /// Signed by the controller's key as of `controller_version`.
    PassiveInception { controller: Did, controller_version: u64, asset_label: String },
    /// Signed by the key being retired.
    Rotation { new_key: PublicKey },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub did: Did,
    pub sequence: u64,
    /// Digest of the previous event; `None` only for inception.
    pub prior: Option<Digest>,
    pub body: EventBody,
    pub signature: Signature,
}

#[derive(Serialize)]
struct UnsignedEvent<'a> {
    did: &'a Did,
    sequence: u64,
    prior: &'a Option<Digest>,
    body: &'a EventBody,
}

impl KeyEvent {
    fn signed(did: Did, sequence: u64, prior: Option<Digest>, body: EventBody, signer: &KeyPair) -> KeyEvent {
        let payload = signing_input(
            KEY_EVENT_PURPOSE,
            &UnsignedEvent { did: &did, sequence, prior: &prior, body: &body },
        );
        KeyEvent { did, sequence, prior, body, signature: signer.sign(&payload) }
    }

    pub fn signing_payload(&self) -> Vec<u8> {
        signing_input(
            KEY_EVENT_PURPOSE,
            &UnsignedEvent { did: &self.did, sequence: self.sequence, prior: &self.prior, body: &self.body },
        )
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self)
    }
}

/// The resolvable control record of a DID.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidDocument {
    pub did: Did,
    pub active_key: Option<PublicKey>,
    pub controller: Did,
    pub version: u64,
    pub event_chain: Vec<KeyEvent>,
    pub passive: bool,
}

/// What replaying an event chain yields.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ChainState {
    active_key: Option<PublicKey>,
    controller: Did,
    version: u64,
    passive: bool,
}

impl DidDocument {
    pub(crate) fn inception(keys: &KeyPair) -> DidDocument {
        let public_key = keys.public_key();
        let did = Did::from_public_key(&public_key);
        let event = KeyEvent::signed(did, 0, None, EventBody::Inception { public_key }, keys);
        DidDocument {
            did,
            active_key: Some(public_key),
            controller: did,
            version: 1,
            event_chain: vec![event],
            passive: false,
        }
    }

    pub(crate) fn passive_inception(
        controller: &DidDocument,
        controller_keys: &KeyPair,
        asset_label: &str,
    ) -> DidDocument {
        let did = Did::passive(&controller.did, asset_label);
        let body = EventBody::PassiveInception {
            controller: controller.did,
            controller_version: controller.version,
            asset_label: asset_label.to_owned(),
        };
        let event = KeyEvent::signed(did, 0, None, body, controller_keys);
        DidDocument {
            did,
            active_key: None,
            controller: controller.did,
            version: 1,
            event_chain: vec![event],
            passive: true,
        }
    }

    /// The successor document after rotating to `new_key`, signed by `current`.
    pub(crate) fn rotated(&self, current: &KeyPair, new_key: PublicKey) -> DidDocument {
        let last = self.event_chain.last().expect("documents have an inception event");
        let event = KeyEvent::signed(
            self.did,
            last.sequence + 1,
            Some(last.digest()),
            EventBody::Rotation { new_key },
            current,
        );
        let mut next = self.clone();
        next.event_chain.push(event);
        next.active_key = Some(new_key);
        next.version += 1;
        next
    }

    /// The key that was active at `version` (1-based). Passive documents have none.
    pub fn key_at_version(&self, version: u64) -> Option<PublicKey> {
        if self.passive || version == 0 {
            return None;
        }
        let mut key = None;
        for event in self.event_chain.iter().take(version as usize) {
            match &event.body {
                EventBody::Inception { public_key } => key = Some(*public_key),
                EventBody::Rotation { new_key } => key = Some(*new_key),
                EventBody::PassiveInception { .. } => return None,
            }
        }
        if version as usize > self.event_chain.len() {
            return None;
        }
        key
    }

    /// True iff `signature` verifies under the currently active key.
    pub fn verify_active(&self, message: &[u8], signature: &Signature) -> bool {
        self.active_key.is_some_and(|k| k.verify(message, signature))
    }

    /// Replays the event chain and checks every derived field.
    ///
    /// `lookup` resolves controllers of passive documents.
    pub fn validate(&self, lookup: &dyn Fn(&Did) -> Option<DidDocument>) -> Result<(), IdentityError> {
        let state = replay(&self.did, &self.event_chain, lookup)?;
        let declared = ChainState {
            active_key: self.active_key,
            controller: self.controller,
            version: self.version,
            passive: self.passive,
        };
        if state != declared {
            return Err(IdentityError::InvalidDocument(format!(
                "{}: document fields disagree with its event chain",
                self.did
            )));
        }
        Ok(())
    }
}

fn invalid(did: &Did, msg: impl std::fmt::Display) -> IdentityError {
    IdentityError::InvalidDocument(format!("{did}: {msg}"))
}

fn replay(
    did: &Did,
    events: &[KeyEvent],
    lookup: &dyn Fn(&Did) -> Option<DidDocument>,
) -> Result<ChainState, IdentityError> {
    let (first, rest) = events.split_first().ok_or_else(|| invalid(did, "empty event chain"))?;
    if first.did != *did || first.sequence != 0 || first.prior.is_some() {
        return Err(invalid(did, "malformed inception event"));
    }
    let mut state = match &first.body {
        EventBody::Inception { public_key } => {
            if Did::from_public_key(public_key) != *did {
                return Err(invalid(did, "id is not the digest of the inception key"));
            }
            if !public_key.verify(&first.signing_payload(), &first.signature) {
                return Err(invalid(did, "inception signature"));
            }
            ChainState { active_key: Some(*public_key), controller: *did, version: 1, passive: false }
        }
        EventBody::PassiveInception { controller, controller_version, asset_label } => {
            if Did::passive(controller, asset_label) != *did {
                return Err(invalid(did, "id is not derived from controller and asset label"));
            }
            let controller_doc = lookup(controller).ok_or_else(|| invalid(did, "controller does not resolve"))?;
            if controller_doc.passive {
                return Err(invalid(did, "controller is passive"));
            }
            let key = controller_doc
                .key_at_version(*controller_version)
                .ok_or_else(|| invalid(did, "controller version unknown"))?;
            if !key.verify(&first.signing_payload(), &first.signature) {
                return Err(invalid(did, "passive inception signature"));
            }
            ChainState { active_key: None, controller: *controller, version: 1, passive: true }
        }
        EventBody::Rotation { .. } => return Err(invalid(did, "chain starts with a rotation")),
    };

    let mut prev = first;
    for event in rest {
        let EventBody::Rotation { new_key } = &event.body else {
            return Err(invalid(did, "inception after the first event"));
        };
        let Some(current) = state.active_key else {
            return Err(invalid(did, "passive identifiers cannot rotate keys"));
        };
        if event.did != *did || event.sequence != prev.sequence + 1 || event.prior != Some(prev.digest()) {
            return Err(invalid(did, format!("event {} does not follow its predecessor", event.sequence)));
        }
        if !current.verify(&event.signing_payload(), &event.signature) {
            return Err(invalid(did, format!("event {} not signed by the prior active key", event.sequence)));
        }
        state.active_key = Some(*new_key);
        state.version += 1;
        prev = event;
    }
    Ok(state)
}
