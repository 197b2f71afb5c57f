use std::fmt;

use serde::{Deserialize, Serialize};

use super::ClauseSpec;
use crate::canonical::canonical_digest;
use crate::digest::{Digest, Nonce};
use crate::governance::ComplianceProof;
use crate::identity::{signing_input, Did, KeyPair, Signature};
use crate::wallet::Presentation;

const MESSAGE_PURPOSE: &str = "didtrust/negotiation-message";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub const BOTH: [Role; 2] = [Role::Initiator, Role::Responder];

    pub fn other(self) -> Role {
        match self {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "snake_case")]
pub enum ClauseEdit {
    Add { clause: ClauseSpec },
    Replace { clause: ClauseSpec },
    Remove { id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Identify { presentation: Presentation, compliance: Vec<ComplianceProof> },
    Propose { clauses: Vec<ClauseSpec> },
    Counter { edits: Vec<ClauseEdit> },
    SelectChoice { clause: String, alternative: String },
    RespondOption { clause: String, accept: bool },
    /// Assent to the clause set whose digest is `terms`.
    AcceptAll { terms: Digest },
    /// Signature over the agreement hash under the sender's key at `key_version`.
    Sign { key_version: u64, signature: Signature },
    Abort { reason: String },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Identify { .. } => "identify",
            Message::Propose { .. } => "propose",
            Message::Counter { .. } => "counter",
            Message::SelectChoice { .. } => "select_choice",
            Message::RespondOption { .. } => "respond_option",
            Message::AcceptAll { .. } => "accept_all",
            Message::Sign { .. } => "sign",
            Message::Abort { .. } => "abort",
        }
    }
}

/// A signed negotiation message. `sequence` is the message's position in the
/// session history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub session: Nonce,
    pub sender: Did,
    pub sequence: u64,
    pub body: Message,
    pub signature: Signature,
}

#[derive(Serialize)]
struct Unsigned<'a> {
    session: &'a Nonce,
    sender: &'a Did,
    sequence: u64,
    body: &'a Message,
}

impl Envelope {
    pub fn seal(session: Nonce, sender: Did, sequence: u64, body: Message, keys: &KeyPair) -> Envelope {
        let mut e = Envelope { session, sender, sequence, body, signature: Signature([0; 64]) };
        e.signature = keys.sign(&e.signing_payload());
        e
    }

    pub fn signing_payload(&self) -> Vec<u8> {
        signing_input(
            MESSAGE_PURPOSE,
            &Unsigned { session: &self.session, sender: &self.sender, sequence: self.sequence, body: &self.body },
        )
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self)
    }
}

/// Running digest over a message history: `d_0 = 0^32`,
/// `d_i = SHA-256(d_{i-1} || digest(m_i))`.
pub fn history_digest(history: &[Envelope]) -> Digest {
    history.iter().fold(Digest::ZERO, |acc, e| chain_digest(&acc, e))
}

pub(crate) fn chain_digest(prior: &Digest, envelope: &Envelope) -> Digest {
    crate::digest::sha256_concat(&[prior.as_bytes(), envelope.digest().as_bytes()])
}
