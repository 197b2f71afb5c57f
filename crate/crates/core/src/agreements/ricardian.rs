use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{AgreementError, ResolvedClause, Role, Terms};
use crate::canonical::{canonical_bytes, from_canonical_slice};
use crate::digest::{sha256_concat, Digest, Nonce};
use crate::identity::{signing_input, Did, Resolver, Signature};

const AGREEMENT_PURPOSE: &str = "didtrust/agreement";

/// A party and the identification it gave in the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementParty {
    pub role: Role,
    pub did: Did,
    /// Digest of the party's identifying presentation.
    pub presentation: Digest,
    /// Regulation id to the leaf hash of the audit record the party proved.
    pub compliance: BTreeMap<String, Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartySignature {
    pub role: Role,
    pub did: Did,
    pub key_version: u64,
    pub signature: Signature,
}

/// A dual-signed agreement: readable text and machine terms, both rendered
/// from the resolved clauses, bound together by one hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RicardianAgreement {
    pub session: Nonce,
    /// Initiator first.
    pub parties: Vec<AgreementParty>,
    /// Sorted by clause id.
    pub clauses: Vec<ResolvedClause>,
    pub text: String,
    pub terms: Terms,
    /// `SHA-256(text || canonical(terms))`.
    pub hash: Digest,
    /// Initiator first once both have signed.
    pub signatures: Vec<PartySignature>,
}

pub fn render_text(session: &Nonce, parties: &[AgreementParty], clauses: &[ResolvedClause]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "AGREEMENT {session}");
    let _ = writeln!(out);
    for p in parties {
        let _ = writeln!(out, "{}: {} (identified by presentation {})", p.role, p.did, p.presentation);
        for (regulation, leaf) in &p.compliance {
            let _ = writeln!(out, "  compliant with {regulation} (audit record {leaf})");
        }
    }
    for (i, c) in clauses.iter().enumerate() {
        let _ = writeln!(out);
        let _ = writeln!(out, "{}. {} [{}]", i + 1, c.title, c.id);
        if let Some(selection) = &c.selection {
            let _ = writeln!(out, "Selected: {selection}.");
        }
        let _ = writeln!(out, "{}", c.text);
    }
    out
}

pub fn render_terms(parties: &[AgreementParty], clauses: &[ResolvedClause]) -> Terms {
    let mut terms = Terms::new();
    for c in clauses {
        terms.extend(c.terms.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    for p in parties {
        for (regulation, leaf) in &p.compliance {
            terms.insert(format!("compliance.{}.{regulation}", p.role), leaf.to_hex());
        }
    }
    terms
}

pub fn agreement_hash(text: &str, terms: &Terms) -> Digest {
    sha256_concat(&[text.as_bytes(), &canonical_bytes(terms)])
}

pub fn signing_payload(hash: &Digest) -> Vec<u8> {
    signing_input(AGREEMENT_PURPOSE, hash)
}

impl RicardianAgreement {
    pub(crate) fn draft(session: Nonce, parties: Vec<AgreementParty>, clauses: Vec<ResolvedClause>) -> RicardianAgreement {
        let text = render_text(&session, &parties, &clauses);
        let terms = render_terms(&parties, &clauses);
        let hash = agreement_hash(&text, &terms);
        RicardianAgreement { session, parties, clauses, text, terms, hash, signatures: Vec::new() }
    }

    pub fn party(&self, role: Role) -> Option<&AgreementParty> {
        self.parties.iter().find(|p| p.role == role)
    }

    /// Canonical bytes, as written to the agreement log.
    pub fn leaf(&self) -> Vec<u8> {
        canonical_bytes(self)
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<RicardianAgreement, AgreementError> {
        from_canonical_slice(bytes).map_err(|e| AgreementError::InvalidAgreement(e.to_string()))
    }

    /// Re-renders text and terms from the clauses, recomputes the hash, and
    /// checks both signatures.
    pub fn verify(&self, resolver: &dyn Resolver) -> Result<(), AgreementError> {
        let bad = |why: &str| Err(AgreementError::InvalidAgreement(why.to_owned()));
        let roles: Vec<Role> = self.parties.iter().map(|p| p.role).collect();
        if roles != Role::BOTH || self.parties[0].did == self.parties[1].did {
            return bad("expected one initiator and one distinct responder");
        }
        if !self.clauses.windows(2).all(|w| w[0].id < w[1].id) || self.clauses.is_empty() {
            return bad("clauses must be non-empty with strictly increasing ids");
        }
        if self.text != render_text(&self.session, &self.parties, &self.clauses) {
            return bad("text does not match the clauses");
        }
        if self.terms != render_terms(&self.parties, &self.clauses) {
            return bad("machine terms do not match the clauses");
        }
        if self.hash != agreement_hash(&self.text, &self.terms) {
            return bad("hash does not match text and terms");
        }
        let signed: Vec<(Role, Did)> = self.signatures.iter().map(|s| (s.role, s.did)).collect();
        let expected: Vec<(Role, Did)> = self.parties.iter().map(|p| (p.role, p.did)).collect();
        if signed != expected {
            return bad("expected exactly one signature per party");
        }
        let payload = signing_payload(&self.hash);
        for s in &self.signatures {
            let key = resolver.resolve(&s.did).ok().and_then(|doc| doc.key_at_version(s.key_version));
            if !key.is_some_and(|k| k.verify(&payload, &s.signature)) {
                return bad("party signature does not verify");
            }
        }
        Ok(())
    }
}
