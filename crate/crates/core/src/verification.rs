//! Offline presentation verification.
//!
//! Every input is an explicit snapshot: registry documents, revocation lists,
//! the trust anchors, and the clock. Nothing here contacts an issuer, so a
//! verifier trusts a holder's claims exactly as far as it trusts the issuers
//! in its anchor set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical::from_canonical_slice;
use crate::clock::Timestamp;
use crate::credentials::{commit, is_revoked, RevocationList};
use crate::digest::{Digest, Nonce};
use crate::identity::{Did, Resolver};
use crate::vlog::{leaf_hash, merkle_root, verify_inclusion_root};
use crate::wallet::{Presentation, PresentationRequest, PresentedCredential};

/// Issuers a verifier accepts, per credential schema.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustAnchorSet {
    pub context: String,
    pub anchors: BTreeMap<String, BTreeSet<Did>>,
}

impl TrustAnchorSet {
    pub fn new(context: impl Into<String>) -> TrustAnchorSet {
        TrustAnchorSet { context: context.into(), anchors: BTreeMap::new() }
    }

    pub fn with(mut self, schema: impl Into<String>, issuer: Did) -> TrustAnchorSet {
        self.add(schema, issuer);
        self
    }

    pub fn add(&mut self, schema: impl Into<String>, issuer: Did) {
        self.anchors.entry(schema.into()).or_default().insert(issuer);
    }

    pub fn accepts(&self, schema: &str, issuer: &Did) -> bool {
        self.anchors.get(schema).is_some_and(|set| set.contains(issuer))
    }
}

/// A revocation list together with when the verifier obtained it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationSnapshot {
    pub list: RevocationList,
    pub fetched_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationSnapshots(pub BTreeMap<Did, RevocationSnapshot>);

impl RevocationSnapshots {
    pub fn insert(&mut self, list: RevocationList, fetched_at: Timestamp) {
        self.0.insert(list.issuer, RevocationSnapshot { list, fetched_at });
    }

    pub fn get(&self, issuer: &Did) -> Option<&RevocationSnapshot> {
        self.0.get(issuer)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierPolicy {
    /// Maximum age, in ticks, of a revocation snapshot. 0 means it must have
    /// been fetched at the current step.
    pub revocation_staleness: u64,
}

/// Explicit inputs shared by every offline check.
#[derive(Clone, Copy)]
pub struct VerifierContext<'a> {
    pub registry: &'a dyn Resolver,
    pub revocations: &'a RevocationSnapshots,
    pub clock: Timestamp,
    pub policy: VerifierPolicy,
}

impl<'a> VerifierContext<'a> {
    pub fn new(registry: &'a dyn Resolver, revocations: &'a RevocationSnapshots, clock: Timestamp) -> Self {
        VerifierContext { registry, revocations, clock, policy: VerifierPolicy::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Challenge,
    HolderSignature,
    IssuerSignature,
    MerklePaths,
    SubjectBinding,
    Expiry,
    Revocation,
    AnchorMembership,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Check::Challenge => "challenge",
            Check::HolderSignature => "holder_signature",
            Check::IssuerSignature => "issuer_signature",
            Check::MerklePaths => "merkle_paths",
            Check::SubjectBinding => "subject_binding",
            Check::Expiry => "expiry",
            Check::Revocation => "revocation",
            Check::AnchorMembership => "anchor_membership",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    /// Credential id for per-credential checks.
    pub credential: Option<String>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedEntry {
    pub credential_id: String,
    pub schema: String,
    pub issuer: Did,
    pub name: String,
    pub value: crate::credentials::ClaimValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub checks: Vec<CheckResult>,
    pub disclosed: Vec<DisclosedEntry>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed_kinds(&self) -> BTreeSet<Check> {
        self.failed().map(|c| c.check).collect()
    }

    pub fn disclosed_names(&self) -> BTreeSet<&str> {
        self.disclosed.iter().map(|d| d.name.as_str()).collect()
    }

    /// True iff every request item is met by a presented credential of its
    /// schema whose opened claims are exactly the requested ones, with any
    /// required values.
    pub fn satisfies_exactly(&self, request: &PresentationRequest) -> bool {
        let mut by_credential: BTreeMap<&str, (&str, BTreeMap<&str, &crate::credentials::ClaimValue>)> =
            BTreeMap::new();
        for d in &self.disclosed {
            by_credential
                .entry(d.credential_id.as_str())
                .or_insert_with(|| (d.schema.as_str(), BTreeMap::new()))
                .1
                .insert(d.name.as_str(), &d.value);
        }
        if by_credential.len() != request.items.len() {
            return false;
        }
        let mut used = BTreeSet::new();
        request.items.iter().all(|item| {
            let wanted: BTreeSet<&str> = item.claims.iter().map(|c| c.name.as_str()).collect();
            let found = by_credential.iter().find(|(id, (schema, claims))| {
                !used.contains(*id)
                    && *schema == item.schema
                    && claims.keys().copied().collect::<BTreeSet<_>>() == wanted
                    && item.claims.iter().all(|req| claims.get(req.name.as_str()).is_some_and(|v| req.satisfied_by(v)))
            });
            match found {
                Some((id, _)) => {
                    used.insert(*id);
                    true
                }
                None => false,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerificationError {
    #[error("malformed presentation: {0}")]
    MalformedPresentation(String),
}

struct Recorder {
    checks: Vec<CheckResult>,
}

impl Recorder {
    fn record(&mut self, check: Check, credential: Option<&str>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            check,
            credential: credential.map(str::to_owned),
            passed,
            detail: detail.into(),
        });
    }
}

/// Verifies a presentation with the default policy.
pub fn verify_presentation(
    presentation: &Presentation,
    expected_challenge: &Nonce,
    anchors: &TrustAnchorSet,
    registry: &dyn Resolver,
    revocations: &RevocationSnapshots,
    clock: Timestamp,
) -> Result<VerificationReport, VerificationError> {
    let ctx = VerifierContext::new(registry, revocations, clock);
    verify_presentation_in(presentation, expected_challenge, anchors, &ctx)
}

/// Parses canonical bytes strictly, then verifies.
pub fn verify_presentation_bytes(
    bytes: &[u8],
    expected_challenge: &Nonce,
    anchors: &TrustAnchorSet,
    ctx: &VerifierContext<'_>,
) -> Result<VerificationReport, VerificationError> {
    let presentation: Presentation =
        from_canonical_slice(bytes).map_err(|e| VerificationError::MalformedPresentation(e.to_string()))?;
    verify_presentation_in(&presentation, expected_challenge, anchors, ctx)
}

pub fn verify_presentation_in(
    presentation: &Presentation,
    expected_challenge: &Nonce,
    anchors: &TrustAnchorSet,
    ctx: &VerifierContext<'_>,
) -> Result<VerificationReport, VerificationError> {
    if presentation.credentials.is_empty() {
        return Err(VerificationError::MalformedPresentation("no credentials".into()));
    }
    let mut rec = Recorder { checks: Vec::new() };

    rec.record(
        Check::Challenge,
        None,
        presentation.challenge == *expected_challenge,
        if presentation.challenge == *expected_challenge { "bound to the expected challenge" } else { "challenge mismatch" },
    );

    let holder_doc = ctx.registry.resolve(&presentation.holder).ok();
    let holder_ok = holder_doc.as_ref().is_some_and(|doc| {
        doc.version == presentation.holder_key_version
            && doc
                .active_key
                .is_some_and(|k| k.verify(&presentation.signing_payload(), &presentation.holder_signature))
    });
    rec.record(
        Check::HolderSignature,
        None,
        holder_ok,
        match (&holder_doc, holder_ok) {
            (None, _) => "holder does not resolve".to_owned(),
            (Some(_), false) => "holder signature invalid or not by the active key".to_owned(),
            (Some(_), true) => "signed by the holder's active key".to_owned(),
        },
    );

    let mut disclosed = Vec::new();
    for presented in &presentation.credentials {
        let cred = &presented.credential;
        let id = Some(cred.id.as_str());

        let sig_ok = cred.verify_signature(ctx.registry);
        rec.record(Check::IssuerSignature, id, sig_ok, if sig_ok { "valid" } else { "issuer signature invalid" });

        match check_paths(presented) {
            Ok(()) => rec.record(Check::MerklePaths, id, true, "commitments open to the signed root"),
            Err(why) => rec.record(Check::MerklePaths, id, false, why),
        }

        let bound = cred.subject == presentation.holder
            || ctx
                .registry
                .resolve(&cred.subject)
                .is_ok_and(|doc| doc.passive && doc.controller == presentation.holder);
        rec.record(Check::SubjectBinding, id, bound, if bound { "holder is the subject" } else { "holder is not the subject" });

        let live = cred.issued_at <= ctx.clock && !cred.is_expired(ctx.clock);
        rec.record(Check::Expiry, id, live, if live { "within validity" } else { "not valid at the verification clock" });

        let (rev_ok, rev_detail) = check_revocation(cred, ctx);
        rec.record(Check::Revocation, id, rev_ok, rev_detail);

        let anchored = anchors.accepts(&cred.schema, &cred.issuer);
        rec.record(
            Check::AnchorMembership,
            id,
            anchored,
            if anchored {
                format!("{} trusted for {}", cred.issuer, cred.schema)
            } else {
                format!("{} not an anchor for {} in {}", cred.issuer, cred.schema, anchors.context)
            },
        );

        for d in &presented.disclosed {
            disclosed.push(DisclosedEntry {
                credential_id: cred.id.clone(),
                schema: cred.schema.clone(),
                issuer: cred.issuer,
                name: d.name.clone(),
                value: d.value.clone(),
            });
        }
    }

    let verdict = if rec.checks.iter().all(|c| c.passed) { Verdict::Accepted } else { Verdict::Rejected };
    Ok(VerificationReport { verdict, checks: rec.checks, disclosed })
}

fn check_paths(presented: &PresentedCredential) -> Result<(), String> {
    let cred = &presented.credential;
    let n = cred.claim_count;
    let mut leaves: Vec<Option<Digest>> = vec![None; n as usize];
    let mut names = BTreeSet::new();
    for d in &presented.disclosed {
        if !names.insert(d.name.as_str()) {
            return Err(format!("claim {} opened twice", d.name));
        }
        let index = d.proof.leaf_index;
        if d.proof.tree_size != n || index >= n {
            return Err(format!("path for {} has the wrong shape", d.name));
        }
        let c = commit(&d.salt, &d.name, &d.value);
        if !verify_inclusion_root(&leaf_hash(c.as_bytes()), &d.proof, &cred.commitment_root) {
            return Err(format!("path for {} does not reach the commitment root", d.name));
        }
        if leaves[index as usize].replace(c).is_some() {
            return Err(format!("leaf {index} covered twice"));
        }
    }
    for w in &presented.withheld {
        if w.index >= n {
            return Err(format!("withheld index {} out of range", w.index));
        }
        if leaves[w.index as usize].replace(w.commitment).is_some() {
            return Err(format!("leaf {} covered twice", w.index));
        }
    }
    let Some(all) = leaves.into_iter().collect::<Option<Vec<Digest>>>() else {
        return Err("some commitments are missing".into());
    };
    let bytes: Vec<&[u8]> = all.iter().map(|d| d.as_bytes().as_slice()).collect();
    if merkle_root(&bytes) != cred.commitment_root {
        return Err("commitments do not rebuild the signed root".into());
    }
    Ok(())
}

fn check_revocation(cred: &crate::credentials::Credential, ctx: &VerifierContext<'_>) -> (bool, String) {
    let Some(snapshot) = ctx.revocations.get(&cred.issuer) else {
        return (false, format!("no revocation snapshot for {}", cred.issuer));
    };
    if snapshot.list.issuer != cred.issuer || !snapshot.list.verify(ctx.registry) {
        return (false, "revocation list signature invalid".into());
    }
    if snapshot.fetched_at > ctx.clock || ctx.clock.0 - snapshot.fetched_at.0 > ctx.policy.revocation_staleness {
        return (false, format!("revocation snapshot from {} is stale", snapshot.fetched_at.0));
    }
    if is_revoked(&cred.id, &snapshot.list) {
        return (false, "credential revoked".into());
    }
    (true, "not revoked".into())
}
