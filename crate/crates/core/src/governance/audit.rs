use serde::{Deserialize, Serialize};

use super::{GovernanceError, Regulation};
use crate::canonical::canonical_bytes;
use crate::clock::Timestamp;
use crate::credentials::{issue, ClaimSet, ClaimValue, Credential, DisclosureBundle, IssueOptions};
use crate::digest::{Digest, Nonce};
use crate::governance::Evidence;
use crate::identity::{Did, KeyPair, Resolver};
use crate::verification::{verify_presentation_in, TrustAnchorSet, VerifierContext};
use crate::vlog::{leaf_hash, verify_inclusion, InclusionProof, OperatedLog, SignedRoot};
use crate::wallet::{Presentation, PresentationTemplate, Wallet, WalletError};

pub const COMPLIANCE_SCHEMA: &str = "compliance";
/// Default validity of a compliance credential, in simulated days.
pub const VALIDITY_DAYS: u64 = 90;

const COMPLIANCE_CLAIMS: [&str; 7] =
    ["leaf_index", "log_id", "record_leaf_hash", "regulation_id", "valid_from", "valid_until", "verdict"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    Pass,
    Fail,
}

/// The log leaf written for every audit, pass or fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub regulation_id: String,
    pub provider: Did,
    pub evidence_digest: Digest,
    pub verdict: AuditVerdict,
    pub auditor: Did,
    pub timestamp: Timestamp,
    pub log_id: Did,
    pub leaf_index: u64,
}

impl AuditRecord {
    pub fn leaf(&self) -> Vec<u8> {
        canonical_bytes(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditOutcome {
    pub record: AuditRecord,
    /// Present iff the verdict is pass.
    pub credential: Option<(Credential, DisclosureBundle)>,
}

/// Audits `provider` against `regulation`, appends the record to `log`
/// whatever the verdict, and issues a compliance credential on a pass.
#[allow(clippy::too_many_arguments)]
pub fn conduct_audit(
    authority: &Did,
    authority_keys: &KeyPair,
    provider: &Did,
    regulation: &Regulation,
    evidence: &Evidence,
    log: &mut OperatedLog,
    resolver: &dyn Resolver,
    clock: Timestamp,
    rng: &mut dyn rand::RngCore,
) -> Result<AuditOutcome, GovernanceError> {
    if regulation.authority != *authority {
        return Err(GovernanceError::Unauthorized(format!("{authority} is not the authority for {}", regulation.id)));
    }
    let doc = resolver.resolve(authority)?;
    if doc.active_key != Some(authority_keys.public_key()) {
        return Err(GovernanceError::Unauthorized(format!("not the active key of {authority}")));
    }
    let pass = regulation.evaluate(evidence)?;
    let record = AuditRecord {
        regulation_id: regulation.id.clone(),
        provider: *provider,
        evidence_digest: evidence.digest(),
        verdict: if pass { AuditVerdict::Pass } else { AuditVerdict::Fail },
        auditor: *authority,
        timestamp: clock,
        log_id: log.operator(),
        leaf_index: log.size(),
    };
    let index = log.append(record.leaf());
    debug_assert_eq!(index, record.leaf_index);
    if !pass {
        return Ok(AuditOutcome { record, credential: None });
    }

    let valid_until = clock.plus_days(VALIDITY_DAYS);
    let claims = ClaimSet::from_pairs([
        ("regulation_id", ClaimValue::text(&regulation.id)),
        ("verdict", ClaimValue::text("pass")),
        ("log_id", ClaimValue::text(record.log_id.to_string())),
        ("leaf_index", ClaimValue::Integer(record.leaf_index as i64)),
        ("record_leaf_hash", ClaimValue::text(leaf_hash(&record.leaf()).to_hex())),
        ("valid_from", ClaimValue::Integer(clock.0 as i64)),
        ("valid_until", ClaimValue::Integer(valid_until.0 as i64)),
    ])?;
    let options = IssueOptions { expires_at: Some(valid_until), predicates: vec![] };
    let issued = issue(authority_keys, authority, provider, COMPLIANCE_SCHEMA, &claims, &options, resolver, clock, rng)?;
    Ok(AuditOutcome { record, credential: Some(issued) })
}

/// What a provider shows to prove compliance: a presentation of the
/// compliance credential, the audit record, and its inclusion proof.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceProof {
    pub presentation: Presentation,
    pub record: AuditRecord,
    pub inclusion: InclusionProof,
}

/// Builds a compliance proof from a stored compliance credential.
pub fn prove_compliance(
    wallet: &Wallet,
    credential_id: &str,
    record: AuditRecord,
    inclusion: InclusionProof,
    challenge: Nonce,
    clock: Timestamp,
    resolver: &dyn Resolver,
) -> Result<ComplianceProof, WalletError> {
    let template = PresentationTemplate {
        credential_id: credential_id.to_owned(),
        claims: COMPLIANCE_CLAIMS.iter().map(|s| (*s).to_owned()).collect(),
    };
    let presentation = wallet.present_templates(&[template], challenge, clock, resolver)?;
    Ok(ComplianceProof { presentation, record, inclusion })
}

/// True iff the proof shows a current pass for `regulation_id` by an anchored
/// authority, and the audit record it names is in the log behind `signed_root`.
pub fn verify_compliance(
    proof: &ComplianceProof,
    regulation_id: &str,
    expected_challenge: &Nonce,
    authority_anchors: &TrustAnchorSet,
    signed_root: &SignedRoot,
    ctx: &VerifierContext<'_>,
) -> bool {
    let Ok(report) = verify_presentation_in(&proof.presentation, expected_challenge, authority_anchors, ctx) else {
        return false;
    };
    if !report.accepted() || proof.presentation.credentials.len() != 1 {
        return false;
    }
    let credential = &proof.presentation.credentials[0].credential;
    if credential.schema != COMPLIANCE_SCHEMA {
        return false;
    }
    let claim = |name: &str| report.disclosed.iter().find(|d| d.name == name).map(|d| &d.value);
    let text = |name: &str| match claim(name) {
        Some(ClaimValue::Text(s)) => Some(s.as_str()),
        _ => None,
    };
    let int = |name: &str| match claim(name) {
        Some(ClaimValue::Integer(i)) => Some(*i),
        _ => None,
    };
    let record = &proof.record;
    let leaf = record.leaf();
    let clock = ctx.clock.0 as i64;
    text("regulation_id") == Some(regulation_id)
        && text("verdict") == Some("pass")
        && int("valid_from").is_some_and(|t| t <= clock)
        && int("valid_until").is_some_and(|t| clock < t)
        && text("log_id") == Some(signed_root.operator.to_string().as_str())
        && int("leaf_index") == Some(proof.inclusion.leaf_index as i64)
        && text("record_leaf_hash") == Some(leaf_hash(&leaf).to_hex().as_str())
        && record.regulation_id == regulation_id
        && record.verdict == AuditVerdict::Pass
        && record.provider == credential.subject
        && record.auditor == credential.issuer
        && record.log_id == signed_root.operator
        && record.leaf_index == proof.inclusion.leaf_index
        && signed_root.verify_with(ctx.registry)
        && verify_inclusion(&leaf, proof.inclusion.leaf_index, &proof.inclusion, signed_root)
}
