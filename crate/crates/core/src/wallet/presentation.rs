use serde::{Deserialize, Serialize};

use crate::canonical::{canonical_digest, from_canonical_slice, CanonicalError};
use crate::credentials::{ClaimValue, Credential, DisclosureBundle};
use crate::digest::{Digest, Nonce, Salt};
use crate::identity::{signing_input, Did, KeyPair, Signature};
use crate::vlog::InclusionProof;

const PRESENTATION_PURPOSE: &str = "didtrust/presentation";

/// One claim the request needs, optionally with the value it must have.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClaimRequirement {
    pub name: String,
    pub equals: Option<ClaimValue>,
}

impl ClaimRequirement {
    pub fn any(name: impl Into<String>) -> ClaimRequirement {
        ClaimRequirement { name: name.into(), equals: None }
    }

    pub fn equals(name: impl Into<String>, value: ClaimValue) -> ClaimRequirement {
        ClaimRequirement { name: name.into(), equals: Some(value) }
    }

    pub fn satisfied_by(&self, value: &ClaimValue) -> bool {
        self.equals.as_ref().is_none_or(|v| v == value)
    }
}

/// Claims needed from one credential of a given schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestItem {
    pub schema: String,
    pub claims: Vec<ClaimRequirement>,
}

impl RequestItem {
    pub fn new(schema: impl Into<String>, claims: Vec<ClaimRequirement>) -> RequestItem {
        RequestItem { schema: schema.into(), claims }
    }
}

/// A verifier's request: schema-addressed items plus a fresh challenge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationRequest {
    pub challenge: Nonce,
    pub items: Vec<RequestItem>,
}

impl PresentationRequest {
    pub fn new(challenge: Nonce, items: Vec<RequestItem>) -> PresentationRequest {
        PresentationRequest { challenge, items }
    }

    pub fn with_random_challenge(rng: &mut dyn rand::RngCore, items: Vec<RequestItem>) -> PresentationRequest {
        let mut n = [0u8; 32];
        rng.fill_bytes(&mut n);
        PresentationRequest { challenge: Nonce(n), items }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedClaim {
    pub name: String,
    pub value: ClaimValue,
    pub salt: Salt,
    /// Path from this claim's commitment to the credential's commitment root.
    pub proof: InclusionProof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithheldCommitment {
    pub index: u64,
    pub commitment: Digest,
}

/// A credential as shown to a verifier: signed metadata, opened claims, and
/// bare commitments for everything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedCredential {
    pub credential: Credential,
    pub disclosed: Vec<DisclosedClaim>,
    pub withheld: Vec<WithheldCommitment>,
}

impl PresentedCredential {
    /// Opens exactly `names` and withholds the rest. Names not in the bundle
    /// are skipped.
    pub fn build(credential: &Credential, bundle: &DisclosureBundle, names: &[&str]) -> PresentedCredential {
        let tree = bundle.tree();
        let mut disclosed = Vec::new();
        let mut withheld = Vec::new();
        for (index, (name, opening)) in bundle.claims.iter().enumerate() {
            let index = index as u64;
            if names.contains(&name.as_str()) {
                disclosed.push(DisclosedClaim {
                    name: name.clone(),
                    value: opening.value.clone(),
                    salt: opening.salt,
                    proof: tree.prove_inclusion(index).expect("index within tree"),
                });
            } else {
                let commitment = crate::credentials::commit(&opening.salt, name, &opening.value);
                withheld.push(WithheldCommitment { index, commitment });
            }
        }
        PresentedCredential { credential: credential.clone(), disclosed, withheld }
    }

    pub fn disclosed_names(&self) -> impl Iterator<Item = &str> {
        self.disclosed.iter().map(|d| d.name.as_str())
    }
}

/// A holder-signed, challenge-bound set of presented credentials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub holder: Did,
    pub holder_key_version: u64,
    pub challenge: Nonce,
    pub credentials: Vec<PresentedCredential>,
    pub holder_signature: Signature,
}

#[derive(Serialize)]
struct UnsignedPresentation<'a> {
    holder: &'a Did,
    holder_key_version: u64,
    challenge: &'a Nonce,
    credentials: &'a [PresentedCredential],
}

impl Presentation {
    pub(crate) fn sign(
        holder: Did,
        holder_key_version: u64,
        challenge: Nonce,
        credentials: Vec<PresentedCredential>,
        keys: &KeyPair,
    ) -> Presentation {
        let mut p = Presentation {
            holder,
            holder_key_version,
            challenge,
            credentials,
            holder_signature: Signature([0; 64]),
        };
        p.holder_signature = keys.sign(&p.signing_payload());
        p
    }

    pub fn signing_payload(&self) -> Vec<u8> {
        signing_input(
            PRESENTATION_PURPOSE,
            &UnsignedPresentation {
                holder: &self.holder,
                holder_key_version: self.holder_key_version,
                challenge: &self.challenge,
                credentials: &self.credentials,
            },
        )
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self)
    }

    /// Strict canonical parse.
    pub fn from_canonical(bytes: &[u8]) -> Result<Presentation, CanonicalError> {
        from_canonical_slice(bytes)
    }

    /// Every claim name opened anywhere in the presentation.
    pub fn disclosed_names(&self) -> std::collections::BTreeSet<String> {
        self.credentials
            .iter()
            .flat_map(|c| c.disclosed_names().map(str::to_owned))
            .collect()
    }
}
