use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClaimValue, CredentialError};
use crate::digest::{sha256_concat, Digest, Salt};
use crate::vlog::{merkle_root, InclusionProof, MerkleLog};

/// Byte separating claim name from value inside a commitment.
pub const SEPARATOR: u8 = 0x1f;

/// `SHA-256(salt || claim_name || 0x1F || canonical value)`.
pub fn commit(salt: &Salt, claim_name: &str, value: &ClaimValue) -> Digest {
    sha256_concat(&[salt.as_bytes(), claim_name.as_bytes(), &[SEPARATOR], value.render().as_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaltedCommitment {
    pub claim_name: String,
    pub salt: Salt,
    pub commitment: Digest,
}

impl SaltedCommitment {
    pub fn new(claim_name: &str, salt: Salt, value: &ClaimValue) -> SaltedCommitment {
        SaltedCommitment { claim_name: claim_name.to_owned(), salt, commitment: commit(&salt, claim_name, value) }
    }

    pub fn opens_to(&self, value: &ClaimValue) -> bool {
        commit(&self.salt, &self.claim_name, value) == self.commitment
    }
}

/// Merkle root over the commitments sorted by claim name.
pub fn commitment_root(commitments: &[SaltedCommitment]) -> Result<Digest, CredentialError> {
    if commitments.is_empty() {
        return Err(CredentialError::Empty);
    }
    let mut sorted: Vec<&SaltedCommitment> = commitments.iter().collect();
    sorted.sort_by(|a, b| a.claim_name.cmp(&b.claim_name));
    let leaves: Vec<&[u8]> = sorted.iter().map(|c| c.commitment.as_bytes().as_slice()).collect();
    Ok(merkle_root(&leaves))
}

/// One claim opening held privately by the holder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimOpening {
    pub salt: Salt,
    pub value: ClaimValue,
}

/// Every salt and value for one credential. Kept by the holder, never embedded
/// in the credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosureBundle {
    pub credential_id: String,
    pub claims: BTreeMap<String, ClaimOpening>,
}

impl DisclosureBundle {
    /// Commitments in leaf order (sorted by claim name).
    pub fn commitments(&self) -> Vec<SaltedCommitment> {
        self.claims
            .iter()
            .map(|(name, o)| SaltedCommitment::new(name, o.salt, &o.value))
            .collect()
    }

    pub fn root(&self) -> Result<Digest, CredentialError> {
        commitment_root(&self.commitments())
    }

    pub fn leaf_index(&self, claim_name: &str) -> Option<u64> {
        self.claims.keys().position(|k| k == claim_name).map(|i| i as u64)
    }

    pub(crate) fn tree(&self) -> MerkleLog {
        MerkleLog::from_leaves(self.commitments().into_iter().map(|c| c.commitment.0.to_vec()))
    }

    /// Authentication path for `claim_name` against the commitment root.
    pub fn prove(&self, claim_name: &str) -> Option<InclusionProof> {
        let index = self.leaf_index(claim_name)?;
        self.tree().prove_inclusion(index).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::{sha256, Salt};
    use crate::vlog::leaf_hash;

    fn salt(b: u8) -> Salt {
        Salt([b; 16])
    }

    #[test]
    fn commitment_layout() {
        let c = commit(&salt(1), "name", &ClaimValue::text("John"));
        let mut expected = vec![1u8; 16];
        expected.extend_from_slice(b"name\x1fJohn");
        assert_eq!(c, sha256(&expected));
    }

    #[test]
    fn single_commitment_root_is_its_leaf_hash() {
        let c = SaltedCommitment::new("a", salt(2), &ClaimValue::Integer(5));
        assert_eq!(commitment_root(std::slice::from_ref(&c)).unwrap(), leaf_hash(c.commitment.as_bytes()));
        assert!(matches!(commitment_root(&[]), Err(CredentialError::Empty)));
    }

    #[test]
    fn root_ignores_insertion_order() {
        let cs: Vec<SaltedCommitment> = ["delta", "alpha", "charlie", "bravo"]
            .iter()
            .enumerate()
            .map(|(i, n)| SaltedCommitment::new(n, salt(i as u8), &ClaimValue::Integer(i as i64)))
            .collect();
        let mut reversed = cs.clone();
        reversed.reverse();
        assert_eq!(commitment_root(&cs).unwrap(), commitment_root(&reversed).unwrap());
    }

    #[test]
    fn commitment_depends_on_salt() {
        let v = ClaimValue::date(1995, 6, 1);
        assert_ne!(commit(&salt(1), "birthdate", &v), commit(&salt(2), "birthdate", &v));
    }

    #[test]
    fn separator_prevents_name_value_ambiguity() {
        // "ab" + "c" and "a" + "bc" must not collide.
        assert_ne!(
            commit(&salt(0), "ab", &ClaimValue::text("c")),
            commit(&salt(0), "a", &ClaimValue::text("bc"))
        );
    }
}
