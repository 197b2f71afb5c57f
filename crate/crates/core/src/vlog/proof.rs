use serde::{Deserialize, Serialize};

use super::{leaf_hash, node_hash, SignedRoot};
use crate::digest::Digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub tree_size: u64,
    /// Sibling hashes from the leaf upwards.
    pub path: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Digest>,
}

/// Checks that `leaf` sits at `index` in the tree committed to by `signed_root`.
///
/// Only the tree head is used here; authenticate the signed root itself with
/// [`SignedRoot::verify`].
pub fn verify_inclusion(leaf: &[u8], index: u64, proof: &InclusionProof, signed_root: &SignedRoot) -> bool {
    proof.leaf_index == index
        && proof.tree_size == signed_root.head.tree_size
        && verify_inclusion_root(&leaf_hash(leaf), proof, &signed_root.head.root)
}

/// Recomputes the root from a leaf hash and audit path.
pub fn verify_inclusion_root(leaf_hash: &Digest, proof: &InclusionProof, root: &Digest) -> bool {
    if proof.leaf_index >= proof.tree_size {
        return false;
    }
    let mut index = proof.leaf_index;
    let mut last = proof.tree_size - 1;
    let mut hash = *leaf_hash;
    for sibling in &proof.path {
        if last == 0 {
            return false;
        }
        if index & 1 == 1 || index == last {
            hash = node_hash(sibling, &hash);
            if index & 1 == 0 {
                while index & 1 == 0 && index != 0 {
                    index >>= 1;
                    last >>= 1;
                }
            }
        } else {
            hash = node_hash(&hash, sibling);
        }
        index >>= 1;
        last >>= 1;
    }
    last == 0 && hash == *root
}

/// Checks that the tree with `old_root` is a prefix of the tree with `new_root`.
pub fn verify_consistency(old_root: &Digest, new_root: &Digest, proof: &ConsistencyProof) -> bool {
    let (old_size, new_size) = (proof.old_size, proof.new_size);
    if old_size == 0 || old_size > new_size {
        return false;
    }
    if old_size == new_size {
        return proof.path.is_empty() && old_root == new_root;
    }
    let mut path: Vec<Digest> = Vec::with_capacity(proof.path.len() + 1);
    if old_size.is_power_of_two() {
        path.push(*old_root);
    }
    path.extend_from_slice(&proof.path);
    let Some((first, rest)) = path.split_first() else {
        return false;
    };

    let mut node = old_size - 1;
    let mut last = new_size - 1;
    while node & 1 == 1 {
        node >>= 1;
        last >>= 1;
    }
    let mut old_hash = *first;
    let mut new_hash = *first;
    for sibling in rest {
        if last == 0 {
            return false;
        }
        if node & 1 == 1 || node == last {
            old_hash = node_hash(sibling, &old_hash);
            new_hash = node_hash(sibling, &new_hash);
            while node & 1 == 0 && node != 0 {
                node >>= 1;
                last >>= 1;
            }
        } else {
            new_hash = node_hash(&new_hash, sibling);
        }
        node >>= 1;
        last >>= 1;
    }
    last == 0 && old_hash == *old_root && new_hash == *new_root
}
