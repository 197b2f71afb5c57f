//! Append-only Merkle log with RFC 6962 hashing, inclusion proofs, and
//! consistency proofs.
//!
//! Leaf hash is `SHA-256(0x00 || leaf)`, interior hash is
//! `SHA-256(0x01 || left || right)`, and a tree of `n > 1` leaves splits at the
//! largest power of two strictly below `n`. The empty tree hashes to
//! `SHA-256("")`.

mod file;
mod operated;
mod proof;
mod signed;

pub use file::{read_leaves, PersistentLog};
pub use operated::OperatedLog;
pub use proof::{verify_consistency, verify_inclusion, verify_inclusion_root, ConsistencyProof, InclusionProof};
pub use signed::{SignedRoot, TreeHead};

use crate::digest::{sha256, sha256_concat, Digest};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogError {
    #[error("index {index} out of range for tree of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("invalid size pair ({old_size}, {new_size}) for log of size {size}")]
    SizeOrder { old_size: u64, new_size: u64, size: u64 },
    #[error("log storage: {0}")]
    Storage(String),
}

pub fn leaf_hash(leaf: &[u8]) -> Digest {
    sha256_concat(&[&[0x00], leaf])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    sha256_concat(&[&[0x01], left.as_bytes(), right.as_bytes()])
}

pub fn empty_root() -> Digest {
    sha256(b"")
}

/// Largest power of two strictly less than `n` (`n >= 2`).
pub(crate) fn split_point(n: u64) -> u64 {
    debug_assert!(n >= 2);
    1 << (63 - (n - 1).leading_zeros())
}

/// Root over an in-memory list of leaves, without building a log.
pub fn merkle_root<L: AsRef<[u8]>>(leaves: &[L]) -> Digest {
    let mut log = MerkleLog::new();
    for leaf in leaves {
        log.append(leaf.as_ref().to_vec());
    }
    log.root()
}

/// In-memory append-only log.
///
/// `levels[k][i]` caches the hash of the complete subtree of `2^k` leaves
/// starting at leaf `i * 2^k`, so appends cost O(log n) and every subtree hash
/// the proofs need is O(log n).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MerkleLog {
    leaves: Vec<Vec<u8>>,
    levels: Vec<Vec<Digest>>,
}

impl MerkleLog {
    pub fn new() -> MerkleLog {
        MerkleLog::default()
    }

    pub fn from_leaves<I: IntoIterator<Item = Vec<u8>>>(leaves: I) -> MerkleLog {
        let mut log = MerkleLog::new();
        for leaf in leaves {
            log.append(leaf);
        }
        log
    }

    pub fn size(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaf(&self, index: u64) -> Option<&[u8]> {
        self.leaves.get(index as usize).map(Vec::as_slice)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u8]> {
        self.leaves.iter().map(Vec::as_slice)
    }

    /// Appends a leaf and returns its index.
    pub fn append(&mut self, leaf: Vec<u8>) -> u64 {
        let index = self.size();
        let mut hash = leaf_hash(&leaf);
        self.leaves.push(leaf);
        let mut level = 0;
        loop {
            if self.levels.len() == level {
                self.levels.push(Vec::new());
            }
            self.levels[level].push(hash);
            let len = self.levels[level].len();
            if len % 2 == 1 {
                break;
            }
            hash = node_hash(&self.levels[level][len - 2], &self.levels[level][len - 1]);
            level += 1;
        }
        index
    }

    pub fn root(&self) -> Digest {
        self.root_at(self.size()).expect("current size is in range")
    }

    /// Root of the first `size` leaves.
    pub fn root_at(&self, size: u64) -> Result<Digest, LogError> {
        if size > self.size() {
            return Err(LogError::IndexOutOfRange { index: size, size: self.size() });
        }
        if size == 0 {
            return Ok(empty_root());
        }
        Ok(self.subtree(0, size))
    }

    pub fn tree_head(&self) -> TreeHead {
        TreeHead { tree_size: self.size(), root: self.root() }
    }

    /// Hash of leaves `[start, end)`, `start < end <= size`.
    fn subtree(&self, start: u64, end: u64) -> Digest {
        let n = end - start;
        if n.is_power_of_two() && start.is_multiple_of(n) {
            let level = n.trailing_zeros() as usize;
            return self.levels[level][(start >> level) as usize];
        }
        let k = split_point(n);
        node_hash(&self.subtree(start, start + k), &self.subtree(start + k, end))
    }

    /// Audit path for leaf `index` in the tree of the first `tree_size` leaves.
    pub fn prove_inclusion_at(&self, index: u64, tree_size: u64) -> Result<InclusionProof, LogError> {
        if tree_size > self.size() || index >= tree_size {
            return Err(LogError::IndexOutOfRange { index, size: tree_size.min(self.size()) });
        }
        let mut path = Vec::new();
        self.path(index, 0, tree_size, &mut path);
        Ok(InclusionProof { leaf_index: index, tree_size, path })
    }

    pub fn prove_inclusion(&self, index: u64) -> Result<InclusionProof, LogError> {
        self.prove_inclusion_at(index, self.size())
    }

    // Siblings are pushed leaf-upwards.
    fn path(&self, m: u64, start: u64, end: u64, out: &mut Vec<Digest>) {
        let n = end - start;
        if n <= 1 {
            return;
        }
        let k = split_point(n);
        if m < k {
            self.path(m, start, start + k, out);
            out.push(self.subtree(start + k, end));
        } else {
            self.path(m - k, start + k, end, out);
            out.push(self.subtree(start, start + k));
        }
    }

    /// Proof that the tree of `old_size` leaves is a prefix of the tree of `new_size` leaves.
    pub fn prove_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, LogError> {
        if old_size == 0 || old_size > new_size || new_size > self.size() {
            return Err(LogError::SizeOrder { old_size, new_size, size: self.size() });
        }
        let mut path = Vec::new();
        if old_size < new_size {
            self.subproof(old_size, 0, new_size, true, &mut path);
        }
        Ok(ConsistencyProof { old_size, new_size, path })
    }

    fn subproof(&self, m: u64, start: u64, end: u64, complete: bool, out: &mut Vec<Digest>) {
        let n = end - start;
        if m == n {
            if !complete {
                out.push(self.subtree(start, end));
            }
            return;
        }
        let k = split_point(n);
        if m <= k {
            self.subproof(m, start, start + k, complete, out);
            out.push(self.subtree(start + k, end));
        } else {
            self.subproof(m - k, start + k, end, false, out);
            out.push(self.subtree(start, start + k));
        }
    }
}
