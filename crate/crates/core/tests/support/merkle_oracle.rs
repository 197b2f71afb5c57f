//! Brute-force Merkle reference: direct recursion over the full leaf list,
//! no caching, no shared code with the library.

use sha2::{Digest as _, Sha256};

pub type Hash = [u8; 32];

fn h(parts: &[&[u8]]) -> Hash {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hasher.finalize().into()
}

fn largest_pow2_below(n: usize) -> usize {
    let mut k = 1;
    while k * 2 < n {
        k *= 2;
    }
    k
}

pub fn root(leaves: &[Vec<u8>]) -> Hash {
    match leaves.len() {
        0 => h(&[b""]),
        1 => h(&[&[0u8], &leaves[0]]),
        n => {
            let k = largest_pow2_below(n);
            h(&[&[1u8], &root(&leaves[..k]), &root(&leaves[k..])])
        }
    }
}

pub fn path(m: usize, leaves: &[Vec<u8>]) -> Vec<Hash> {
    let n = leaves.len();
    if n <= 1 {
        return vec![];
    }
    let k = largest_pow2_below(n);
    if m < k {
        let mut p = path(m, &leaves[..k]);
        p.push(root(&leaves[k..]));
        p
    } else {
        let mut p = path(m - k, &leaves[k..]);
        p.push(root(&leaves[..k]));
        p
    }
}

fn subproof(m: usize, leaves: &[Vec<u8>], complete: bool) -> Vec<Hash> {
    let n = leaves.len();
    if m == n {
        return if complete { vec![] } else { vec![root(leaves)] };
    }
    let k = largest_pow2_below(n);
    if m <= k {
        let mut p = subproof(m, &leaves[..k], complete);
        p.push(root(&leaves[k..]));
        p
    } else {
        let mut p = subproof(m - k, &leaves[k..], false);
        p.push(root(&leaves[..k]));
        p
    }
}

pub fn consistency(old: usize, leaves: &[Vec<u8>]) -> Vec<Hash> {
    if old == leaves.len() {
        return vec![];
    }
    subproof(old, leaves, true)
}

/// True iff `old` is a prefix of `new`, judged by rebuilding both trees.
pub fn is_prefix(old: &[Vec<u8>], new: &[Vec<u8>]) -> bool {
    old.len() <= new.len() && root(old) == root(&new[..old.len()])
}
