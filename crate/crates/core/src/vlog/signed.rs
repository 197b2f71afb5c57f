use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::identity::{signing_input, Did, KeyPair, PublicKey, Resolver, Signature};

const TREE_HEAD_PURPOSE: &str = "didtrust/tree-head";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeHead {
    pub tree_size: u64,
    pub root: Digest,
}

/// A tree head signed by the log operator. Produced on demand, not per append.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedRoot {
    pub head: TreeHead,
    pub operator: Did,
    pub signature: Signature,
}

/// What the operator signs: the head and the operator's own DID.
#[derive(Serialize)]
struct SignedBody<'a> {
    head: &'a TreeHead,
    operator: &'a Did,
}

fn body_bytes(head: &TreeHead, operator: &Did) -> Vec<u8> {
    signing_input(TREE_HEAD_PURPOSE, &SignedBody { head, operator })
}

impl SignedRoot {
    pub fn sign(head: TreeHead, operator: Did, keys: &KeyPair) -> SignedRoot {
        let signature = keys.sign(&body_bytes(&head, &operator));
        SignedRoot { head, operator, signature }
    }

    pub fn verify(&self, operator_key: &PublicKey) -> bool {
        operator_key.verify(&body_bytes(&self.head, &self.operator), &self.signature)
    }

    /// Verifies under the operator's active key as resolved through `resolver`.
    pub fn verify_with(&self, resolver: &dyn Resolver) -> bool {
        resolver
            .resolve(&self.operator)
            .ok()
            .and_then(|doc| doc.active_key)
            .is_some_and(|key| self.verify(&key))
    }
}
