use super::{InclusionProof, LogError, MerkleLog, SignedRoot};
use crate::identity::{Did, KeyPair};

/// A public log with a named operator. The operator DID doubles as the log id
/// in audit and agreement coordinates.
#[derive(Debug, Clone)]
pub struct OperatedLog {
    operator: Did,
    log: MerkleLog,
}

impl OperatedLog {
    pub fn new(operator: Did) -> OperatedLog {
        OperatedLog { operator, log: MerkleLog::new() }
    }

    pub fn operator(&self) -> Did {
        self.operator
    }

    pub fn log(&self) -> &MerkleLog {
        &self.log
    }

    pub fn size(&self) -> u64 {
        self.log.size()
    }

    pub fn append(&mut self, leaf: Vec<u8>) -> u64 {
        self.log.append(leaf)
    }

    pub fn prove_inclusion(&self, index: u64) -> Result<InclusionProof, LogError> {
        self.log.prove_inclusion(index)
    }

    pub fn signed_root(&self, keys: &KeyPair) -> SignedRoot {
        SignedRoot::sign(self.log.tree_head(), self.operator(), keys)
    }
}
