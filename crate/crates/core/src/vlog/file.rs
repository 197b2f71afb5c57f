use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{LogError, MerkleLog};

/// Reads a log file: a sequence of `u32` big-endian length prefixes, each
/// followed by that many leaf bytes. A truncated trailing record is an error.
pub fn read_leaves(path: &Path) -> Result<Vec<Vec<u8>>, LogError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| LogError::Storage(e.to_string()))?;
    let mut leaves = Vec::new();
    let mut rest = bytes.as_slice();
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(LogError::Storage("truncated length prefix".into()));
        }
        let len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(LogError::Storage("truncated leaf".into()));
        }
        leaves.push(rest[..len].to_vec());
        rest = &rest[len..];
    }
    Ok(leaves)
}

/// A [`MerkleLog`] mirrored to an append-only file.
#[derive(Debug)]
pub struct PersistentLog {
    path: PathBuf,
    log: MerkleLog,
}

impl PersistentLog {
    /// Opens `path`, creating an empty log file if it does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<PersistentLog, LogError> {
        let path = path.into();
        let log = if path.exists() {
            MerkleLog::from_leaves(read_leaves(&path)?)
        } else {
            File::create(&path).map_err(|e| LogError::Storage(e.to_string()))?;
            MerkleLog::new()
        };
        Ok(PersistentLog { path, log })
    }

    pub fn append(&mut self, leaf: Vec<u8>) -> Result<u64, LogError> {
        let len = u32::try_from(leaf.len()).map_err(|_| LogError::Storage("leaf larger than 4 GiB".into()))?;
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| LogError::Storage(e.to_string()))?;
        let mut record = Vec::with_capacity(4 + leaf.len());
        record.extend_from_slice(&len.to_be_bytes());
        record.extend_from_slice(&leaf);
        file.write_all(&record).map_err(|e| LogError::Storage(e.to_string()))?;
        Ok(self.log.append(leaf))
    }

    pub fn log(&self) -> &MerkleLog {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reopen_reproduces_root() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.bin");
        let root = {
            let mut log = PersistentLog::open(&path).unwrap();
            for i in 0..9u8 {
                assert_eq!(log.append(vec![i; i as usize]).unwrap(), i as u64);
            }
            log.log().root()
        };
        let reopened = PersistentLog::open(&path).unwrap();
        assert_eq!(reopened.log().size(), 9);
        assert_eq!(reopened.log().root(), root);
        assert_eq!(reopened.log().leaf(0), Some(&[][..]));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.bin");
        std::fs::write(&path, [0, 0, 0, 5, 1, 2]).unwrap();
        assert!(PersistentLog::open(&path).is_err());
    }
}
