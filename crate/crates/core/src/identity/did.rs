use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::keys::PublicKey;
use super::IdentityError;
use crate::digest::{sha256, sha256_concat, Digest};

pub const METHOD: &str = "sim";
const PREFIX: &str = "did:sim:";

/// A `did:sim` identifier. The method-specific id is a SHA-256 digest: of the
/// inception key for active DIDs, of `controller id || asset label` for passive ones.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Did {
    id: Digest,
}

impl Did {
    pub fn from_id(id: Digest) -> Did {
        Did { id }
    }

    pub fn from_public_key(key: &PublicKey) -> Did {
        Did { id: sha256(key.as_bytes()) }
    }

    pub fn passive(controller: &Did, asset_label: &str) -> Did {
        Did { id: sha256_concat(&[controller.id.as_bytes(), asset_label.as_bytes()]) }
    }

    pub fn id(&self) -> &Digest {
        &self.id
    }

    pub fn method(&self) -> &'static str {
        METHOD
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{PREFIX}{}", self.id)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({self})")
    }
}

impl FromStr for Did {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix(PREFIX)
            .ok_or_else(|| IdentityError::MalformedDid(s.to_owned()))?;
        let id = hex.parse().map_err(|_| IdentityError::MalformedDid(s.to_owned()))?;
        Ok(Did { id })
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
