//! Decentralized identifiers (`did:sim`), their documents and key-event chains,
//! and the registry they resolve through.
//!
//! An active DID's id is the SHA-256 digest of its inception key; later keys are
//! introduced by rotation events, each signed by the key it retires. A passive
//! DID names an asset and is controlled by an active DID.

mod did;
mod document;
mod keys;
mod registry;

pub use did::{Did, METHOD};
pub use document::{DidDocument, EventBody, KeyEvent};
pub use keys::{sign, signing_input, verify, KeyPair, PublicKey, Signature};
pub use registry::{Registry, RegistrySnapshot, Resolver};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("seed must be 32 bytes, got {actual}")]
    SeedLength { actual: usize },
    #[error("malformed key")]
    MalformedKey,
    #[error("malformed DID: {0}")]
    MalformedDid(String),
    #[error("{0} not found")]
    NotFound(Did),
    #[error("controller {0} is not registered")]
    UnknownController(Did),
    #[error("controller {0} is passive")]
    ControllerIsPassive(Did),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("{did}: stored version {stored} is newer than offered version {offered}")]
    VersionRegression { did: Did, stored: u64, offered: u64 },
    #[error("{0}: offered event chain does not extend the stored chain")]
    ChainConflict(Did),
    #[error("storage: {0}")]
    Storage(String),
}

/// Derives a DID, key pair, and version-1 document from 32 bytes of entropy.
pub fn generate_did(seed: &[u8]) -> Result<(Did, KeyPair, DidDocument), IdentityError> {
    let keys = KeyPair::from_slice(seed)?;
    let doc = DidDocument::inception(&keys);
    Ok((doc.did, keys, doc))
}

/// Generates a DID from `rng` and registers it.
pub fn generate_and_register(
    rng: &mut dyn rand::RngCore,
    registry: &Registry,
) -> Result<(Did, KeyPair, DidDocument), IdentityError> {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let generated = generate_did(&seed)?;
    registry.register(generated.2.clone())?;
    Ok(generated)
}

/// A peer-wise DID: generated for one relationship and registered only in the
/// registry the two peers share for that session.
pub fn generate_peer_did(
    rng: &mut dyn rand::RngCore,
    session_registry: &Registry,
) -> Result<(Did, KeyPair, DidDocument), IdentityError> {
    generate_and_register(rng, session_registry)
}

/// Registers a passive DID for an asset, controlled by an active DID.
///
/// The passive inception event is signed by the controller's active key, so the
/// caller must hold it.
pub fn create_passive_did(
    controller: &Did,
    controller_keys: &KeyPair,
    asset_label: &str,
    registry: &Registry,
) -> Result<(Did, DidDocument), IdentityError> {
    let controller_doc = match registry.resolve(controller) {
        Ok(doc) => doc,
        Err(IdentityError::NotFound(_)) => return Err(IdentityError::UnknownController(*controller)),
        Err(e) => return Err(e),
    };
    if controller_doc.passive {
        return Err(IdentityError::ControllerIsPassive(*controller));
    }
    if controller_doc.active_key != Some(controller_keys.public_key()) {
        return Err(IdentityError::Unauthorized(format!("not the active key of {controller}")));
    }
    let doc = DidDocument::passive_inception(&controller_doc, controller_keys, asset_label);
    registry.register(doc.clone())?;
    Ok((doc.did, doc))
}

/// Resolves the latest registered, validated document.
pub fn resolve(did: &Did, registry: &dyn Resolver) -> Result<DidDocument, IdentityError> {
    registry.resolve(did)
}

/// Rotates `did` to `new_public_key`. The rotation event is signed by the
/// outgoing key, which must be the document's active key.
pub fn rotate_key(
    did: &Did,
    current: &KeyPair,
    new_public_key: PublicKey,
    registry: &Registry,
) -> Result<DidDocument, IdentityError> {
    let doc = registry.resolve(did)?;
    if doc.passive || doc.active_key != Some(current.public_key()) {
        return Err(IdentityError::Unauthorized(format!("signer is not the active key of {did}")));
    }
    if !new_public_key.is_well_formed() {
        return Err(IdentityError::MalformedKey);
    }
    let next = doc.rotated(current, new_public_key);
    registry.register(next.clone())?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::sha256;

    fn seed(b: u8) -> [u8; 32] {
        [b; 32]
    }

    #[test]
    fn zero_seed_did_matches_reference() {
        // SHA-256 of the zero-seed Ed25519 public key, computed independently.
        let (did, keys, doc) = generate_did(&[0u8; 32]).unwrap();
        assert_eq!(
            did.to_string(),
            "did:sim:139e3940e64b5491722088d9a0d741628fc826e09475d341a780acde3c4b8070"
        );
        assert_eq!(keys.public_key(), doc.active_key.unwrap());
        let (did2, _, doc2) = generate_did(&[0u8; 32]).unwrap();
        assert_eq!(did, did2);
        assert_eq!(
            crate::canonical::canonical_bytes(&doc),
            crate::canonical::canonical_bytes(&doc2)
        );
    }

    #[test]
    fn seed_length_enforced() {
        assert_eq!(generate_did(&[0u8; 31]).unwrap_err(), IdentityError::SeedLength { actual: 31 });
        assert_eq!(generate_did(&[0u8; 33]).unwrap_err(), IdentityError::SeedLength { actual: 33 });
    }

    #[test]
    fn one_byte_difference_gives_distinct_dids() {
        let mut s = [0u8; 32];
        let (a, _, _) = generate_did(&s).unwrap();
        s[31] = 1;
        let (b, _, _) = generate_did(&s).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn inception_defaults() {
        let (did, _, doc) = generate_did(&seed(3)).unwrap();
        assert_eq!(doc.controller, did);
        assert_eq!(doc.version, 1);
        assert!(!doc.passive);
        assert_eq!(*did.id(), sha256(doc.active_key.unwrap().as_bytes()));
    }

    #[test]
    fn resolve_unregistered_is_not_found() {
        let reg = Registry::in_memory();
        let (did, _, _) = generate_did(&seed(1)).unwrap();
        assert_eq!(resolve(&did, &reg).unwrap_err(), IdentityError::NotFound(did));
    }

    #[test]
    fn register_then_resolve_round_trip() {
        let reg = Registry::in_memory();
        let (did, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc.clone()).unwrap();
        let got = resolve(&did, &reg).unwrap();
        assert_eq!(got, doc);
        assert_eq!(got.active_key, Some(keys.public_key()));
    }

    #[test]
    fn rotation_requires_active_key() {
        let reg = Registry::in_memory();
        let (did, _keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc).unwrap();
        let intruder = KeyPair::from_seed(&seed(9));
        let err = rotate_key(&did, &intruder, intruder.public_key(), &reg).unwrap_err();
        assert!(matches!(err, IdentityError::Unauthorized(_)));
    }

    #[test]
    fn old_key_no_longer_active_after_rotation() {
        let reg = Registry::in_memory();
        let (did, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc).unwrap();
        let next = KeyPair::from_seed(&seed(2));
        let rotated = rotate_key(&did, &keys, next.public_key(), &reg).unwrap();
        assert_eq!(rotated.version, 2);
        let current = resolve(&did, &reg).unwrap();
        assert_eq!(current.version, 2);
        assert_eq!(current.active_key, Some(next.public_key()));
        let msg = b"statement";
        assert!(!current.verify_active(msg, &keys.sign(msg)));
        assert!(current.verify_active(msg, &next.sign(msg)));
        // The retired key can no longer rotate.
        assert!(rotate_key(&did, &keys, keys.public_key(), &reg).is_err());
        assert_eq!(current.key_at_version(1), Some(keys.public_key()));
        assert_eq!(current.key_at_version(2), Some(next.public_key()));
        assert_eq!(current.key_at_version(3), None);
    }

    #[test]
    fn tampered_chain_is_rejected() {
        let reg = Registry::in_memory();
        let (did, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc.clone()).unwrap();
        let attacker = KeyPair::from_seed(&seed(6));
        // A rotation signed by a key that was never active.
        let forged = doc.rotated(&attacker, attacker.public_key());
        assert!(matches!(reg.register(forged), Err(IdentityError::InvalidDocument(_))));
        // Claimed fields that disagree with the chain.
        let mut lying = doc.rotated(&keys, attacker.public_key());
        lying.active_key = Some(keys.public_key());
        assert!(matches!(reg.register(lying), Err(IdentityError::InvalidDocument(_))));
        assert_eq!(resolve(&did, &reg).unwrap().version, 1);
    }

    #[test]
    fn versions_never_regress() {
        let reg = Registry::in_memory();
        let (did, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc.clone()).unwrap();
        let k2 = KeyPair::from_seed(&seed(2));
        rotate_key(&did, &keys, k2.public_key(), &reg).unwrap();
        assert!(matches!(reg.register(doc), Err(IdentityError::VersionRegression { .. })));
        // A conflicting fork at the same height is refused too.
        let fork = resolve(&did, &reg).unwrap();
        let k3 = KeyPair::from_seed(&seed(3));
        let mut alt = fork.clone();
        alt.event_chain.truncate(1);
        alt.version = 1;
        alt.active_key = Some(keys.public_key());
        let alt = alt.rotated(&keys, k3.public_key());
        assert_eq!(reg.register(alt).unwrap_err(), IdentityError::ChainConflict(did));
    }

    #[test]
    fn passive_did_lifecycle() {
        let reg = Registry::in_memory();
        let (owner, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc).unwrap();
        let (asset, asset_doc) = create_passive_did(&owner, &keys, "diploma-file", &reg).unwrap();
        assert!(asset_doc.passive);
        assert_eq!(asset_doc.controller, owner);
        assert_eq!(asset_doc.active_key, None);
        assert_eq!(resolve(&asset, &reg).unwrap(), asset_doc);

        // Digest oracle for distinct labels.
        let (other, _) = create_passive_did(&owner, &keys, "transcript-file", &reg).unwrap();
        assert_ne!(asset, other);
        let expected = crate::digest::sha256(&[owner.id().as_bytes().as_slice(), b"transcript-file"].concat());
        assert_eq!(*other.id(), expected);

        // Passive documents cannot control further assets.
        let err = create_passive_did(&asset, &keys, "x", &reg).unwrap_err();
        assert_eq!(err, IdentityError::ControllerIsPassive(asset));

        let (stranger, skeys, _) = generate_did(&seed(5)).unwrap();
        let err = create_passive_did(&stranger, &skeys, "x", &reg).unwrap_err();
        assert_eq!(err, IdentityError::UnknownController(stranger));
    }

    #[test]
    fn passive_did_survives_controller_rotation() {
        let reg = Registry::in_memory();
        let (owner, keys, doc) = generate_did(&seed(1)).unwrap();
        reg.register(doc).unwrap();
        let (asset, _) = create_passive_did(&owner, &keys, "model.bin", &reg).unwrap();
        rotate_key(&owner, &keys, KeyPair::from_seed(&seed(2)).public_key(), &reg).unwrap();
        assert!(resolve(&asset, &reg).is_ok());
    }

    #[test]
    fn directory_registry_persists_documents() {
        let dir = tempfile::tempdir().unwrap();
        let (did, keys, doc) = generate_did(&seed(4)).unwrap();
        {
            let reg = Registry::open_dir(dir.path()).unwrap();
            reg.register(doc).unwrap();
            rotate_key(&did, &keys, KeyPair::from_seed(&seed(5)).public_key(), &reg).unwrap();
        }
        let file = dir.path().join(format!("{}.json", did.id()));
        assert!(file.exists());
        let reopened = Registry::open_dir(dir.path()).unwrap();
        assert_eq!(resolve(&did, &reopened).unwrap().version, 2);
        assert_eq!(reopened.snapshot().unwrap().len(), 1);

        // Tampering on disk is caught at resolve time.
        let text = std::fs::read_to_string(&file).unwrap();
        let tampered = text.replacen("\"version\":2", "\"version\":3", 1);
        std::fs::write(&file, tampered).unwrap();
        assert!(matches!(resolve(&did, &reopened), Err(IdentityError::InvalidDocument(_))));
    }

    #[test]
    fn peer_dids_live_only_in_the_session_registry() {
        use rand::SeedableRng;
        let public = Registry::in_memory();
        let session = Registry::in_memory();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let (peer, _, _) = generate_peer_did(&mut rng, &session).unwrap();
        assert!(resolve(&peer, &session).is_ok());
        assert_eq!(resolve(&peer, &public).unwrap_err(), IdentityError::NotFound(peer));
    }
}
