use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::Serialize;

use super::IdentityError;
use crate::canonical::canonical_bytes;
use crate::digest::hex_bytes;

hex_bytes!(
    /// An Ed25519 verification key.
    PublicKey,
    32
);

hex_bytes!(
    /// An Ed25519 signature.
    Signature,
    64
);

impl PublicKey {
    /// Strict Ed25519 verification. Malformed keys never verify.
    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        key.verify_strict(message, &sig).is_ok()
    }

    pub fn is_well_formed(&self) -> bool {
        VerifyingKey::from_bytes(&self.0).is_ok()
    }
}

/// A signing key with its public half. Deterministic from a 32-byte seed.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; 32]) -> KeyPair {
        KeyPair { signing: SigningKey::from_bytes(seed) }
    }

    pub fn from_slice(seed: &[u8]) -> Result<KeyPair, IdentityError> {
        let seed: &[u8; 32] = seed
            .try_into()
            .map_err(|_| IdentityError::SeedLength { actual: seed.len() })?;
        Ok(KeyPair::from_seed(seed))
    }

    pub fn generate(rng: &mut dyn rand::RngCore) -> KeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        KeyPair::from_seed(&seed)
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public_key", &self.public_key()).finish_non_exhaustive()
    }
}

/// Signs `message` with raw secret key bytes.
pub fn sign(secret_key: &[u8], message: &[u8]) -> Result<Signature, IdentityError> {
    let key = KeyPair::from_slice(secret_key).map_err(|_| IdentityError::MalformedKey)?;
    Ok(key.sign(message))
}

/// Verifies `signature` over `message` under raw public key bytes.
///
/// A key that is the wrong length or not a valid curve point is an error; a
/// signature that does not verify (including one of the wrong length) is `false`.
pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, IdentityError> {
    let bytes: [u8; 32] = public_key.try_into().map_err(|_| IdentityError::MalformedKey)?;
    let key = PublicKey(bytes);
    if !key.is_well_formed() {
        return Err(IdentityError::MalformedKey);
    }
    let Ok(sig) = <[u8; 64]>::try_from(signature) else {
        return Ok(false);
    };
    Ok(key.verify(message, &Signature(sig)))
}

/// Domain-separated bytes to sign: `{"body":..,"purpose":..}` in canonical form.
pub fn signing_input<T: Serialize + ?Sized>(purpose: &str, body: &T) -> Vec<u8> {
    #[derive(Serialize)]
    struct Envelope<'a, T: ?Sized> {
        purpose: &'a str,
        body: &'a T,
    }
    canonical_bytes(&Envelope { purpose, body })
}
