//! SHA-256 digests and Ed25519 keys.

use std::fmt;

use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::LedgerError;

pub use ed25519_dalek::{SigningKey as SecretKey, VerifyingKey as PublicKey};

/// A 32-byte SHA-256 digest. Renders as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, LedgerError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| LedgerError::BadHex(s.to_owned()))?;
        Ok(Digest(out))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Number of leading `'0'` characters in the hex rendering.
    pub fn leading_zero_nibbles(&self) -> u32 {
        let mut n = 0;
        for b in self.0 {
            if b == 0 {
                n += 2;
                continue;
            }
            if b >> 4 == 0 {
                n += 1;
            }
            break;
        }
        n
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A 64-byte Ed25519 signature. The all-zero value marks an unsigned transaction.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub const EMPTY: Signature = Signature([0u8; 64]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl Default for Signature {
    fn default() -> Self {
        Self::EMPTY
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}…)", &self.to_hex()[..16])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 64];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Signature(out))
    }
}

pub fn sha256_digest(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Deterministic Ed25519 keypair from a 32-byte seed.
pub fn keypair_from_seed(seed: &[u8]) -> Result<(SecretKey, PublicKey), LedgerError> {
    let seed: [u8; 32] = seed.try_into().map_err(|_| LedgerError::SeedLength(seed.len()))?;
    let sk = SecretKey::from_bytes(&seed);
    let pk = sk.verifying_key();
    Ok((sk, pk))
}

/// Derives a stable 32-byte seed from a label, for built-in identities.
pub fn seed_from_label(label: &str) -> [u8; 32] {
    sha256_digest(label.as_bytes()).0
}

pub fn sign_digest(sk: &SecretKey, digest: &Digest) -> Signature {
    Signature(sk.sign(&digest.0).to_bytes())
}

pub fn verify_digest(pk: &PublicKey, digest: &Digest, sig: &Signature) -> bool {
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    pk.verify(&digest.0, &sig).is_ok()
}

pub(crate) mod pubkey_hex {
    use super::PublicKey;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(pk: &PublicKey, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(pk.as_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PublicKey, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        PublicKey::from_bytes(&out).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_published_vectors() {
        assert_eq!(
            sha256_digest(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_digest(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sha256_is_deterministic_on_large_input() {
        let data: Vec<u8> = (0..(1usize << 20)).map(|i| (i * 31 % 251) as u8).collect();
        assert_eq!(sha256_digest(&data), sha256_digest(&data));
    }

    // RFC 8032 section 7.1, TEST 1 and TEST 2.
    #[test]
    fn rfc8032_seed_vectors() {
        let cases = [
            (
                "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
                "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
            ),
            (
                "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
                "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
            ),
        ];
        for (seed, pk) in cases {
            let (_, got) = keypair_from_seed(&hex::decode(seed).unwrap()).unwrap();
            assert_eq!(hex::encode(got.as_bytes()), pk);
        }
    }

    #[test]
    fn keypair_determinism_and_distinctness() {
        let (_, a) = keypair_from_seed(&[7u8; 32]).unwrap();
        let (_, b) = keypair_from_seed(&[7u8; 32]).unwrap();
        let (_, c) = keypair_from_seed(&[8u8; 32]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_seed_length_is_an_error() {
        assert!(matches!(
            keypair_from_seed(&[0u8; 31]),
            Err(LedgerError::SeedLength(31))
        ));
    }

    #[test]
    fn leading_zero_nibbles() {
        let mut d = Digest([0xff; 32]);
        assert_eq!(d.leading_zero_nibbles(), 0);
        d.0[0] = 0x0f;
        assert_eq!(d.leading_zero_nibbles(), 1);
        d.0[0] = 0x00;
        d.0[1] = 0x01;
        assert_eq!(d.leading_zero_nibbles(), 3);
        assert_eq!(Digest::ZERO.leading_zero_nibbles(), 64);
    }
}
