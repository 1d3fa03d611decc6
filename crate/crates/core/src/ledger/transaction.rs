//! Signed ledger transactions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::codec::CanonicalEncoder;
use super::crypto::{sha256_digest, sign_digest, verify_digest, Digest, PublicKey, SecretKey, Signature};

/// A parameter value carried by a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl Scalar {
    fn encode(&self) -> CanonicalEncoder {
        let mut e = CanonicalEncoder::new();
        match self {
            Scalar::Bool(b) => e.str("b").bytes(&[*b as u8]),
            Scalar::Int(i) => e.str("i").i64(*i),
            Scalar::Real(r) => e.str("r").real(*r),
            Scalar::Text(s) => e.str("s").str(s),
        };
        e
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(i) => Some(*i as f64),
            Scalar::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Real(r) => write!(f, "{r}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Real(v)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<bool> for Scalar {
    fn from(v: bool) -> Self {
        Scalar::Bool(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Text(v.to_owned())
    }
}

impl From<String> for Scalar {
    fn from(v: String) -> Self {
        Scalar::Text(v)
    }
}

pub type Params = BTreeMap<String, Scalar>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Decision,
    Governance,
    Conflict,
    Anchor,
    Emergency,
}

impl TxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TxKind::Decision => "decision",
            TxKind::Governance => "governance",
            TxKind::Conflict => "conflict",
            TxKind::Anchor => "anchor",
            TxKind::Emergency => "emergency",
        }
    }
}

/// Everything a transaction carries before it is hashed and signed.
#[derive(Debug, Clone, PartialEq)]
pub struct TxDraft {
    pub tx_id: String,
    pub agent_id: String,
    pub kind: TxKind,
    pub device_id: Option<String>,
    pub action: String,
    pub params: Params,
    pub confidence: f64,
    pub timestamp_ms: i64,
}

impl TxDraft {
    /// Computes the payload hash; the result still needs a signature.
    pub fn seal(self) -> Transaction {
        let payload_hash = payload_digest(&self);
        Transaction {
            tx_id: self.tx_id,
            agent_id: self.agent_id,
            kind: self.kind,
            device_id: self.device_id,
            action: self.action,
            params: self.params,
            confidence: self.confidence,
            timestamp_ms: self.timestamp_ms,
            payload_hash,
            signature: Signature::EMPTY,
        }
    }

    pub fn seal_and_sign(self, sk: &SecretKey) -> Transaction {
        sign_transaction(self.seal(), sk)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: String,
    pub agent_id: String,
    pub kind: TxKind,
    pub device_id: Option<String>,
    pub action: String,
    pub params: Params,
    pub confidence: f64,
    pub timestamp_ms: i64,
    pub payload_hash: Digest,
    pub signature: Signature,
}

fn encode_payload(
    e: &mut CanonicalEncoder,
    tx_id: &str,
    agent_id: &str,
    kind: TxKind,
    device_id: Option<&str>,
    action: &str,
    params: &Params,
    confidence: f64,
    timestamp_ms: i64,
) {
    let mut p = CanonicalEncoder::new();
    p.u64(params.len() as u64);
    for (k, v) in params {
        p.str(k).nested(v.encode());
    }
    e.str(tx_id)
        .str(agent_id)
        .str(kind.as_str())
        .opt_str(device_id)
        .str(action)
        .nested(p)
        .real(confidence)
        .i64(timestamp_ms);
}

fn payload_digest(d: &TxDraft) -> Digest {
    let mut e = CanonicalEncoder::new();
    encode_payload(
        &mut e,
        &d.tx_id,
        &d.agent_id,
        d.kind,
        d.device_id.as_deref(),
        &d.action,
        &d.params,
        d.confidence,
        d.timestamp_ms,
    );
    sha256_digest(e.as_slice())
}

impl Transaction {
    /// SHA-256 over the canonical encoding of every field except the hash and signature.
    pub fn compute_payload_hash(&self) -> Digest {
        let mut e = CanonicalEncoder::new();
        encode_payload(
            &mut e,
            &self.tx_id,
            &self.agent_id,
            self.kind,
            self.device_id.as_deref(),
            &self.action,
            &self.params,
            self.confidence,
            self.timestamp_ms,
        );
        sha256_digest(e.as_slice())
    }

    /// Full canonical encoding, including hash and signature. Used as the Merkle leaf.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut e = CanonicalEncoder::new();
        encode_payload(
            &mut e,
            &self.tx_id,
            &self.agent_id,
            self.kind,
            self.device_id.as_deref(),
            &self.action,
            &self.params,
            self.confidence,
            self.timestamp_ms,
        );
        e.bytes(&self.payload_hash.0).bytes(&self.signature.0);
        e.finish()
    }

    pub fn verify_signature(&self, pk: &PublicKey) -> bool {
        verify_digest(pk, &self.payload_hash, &self.signature)
    }
}

pub fn sign_transaction(mut tx: Transaction, sk: &SecretKey) -> Transaction {
    tx.signature = sign_digest(sk, &tx.payload_hash);
    tx
}
