//! Blocks and the leading-zero proof-of-work search.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::codec::CanonicalEncoder;
use super::crypto::Digest;
use super::merkle::merkle_root;
use super::transaction::{Transaction, TxKind};
use crate::clock::Clock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub timestamp_ms: i64,
    pub prev_hash: Digest,
    pub txs: Vec<Transaction>,
    pub tx_merkle_root: Digest,
    pub difficulty: u32,
    pub nonce: u64,
    pub block_hash: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Genesis,
    Decision,
    Emergency,
    Anchor,
}

impl BlockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Genesis => "genesis",
            BlockKind::Decision => "decision",
            BlockKind::Emergency => "emergency",
            BlockKind::Anchor => "anchor",
        }
    }
}

fn header_prefix(index: u64, timestamp_ms: i64, prev_hash: &Digest, root: &Digest, difficulty: u32) -> Vec<u8> {
    let mut e = CanonicalEncoder::new();
    e.u64(index)
        .i64(timestamp_ms)
        .bytes(&prev_hash.0)
        .bytes(&root.0)
        .u64(difficulty as u64);
    e.finish()
}

fn nonce_field(nonce: u64) -> [u8; 12] {
    let mut out = [0u8; 12];
    out[..4].copy_from_slice(&8u32.to_be_bytes());
    out[4..].copy_from_slice(&nonce.to_be_bytes());
    out
}

pub fn tx_merkle_root(txs: &[Transaction]) -> Digest {
    let leaves: Vec<Vec<u8>> = txs.iter().map(Transaction::canonical_bytes).collect();
    merkle_root(&leaves)
}

/// `true` when the hex rendering of `hash` starts with at least `difficulty` zeros.
pub fn meets_difficulty(hash: &Digest, difficulty: u32) -> bool {
    hash.leading_zero_nibbles() >= difficulty
}

impl Block {
    pub fn genesis(difficulty: u32) -> Self {
        let root = tx_merkle_root(&[]);
        let mut b = Block {
            index: 0,
            timestamp_ms: 0,
            prev_hash: Digest::ZERO,
            txs: Vec::new(),
            tx_merkle_root: root,
            difficulty,
            nonce: 0,
            block_hash: Digest::ZERO,
        };
        b.block_hash = b.compute_hash();
        b
    }

    pub fn compute_hash(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(header_prefix(
            self.index,
            self.timestamp_ms,
            &self.prev_hash,
            &self.tx_merkle_root,
            self.difficulty,
        ));
        h.update(nonce_field(self.nonce));
        Digest(h.finalize().into())
    }

    pub fn kind(&self) -> BlockKind {
        if self.index == 0 {
            return BlockKind::Genesis;
        }
        match self.txs.as_slice() {
            [only] if only.kind == TxKind::Anchor => BlockKind::Anchor,
            txs if !txs.is_empty() && txs.iter().all(|t| t.kind == TxKind::Emergency) => BlockKind::Emergency,
            _ => BlockKind::Decision,
        }
    }
}

/// Result of a nonce search.
#[derive(Debug, Clone)]
pub struct Mined {
    pub block: Block,
    /// Nonces hashed, including the winning one.
    pub nonce_count: u64,
}

/// Assembles a block on top of `prev` and searches nonces upward from zero.
/// The timestamp is read once, before the search starts.
pub fn mine_block(pending: Vec<Transaction>, prev: &Block, difficulty: u32, clock: &dyn Clock) -> Mined {
    let index = prev.index + 1;
    let timestamp_ms = clock.now_ms();
    let root = tx_merkle_root(&pending);
    let mut prefix = Sha256::new();
    prefix.update(header_prefix(index, timestamp_ms, &prev.block_hash, &root, difficulty));

    let mut nonce = 0u64;
    let hash = loop {
        let mut h = prefix.clone();
        h.update(nonce_field(nonce));
        let d = Digest(h.finalize().into());
        if meets_difficulty(&d, difficulty) {
            break d;
        }
        nonce += 1;
    };
    Mined {
        block: Block {
            index,
            timestamp_ms,
            prev_hash: prev.block_hash,
            txs: pending,
            tx_merkle_root: root,
            difficulty,
            nonce,
            block_hash: hash,
        },
        nonce_count: nonce + 1,
    }
}
