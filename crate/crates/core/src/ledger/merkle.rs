//! Binary SHA-256 Merkle trees with duplicate-last padding on odd levels.

use serde::{Deserialize, Serialize};

use super::crypto::{sha256_digest, Digest};
use super::LedgerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One step of an inclusion proof: the sibling digest and which side it sits on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub sibling: Digest,
    pub side: Side,
}

fn hash_pair(left: &Digest, right: &Digest) -> Digest {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(&left.0);
    buf[32..].copy_from_slice(&right.0);
    sha256_digest(&buf)
}

fn next_level(level: &[Digest]) -> Vec<Digest> {
    level
        .chunks(2)
        .map(|pair| match pair {
            [l, r] => hash_pair(l, r),
            [l] => hash_pair(l, l),
            _ => unreachable!(),
        })
        .collect()
}

/// Root over already-hashed leaves.
pub fn merkle_root_of_digests(leaf_hashes: &[Digest]) -> Digest {
    if leaf_hashes.is_empty() {
        return sha256_digest(b"");
    }
    let mut level = leaf_hashes.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    level[0]
}

pub fn merkle_root<L: AsRef<[u8]>>(leaves: &[L]) -> Digest {
    let hashed: Vec<Digest> = leaves.iter().map(|l| sha256_digest(l.as_ref())).collect();
    merkle_root_of_digests(&hashed)
}

pub fn merkle_proof<L: AsRef<[u8]>>(leaves: &[L], index: usize) -> Result<Vec<ProofStep>, LedgerError> {
    if index >= leaves.len() {
        return Err(LedgerError::ProofIndex {
            index,
            len: leaves.len(),
        });
    }
    let mut level: Vec<Digest> = leaves.iter().map(|l| sha256_digest(l.as_ref())).collect();
    let mut idx = index;
    let mut proof = Vec::new();
    while level.len() > 1 {
        let (sibling, side) = if idx % 2 == 0 {
            (*level.get(idx + 1).unwrap_or(&level[idx]), Side::Right)
        } else {
            (level[idx - 1], Side::Left)
        };
        proof.push(ProofStep { sibling, side });
        level = next_level(&level);
        idx /= 2;
    }
    Ok(proof)
}

pub fn verify_proof(leaf: &[u8], proof: &[ProofStep], root: &Digest) -> bool {
    let acc = proof.iter().fold(sha256_digest(leaf), |acc, step| match step.side {
        Side::Right => hash_pair(&acc, &step.sibling),
        Side::Left => hash_pair(&step.sibling, &acc),
    });
    acc == *root
}
