//! The hash-linked block sequence, its validity check and its line-per-block export.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::block::{meets_difficulty, mine_block, tx_merkle_root, Block, Mined};
use super::crypto::Digest;
use super::difficulty::{mean_recent_volume, AdaptiveDifficulty, DifficultyParams};
use super::registry::AgentRegistry;
use super::transaction::Transaction;
use super::validation::{validate_transaction, TxVerdict};
use super::LedgerError;
use crate::clock::Clock;

/// Mean transaction count of the most recent `window` non-genesis blocks.
pub fn average_volume(blocks: &[Block], window: usize) -> f64 {
    let counts: Vec<usize> = blocks.iter().filter(|b| b.index > 0).map(|b| b.txs.len()).collect();
    mean_recent_volume(&counts, window)
}

#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<Block>,
    controller: AdaptiveDifficulty,
}

impl Chain {
    pub fn new(params: DifficultyParams) -> Self {
        let genesis = Block::genesis(params.initial());
        Self {
            blocks: vec![genesis],
            controller: AdaptiveDifficulty::new(params),
        }
    }

    /// Rebuilds a chain from existing blocks, replaying the difficulty controller.
    pub fn from_blocks(blocks: Vec<Block>, params: DifficultyParams) -> Result<Self, LedgerError> {
        if blocks.first().is_none_or(|g| g.index != 0) {
            return Err(LedgerError::MissingGenesis);
        }
        let mut controller = AdaptiveDifficulty::new(params);
        for b in &blocks[1..] {
            controller.record_block(b.txs.len());
        }
        Ok(Self { blocks, controller })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always holds genesis")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn params(&self) -> &DifficultyParams {
        self.controller.params()
    }

    pub fn current_difficulty(&self) -> u32 {
        self.controller.current()
    }

    pub fn average_volume(&self) -> f64 {
        self.controller.average_volume()
    }

    /// Mines `txs` at the current difficulty and appends the block.
    pub fn append(&mut self, txs: Vec<Transaction>, clock: &dyn Clock) -> Mined {
        let mined = mine_block(txs, self.tip(), self.controller.current(), clock);
        self.controller.record_block(mined.block.txs.len());
        self.blocks.push(mined.block.clone());
        mined
    }

    pub fn export_lines(&self) -> String {
        export_blocks(&self.blocks)
    }
}

pub fn export_blocks(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&serde_json::to_string(b).expect("block serializes"));
        out.push('\n');
    }
    out
}

pub fn import_blocks(text: &str) -> Result<Vec<Block>, LedgerError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LedgerError::Import {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum ChainFault {
    BadGenesis,
    BadIndex { expected: u64, found: u64 },
    BrokenLink,
    HashMismatch,
    InsufficientWork { difficulty: u32 },
    MerkleMismatch,
    BadTransaction { tx_id: String, reason: String },
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainFault::BadGenesis => f.write_str("malformed genesis block"),
            ChainFault::BadIndex { expected, found } => write!(f, "index {found}, expected {expected}"),
            ChainFault::BrokenLink => f.write_str("prev_hash does not match previous block"),
            ChainFault::HashMismatch => f.write_str("block_hash does not match header"),
            ChainFault::InsufficientWork { difficulty } => {
                write!(f, "hash lacks {difficulty} leading zero hex digits")
            }
            ChainFault::MerkleMismatch => f.write_str("tx_merkle_root does not match transactions"),
            ChainFault::BadTransaction { tx_id, reason } => write!(f, "transaction {tx_id}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainVerdict {
    pub valid: bool,
    pub blocks_checked: usize,
    pub first_invalid: Option<u64>,
    pub fault: Option<ChainFault>,
}

fn check_block(b: &Block, prev: Option<&Block>, registry: &AgentRegistry) -> Result<(), ChainFault> {
    let Some(prev) = prev else {
        let ok = b.index == 0 && b.prev_hash == Digest::ZERO && b.txs.is_empty() && b.block_hash == b.compute_hash();
        return if ok { Ok(()) } else { Err(ChainFault::BadGenesis) };
    };
    if b.index != prev.index + 1 {
        return Err(ChainFault::BadIndex {
            expected: prev.index + 1,
            found: b.index,
        });
    }
    if b.prev_hash != prev.block_hash {
        return Err(ChainFault::BrokenLink);
    }
    if tx_merkle_root(&b.txs) != b.tx_merkle_root {
        return Err(ChainFault::MerkleMismatch);
    }
    if b.compute_hash() != b.block_hash {
        return Err(ChainFault::HashMismatch);
    }
    if b.difficulty == 0 || !meets_difficulty(&b.block_hash, b.difficulty) {
        return Err(ChainFault::InsufficientWork {
            difficulty: b.difficulty,
        });
    }
    for tx in &b.txs {
        if let TxVerdict::Rejected { gate, reason } = validate_transaction(tx, registry, &[]) {
            return Err(ChainFault::BadTransaction {
                tx_id: tx.tx_id.clone(),
                reason: format!("{gate} gate: {reason}"),
            });
        }
    }
    Ok(())
}

/// Recomputes hashes, work, links, Merkle roots and signatures; reports the first violation.
pub fn validate_chain(blocks: &[Block], registry: &AgentRegistry) -> ChainVerdict {
    for (i, b) in blocks.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &blocks[p]);
        if let Err(fault) = check_block(b, prev, registry) {
            return ChainVerdict {
                valid: false,
                blocks_checked: i + 1,
                first_invalid: Some(i as u64),
                fault: Some(fault),
            };
        }
    }
    ChainVerdict {
        valid: !blocks.is_empty(),
        blocks_checked: blocks.len(),
        first_invalid: None,
        fault: blocks.is_empty().then_some(ChainFault::BadGenesis),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FixedClock;
    use crate::ledger::crypto::keypair_from_seed;
    use crate::ledger::registry::{AgentRegistryEntry, DeviceScope};
    use crate::ledger::transaction::{Params, Scalar, TxDraft, TxKind};

    fn fixture(blocks: usize) -> (Chain, AgentRegistry) {
        let (sk, pk) = keypair_from_seed(&[5u8; 32]).unwrap();
        let mut reg = AgentRegistry::new();
        reg.register(AgentRegistryEntry {
            agent_id: "energy-agent-001".into(),
            public_key: pk,
            priority: 0.6,
            device_scope: DeviceScope::wildcard(),
        })
        .unwrap();
        let mut chain = Chain::new(DifficultyParams::fixed(1));
        for i in 0..blocks {
            let txs = (0..2)
                .map(|j| {
                    let mut params = Params::new();
                    params.insert("limit_w".into(), Scalar::Int(1000 + j));
                    TxDraft {
                        tx_id: format!("tx-{i}-{j}"),
                        agent_id: "energy-agent-001".into(),
                        kind: TxKind::Decision,
                        device_id: Some("outlet-kitchen".into()),
                        action: "curtail".into(),
                        params,
                        confidence: 0.7,
                        timestamp_ms: i as i64,
                    }
                    .seal_and_sign(&sk)
                })
                .collect();
            chain.append(txs, &FixedClock(i as i64 * 1000));
        }
        (chain, reg)
    }

    #[test]
    fn fresh_chain_is_valid() {
        let (chain, reg) = fixture(20);
        let v = validate_chain(chain.blocks(), &reg);
        assert!(v.valid, "{v:?}");
        assert_eq!(v.blocks_checked, 21);
    }

    #[test]
    fn param_mutation_detected_at_its_block() {
        let (chain, reg) = fixture(20);
        let mut blocks = chain.blocks().to_vec();
        blocks[7].txs[0].params.insert("limit_w".into(), Scalar::Int(9999));
        let v = validate_chain(&blocks, &reg);
        assert_eq!(v.first_invalid, Some(7));
    }

    #[test]
    fn remined_replacement_breaks_next_link() {
        let (chain, reg) = fixture(20);
        let mut blocks = chain.blocks().to_vec();
        let replacement = mine_block(vec![], &blocks[2], 1, &FixedClock(777)).block;
        blocks[3] = replacement;
        let v = validate_chain(&blocks, &reg);
        assert_eq!(v.first_invalid, Some(4));
        assert_eq!(v.fault, Some(ChainFault::BrokenLink));
    }

    #[test]
    fn average_volume_ignores_genesis() {
        let (chain, _) = fixture(0);
        assert_eq!(average_volume(chain.blocks(), 3), 0.0);
        let (chain, _) = fixture(1);
        assert_eq!(average_volume(chain.blocks(), 3), 2.0);
    }

    #[test]
    fn genesis_only_keeps_base_difficulty() {
        let chain = Chain::new(DifficultyParams::balanced());
        assert_eq!(chain.current_difficulty(), 2);
    }

    #[test]
    fn export_import_round_trip() {
        let (chain, reg) = fixture(5);
        let text = chain.export_lines();
        assert_eq!(text.lines().count(), 6);
        let back = import_blocks(&text).unwrap();
        assert_eq!(back, chain.blocks());
        assert!(validate_chain(&back, &reg).valid);
        let rebuilt = Chain::from_blocks(back, DifficultyParams::fixed(1)).unwrap();
        assert_eq!(rebuilt.len(), 6);
    }

    #[test]
    fn import_reports_bad_line() {
        let err = import_blocks("{}\n").unwrap_err();
        assert!(matches!(err, LedgerError::Import { line: 1, .. }));
    }
}
