//! Hashing, signing, Merkle trees, the adaptive proof-of-work chain, the
//! four-gate transaction pipeline and the agent registry.

mod block;
mod chain;
pub mod codec;
mod crypto;
mod difficulty;
mod merkle;
mod registry;
mod transaction;
mod validation;

use thiserror::Error;

pub use block::{meets_difficulty, mine_block, tx_merkle_root, Block, BlockKind, Mined};
pub use chain::{average_volume, export_blocks, import_blocks, validate_chain, Chain, ChainFault, ChainVerdict};
pub use crypto::{
    keypair_from_seed, seed_from_label, sha256_digest, sign_digest, verify_digest, Digest, PublicKey, SecretKey,
    Signature,
};
pub use difficulty::{mean_recent_volume, next_difficulty, AdaptiveDifficulty, DifficultyParams};
pub use merkle::{merkle_proof, merkle_root, merkle_root_of_digests, verify_proof, ProofStep, Side};
pub use registry::{AgentRegistry, AgentRegistryEntry, DeviceScope};
pub use transaction::{sign_transaction, Params, Scalar, Transaction, TxDraft, TxKind};
pub use validation::{validate_transaction, Gate, TxVerdict};

use crate::clock::Clock;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("seed must be 32 bytes, got {0}")]
    SeedLength(usize),
    #[error("invalid hex digest {0:?}")]
    BadHex(String),
    #[error("agent {0} is already registered")]
    DuplicateAgent(String),
    #[error("agent {agent_id} priority {priority} outside (0, 1]")]
    BadPriority { agent_id: String, priority: f64 },
    #[error("proof index {index} out of range for {len} leaves")]
    ProofIndex { index: usize, len: usize },
    #[error("invalid difficulty parameters: {0}")]
    BadDifficultyParams(String),
    #[error("chain has no genesis block")]
    MissingGenesis,
    #[error("chain import failed at line {line}: {reason}")]
    Import { line: usize, reason: String },
    #[error("transaction {tx_id} rejected at {gate} gate: {reason}")]
    Rejected { tx_id: String, gate: Gate, reason: String },
}

/// Chain plus registry: the single writer that admits transactions and mines them.
#[derive(Debug, Clone)]
pub struct Ledger {
    pub registry: AgentRegistry,
    chain: Chain,
}

impl Ledger {
    pub fn new(params: DifficultyParams) -> Self {
        Self {
            registry: AgentRegistry::new(),
            chain: Chain::new(params),
        }
    }

    pub fn from_parts(registry: AgentRegistry, chain: Chain) -> Self {
        Self { registry, chain }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn register_agent(&mut self, entry: AgentRegistryEntry) -> Result<(), LedgerError> {
        self.registry.register(entry)
    }

    pub fn validate(&self, tx: &Transaction, pending: &[Transaction]) -> TxVerdict {
        validate_transaction(tx, &self.registry, pending)
    }

    /// Runs every transaction through the gates and mines them as one block.
    /// Nothing is appended if any transaction is rejected.
    pub fn commit(&mut self, txs: Vec<Transaction>, clock: &dyn Clock) -> Result<Mined, LedgerError> {
        for (i, tx) in txs.iter().enumerate() {
            if let TxVerdict::Rejected { gate, reason } = validate_transaction(tx, &self.registry, &txs[..i]) {
                return Err(LedgerError::Rejected {
                    tx_id: tx.tx_id.clone(),
                    gate,
                    reason,
                });
            }
        }
        Ok(self.chain.append(txs, clock))
    }

    pub fn validate_chain(&self) -> ChainVerdict {
        validate_chain(self.chain.blocks(), &self.registry)
    }
}
