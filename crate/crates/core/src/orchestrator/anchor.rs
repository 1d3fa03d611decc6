//! Merkle anchoring of off-chain records into single-transaction blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::store::{OffChainStore, Table};
use crate::ledger::{merkle_root_of_digests, Block, BlockKind, Digest, Params, Scalar, TxKind};

/// Line positions `[start, end)` of one table covered by a receipt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRange {
    pub start: usize,
    pub end: usize,
    pub first_record_id: u64,
    pub last_record_id: u64,
    pub root: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorReceipt {
    pub seq: u64,
    pub merkle_root: Digest,
    pub ranges: BTreeMap<Table, TableRange>,
    pub anchor_tx_id: String,
    pub block_index: u64,
}

impl AnchorReceipt {
    pub fn leaf_count(&self) -> usize {
        self.ranges.values().map(|r| r.end - r.start).sum()
    }
}

fn leaves(store: &OffChainStore, table: Table, start: usize, end: usize) -> Option<Vec<Digest>> {
    let lines = store.lines(table);
    (end <= lines.len()).then(|| lines[start..end].iter().map(|l| l.content_hash()).collect())
}

/// Ranges and root over every record past `watermarks`, tables in
/// declaration order. `None` when nothing is pending.
pub fn plan_anchor(
    store: &OffChainStore,
    watermarks: &BTreeMap<Table, usize>,
) -> Option<(BTreeMap<Table, TableRange>, Digest)> {
    let mut ranges = BTreeMap::new();
    let mut all = Vec::new();
    for t in Table::ALL.into_iter().filter(|t| t.anchored()) {
        let start = watermarks.get(&t).copied().unwrap_or(0);
        let end = store.len(t);
        if end <= start {
            continue;
        }
        let l = leaves(store, t, start, end).expect("range within table");
        let lines = store.lines(t);
        ranges.insert(
            t,
            TableRange {
                start,
                end,
                first_record_id: lines[start].record_id().unwrap_or(0),
                last_record_id: lines[end - 1].record_id().unwrap_or(0),
                root: merkle_root_of_digests(&l),
            },
        );
        all.extend(l);
    }
    (!all.is_empty()).then(|| (ranges, merkle_root_of_digests(&all)))
}

pub fn anchor_params(seq: u64, root: &Digest, ranges: &BTreeMap<Table, TableRange>) -> Params {
    let mut p = Params::new();
    p.insert("merkle_root".into(), Scalar::Text(root.to_hex()));
    p.insert("receipt_seq".into(), Scalar::Int(seq as i64));
    p.insert(
        "ranges".into(),
        Scalar::Text(serde_json::to_string(ranges).expect("ranges serialize")),
    );
    p
}

/// Rebuilds receipts from the anchor transactions on chain.
pub fn receipts_from_chain(blocks: &[Block]) -> Vec<AnchorReceipt> {
    blocks
        .iter()
        .filter(|b| b.kind() == BlockKind::Anchor)
        .filter_map(|b| {
            let tx = b.txs.iter().find(|t| t.kind == TxKind::Anchor)?;
            let root = Digest::from_hex(tx.params.get("merkle_root")?.as_str()?).ok()?;
            let seq = match tx.params.get("receipt_seq")? {
                Scalar::Int(i) => *i as u64,
                _ => return None,
            };
            let ranges = serde_json::from_str(tx.params.get("ranges")?.as_str()?).ok()?;
            Some(AnchorReceipt {
                seq,
                merkle_root: root,
                ranges,
                anchor_tx_id: tx.tx_id.clone(),
                block_index: b.index,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorVerdict {
    pub seq: u64,
    pub anchor_tx_id: String,
    pub block_index: u64,
    pub valid: bool,
    /// Tables whose covered lines no longer hash to the recorded root.
    pub tampered: Vec<Table>,
}

/// Recomputes every receipt from current store contents.
pub fn verify_receipts(store: &OffChainStore, receipts: &[AnchorReceipt]) -> Vec<AnchorVerdict> {
    receipts
        .iter()
        .map(|r| {
            let mut all = Vec::new();
            let mut tampered = Vec::new();
            for (t, range) in &r.ranges {
                match leaves(store, *t, range.start, range.end) {
                    Some(l) => {
                        if merkle_root_of_digests(&l) != range.root {
                            tampered.push(*t);
                        }
                        all.extend(l);
                    }
                    None => tampered.push(*t),
                }
            }
            let valid = tampered.is_empty() && merkle_root_of_digests(&all) == r.merkle_root;
            AnchorVerdict {
                seq: r.seq,
                anchor_tx_id: r.anchor_tx_id.clone(),
                block_index: r.block_index,
                valid,
                tampered,
            }
        })
        .collect()
}

pub fn verify_anchors(store: &OffChainStore, blocks: &[Block]) -> Vec<AnchorVerdict> {
    verify_receipts(store, &receipts_from_chain(blocks))
}

/// The earliest failing receipt, if any.
pub fn first_failure(verdicts: &[AnchorVerdict]) -> Option<&AnchorVerdict> {
    verdicts.iter().find(|v| !v.valid)
}
