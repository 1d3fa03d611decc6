//! The five event streams. Four are views over store tables, one over the
//! chain; the sequence number is the position in that source.

use std::fmt;
use std::str::FromStr;

use hearth::ledger::Block;
use hearth::orchestrator::{Session, Table};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamName {
    Telemetry,
    Decisions,
    Blocks,
    Conflicts,
    Governance,
}

impl StreamName {
    pub const ALL: [StreamName; 5] = [
        StreamName::Telemetry,
        StreamName::Decisions,
        StreamName::Blocks,
        StreamName::Conflicts,
        StreamName::Governance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StreamName::Telemetry => "telemetry",
            StreamName::Decisions => "decisions",
            StreamName::Blocks => "blocks",
            StreamName::Conflicts => "conflicts",
            StreamName::Governance => "governance",
        }
    }

    /// Backing store table; `None` for the chain-fed stream.
    pub fn table(self) -> Option<Table> {
        match self {
            StreamName::Telemetry => Some(Table::Telemetry),
            StreamName::Decisions => Some(Table::Decisions),
            StreamName::Conflicts => Some(Table::Conflicts),
            StreamName::Governance => Some(Table::GovernanceAudit),
            StreamName::Blocks => None,
        }
    }
}

impl fmt::Display for StreamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StreamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StreamName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown stream {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub stream: StreamName,
    pub sequence: u64,
    pub payload: Value,
    pub timestamp_ms: i64,
}

impl StreamEvent {
    /// One NDJSON line, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("stream events serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSummary {
    pub index: u64,
    pub kind: &'static str,
    pub tx_count: usize,
    pub difficulty: u32,
    pub nonce: u64,
    pub block_hash: String,
    pub prev_hash: String,
    pub timestamp_ms: i64,
    pub tx_ids: Vec<String>,
}

impl From<&Block> for BlockSummary {
    fn from(b: &Block) -> Self {
        Self {
            index: b.index,
            kind: b.kind().as_str(),
            tx_count: b.txs.len(),
            difficulty: b.difficulty,
            nonce: b.nonce,
            block_hash: b.block_hash.to_hex(),
            prev_hash: b.prev_hash.to_hex(),
            timestamp_ms: b.timestamp_ms,
            tx_ids: b.txs.iter().map(|t| t.tx_id.clone()).collect(),
        }
    }
}

/// Events of `name` with sequence ≥ `from`.
pub fn events(session: &Session, name: StreamName, from: u64) -> Vec<StreamEvent> {
    match name.table() {
        Some(table) => session
            .store()
            .records(table, from as usize)
            .into_iter()
            .enumerate()
            .map(|(i, r)| StreamEvent {
                stream: name,
                sequence: from + i as u64,
                timestamp_ms: r.body.get("timestamp_ms").and_then(Value::as_i64).unwrap_or(0),
                payload: r.body,
            })
            .collect(),
        None => session
            .blocks()
            .iter()
            .skip(from as usize)
            .map(|b| StreamEvent {
                stream: name,
                sequence: b.index,
                timestamp_ms: b.timestamp_ms,
                payload: serde_json::to_value(BlockSummary::from(b)).expect("block summary serializes"),
            })
            .collect(),
    }
}

/// Number of events currently available on `name`.
pub fn len(session: &Session, name: StreamName) -> u64 {
    match name.table() {
        Some(t) => session.store().len(t) as u64,
        None => session.blocks().len() as u64,
    }
}
