//! The append-only off-chain store: thirteen tables, one line per record.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ledger::{sha256_digest, Digest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Devices,
    Telemetry,
    Decisions,
    Conflicts,
    GovernanceParams,
    GovernanceAudit,
    ModelUsage,
    Agents,
    BlocksIndex,
    TransactionsIndex,
    Anchors,
    Emergencies,
    Sessions,
}

impl Table {
    pub const ALL: [Table; 13] = [
        Table::Devices,
        Table::Telemetry,
        Table::Decisions,
        Table::Conflicts,
        Table::GovernanceParams,
        Table::GovernanceAudit,
        Table::ModelUsage,
        Table::Agents,
        Table::BlocksIndex,
        Table::TransactionsIndex,
        Table::Anchors,
        Table::Emergencies,
        Table::Sessions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Table::Devices => "devices",
            Table::Telemetry => "telemetry",
            Table::Decisions => "decisions",
            Table::Conflicts => "conflicts",
            Table::GovernanceParams => "governance_params",
            Table::GovernanceAudit => "governance_audit",
            Table::ModelUsage => "model_usage",
            Table::Agents => "agents",
            Table::BlocksIndex => "blocks_index",
            Table::TransactionsIndex => "transactions_index",
            Table::Anchors => "anchors",
            Table::Emergencies => "emergencies",
            Table::Sessions => "sessions",
        }
    }

    /// Tables whose records are committed to by anchors. The anchors table
    /// holds the receipts themselves.
    pub fn anchored(self) -> bool {
        self != Table::Anchors
    }

    pub fn file_name(self) -> String {
        format!("{}.tsv", self.as_str())
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Table {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Table::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown table {s:?}"))
    }
}

/// Encoded line: `{record_id}\t{json}`. Kept as raw bytes so a tampered file
/// loads exactly as it sits on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredLine(pub Vec<u8>);

impl StoredLine {
    pub fn content_hash(&self) -> Digest {
        sha256_digest(&self.0)
    }

    pub fn record_id(&self) -> Option<u64> {
        let end = self.0.iter().position(|b| *b == b'\t')?;
        std::str::from_utf8(&self.0[..end]).ok()?.parse().ok()
    }

    pub fn json(&self) -> Option<&str> {
        let start = self.0.iter().position(|b| *b == b'\t')? + 1;
        std::str::from_utf8(&self.0[start..]).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: u64,
    pub table: Table,
    pub content_hash: Digest,
    pub body: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OffChainStore {
    tables: BTreeMap<Table, Vec<StoredLine>>,
    next_id: u64,
}

fn header(t: Table) -> String {
    format!("# {t}: record_id<TAB>json, one record per line\n")
}

impl OffChainStore {
    pub fn new() -> Self {
        Self {
            tables: Table::ALL.iter().map(|t| (*t, Vec::new())).collect(),
            next_id: 1,
        }
    }

    /// Appends one record and returns its id. Ids increase across all tables.
    pub fn append<T: Serialize>(&mut self, table: Table, body: &T) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let json = serde_json::to_string(body).expect("store records serialize");
        let line = StoredLine(format!("{id}\t{json}").into_bytes());
        self.tables.entry(table).or_default().push(line);
        id
    }

    pub fn lines(&self, table: Table) -> &[StoredLine] {
        self.tables.get(&table).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self, table: Table) -> usize {
        self.lines(table).len()
    }

    pub fn total_records(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }

    pub fn last_record_id(&self) -> u64 {
        self.next_id - 1
    }

    /// Records of `table` from position `from`, decoded. Lines that no longer
    /// parse are skipped.
    pub fn records(&self, table: Table, from: usize) -> Vec<Record> {
        self.lines(table)
            .iter()
            .skip(from)
            .filter_map(|l| {
                Some(Record {
                    record_id: l.record_id()?,
                    table,
                    content_hash: l.content_hash(),
                    body: serde_json::from_str(l.json()?).ok()?,
                })
            })
            .collect()
    }

    pub fn decode<T: DeserializeOwned>(&self, table: Table) -> Vec<T> {
        self.lines(table)
            .iter()
            .filter_map(|l| serde_json::from_str(l.json()?).ok())
            .collect()
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for t in Table::ALL {
            let mut out = header(t).into_bytes();
            for l in self.lines(t) {
                out.extend_from_slice(&l.0);
                out.push(b'\n');
            }
            fs::write(dir.join(t.file_name()), out)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> io::Result<Self> {
        let mut store = OffChainStore::new();
        for t in Table::ALL {
            let bytes = fs::read(dir.join(t.file_name()))?;
            let mut parts: Vec<&[u8]> = bytes.split(|b| *b == b'\n').collect();
            if parts.last().is_some_and(|p| p.is_empty()) {
                parts.pop();
            }
            if parts.first().is_some_and(|p| p.starts_with(b"# ")) {
                parts.remove(0);
            }
            let lines: Vec<StoredLine> = parts.into_iter().map(|p| StoredLine(p.to_vec())).collect();
            let max_id = lines.iter().filter_map(StoredLine::record_id).max().unwrap_or(0);
            store.next_id = store.next_id.max(max_id + 1);
            store.tables.insert(t, lines);
        }
        Ok(store)
    }

    /// Direct access for tamper experiments.
    pub fn lines_mut(&mut self, table: Table) -> &mut Vec<StoredLine> {
        self.tables.entry(table).or_default()
    }
}
