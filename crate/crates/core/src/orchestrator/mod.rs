//! The cycle loop: collect, reason, resolve, mine, record. Also the off-chain
//! store, anchoring, and session reports.

pub mod anchor;
mod session;
pub mod store;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anchor::{verify_anchors, AnchorReceipt, AnchorVerdict, TableRange};
pub use session::{run_session, AgentBackend, DecisionRecord, DecisionStatus, Session, SYSTEM_IDENTITIES};
pub use store::{OffChainStore, Record, Table};

use crate::agents::router::Preset;
use crate::arbitration::{ConflictRecord, ResolutionLevel};
use crate::governance::GovernanceError;
use crate::ledger::{
    import_blocks, validate_chain, AgentRegistry, AgentRegistryEntry, BlockKind, ChainVerdict, DifficultyParams,
    LedgerError,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error("no unanchored records")]
    NothingToAnchor,
    #[error("session already finished")]
    Finished,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sim,
    Real,
    Hybrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sim => "sim",
            Mode::Real => "real",
            Mode::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(Mode::Sim),
            "real" => Ok(Mode::Real),
            "hybrid" => Ok(Mode::Hybrid),
            _ => Err(format!("unknown mode {s:?} (sim, real, hybrid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickMode {
    Realtime,
    /// Intervals collapse; timestamps come from a manual clock.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    pub telemetry_interval_ms: u64,
    pub agent_interval_ms: u64,
    pub tick_mode: TickMode,
    pub cycles: u64,
    pub mode: Mode,
    pub preset: Preset,
    pub seed: u64,
    pub anchor_every: u64,
    pub difficulty: DifficultyParams,
    /// Clock origin in fast mode.
    pub start_ms: i64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            telemetry_interval_ms: 10_000,
            agent_interval_ms: 20_000,
            tick_mode: TickMode::Fast,
            cycles: 30,
            mode: Mode::Sim,
            preset: Preset::Balanced,
            seed: 42,
            anchor_every: 5,
            difficulty: DifficultyParams::balanced(),
            start_ms: 1_700_000_000_000,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.telemetry_interval_ms == 0 || self.agent_interval_ms % self.telemetry_interval_ms != 0 {
            return Err(OrchestratorError::Config(format!(
                "agent interval {} ms is not a multiple of telemetry interval {} ms",
                self.agent_interval_ms, self.telemetry_interval_ms
            )));
        }
        if self.agent_interval_ms == 0 {
            return Err(OrchestratorError::Config("agent interval must be positive".into()));
        }
        if self.anchor_every == 0 {
            return Err(OrchestratorError::Config("anchor cadence must be positive".into()));
        }
        Ok(())
    }

    pub fn ticks_per_cycle(&self) -> u64 {
        self.agent_interval_ms / self.telemetry_interval_ms
    }
}

/// Ordered steps of one cycle, recorded for ordering checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Telemetry { tick: u64 },
    DeviceGuard { events: usize, actuations: usize },
    AgentsEvaluated { proposals: usize },
    Arbitrated { conflicts: usize },
    Mined { block: u64, kind: BlockKind },
    Recorded,
    Anchored { block: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: u64,
    pub emergencies: usize,
    pub proposals: usize,
    pub committed: Vec<DecisionRecord>,
    pub rejected: usize,
    pub conflicts: Vec<ConflictRecord>,
    pub blocks: Vec<(u64, BlockKind)>,
    pub difficulty: u32,
    pub backend_unavailable: Vec<String>,
    pub trace: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionReport {
    pub seed: u64,
    pub mode: Option<Mode>,
    pub cycles_run: u64,
    pub proposed: usize,
    pub winning: usize,
    pub committed: usize,
    pub rejected: usize,
    /// committed / winning; 1.0 when nothing won.
    pub acceptance_rate: f64,
    pub proposed_by_agent: BTreeMap<String, usize>,
    pub committed_by_agent: BTreeMap<String, usize>,
    pub conflicts_by_level: BTreeMap<ResolutionLevel, usize>,
    pub blocks_by_kind: BTreeMap<BlockKind, usize>,
    pub difficulty_trace: Vec<u32>,
    pub emergencies: usize,
    pub anchors: Vec<AnchorReceipt>,
    pub chain_valid: bool,
    pub error: Option<String>,
}

impl SessionReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = self.mode.map(Mode::as_str).unwrap_or("-");
        let _ = writeln!(s, "session seed={} mode={mode} cycles={}", self.seed, self.cycles_run);
        let _ = writeln!(
            s,
            "decisions proposed={} winning={} committed={} rejected={} acceptance={:.4}",
            self.proposed, self.winning, self.committed, self.rejected, self.acceptance_rate
        );
        let _ = writeln!(s, "emergency events={}", self.emergencies);
        let _ = writeln!(s, "decisions by agent (proposed/committed):");
        for (agent, n) in &self.proposed_by_agent {
            let c = self.committed_by_agent.get(agent).copied().unwrap_or(0);
            let _ = writeln!(s, "  {agent:<22} {n:>4} {c:>4}");
        }
        let levels: Vec<String> = self
            .conflicts_by_level
            .iter()
            .map(|(l, n)| format!("{l}={n}"))
            .collect();
        let _ = writeln!(
            s,
            "conflicts by level: {}",
            if levels.is_empty() {
                "none".into()
            } else {
                levels.join(" ")
            }
        );
        let kinds: Vec<String> = self
            .blocks_by_kind
            .iter()
            .map(|(k, n)| format!("{}={n}", k.as_str()))
            .collect();
        let _ = writeln!(s, "blocks by kind: {}", kinds.join(" "));
        let trace: Vec<String> = self.difficulty_trace.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "difficulty trace: {}", trace.join(" "));
        let _ = writeln!(s, "anchors: {}", self.anchors.len());
        let _ = writeln!(s, "chain valid: {}", self.chain_valid);
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreVerdict {
    pub chain: ChainVerdict,
    pub anchors: Vec<AnchorVerdict>,
}

impl StoreVerdict {
    pub fn ok(&self) -> bool {
        self.chain.valid && self.anchors.iter().all(|a| a.valid)
    }
}

pub const CHAIN_FILE: &str = "chain.ndjson";
pub const GOVERNANCE_FILE: &str = "governance.txt";
pub const REPORT_FILE: &str = "report.txt";

/// Checks a saved session directory: chain validity against the registry in
/// the agents table, then every anchor receipt against the table files.
pub fn verify_store_dir(dir: &Path) -> Result<StoreVerdict, OrchestratorError> {
    let store = OffChainStore::load(dir)?;
    let blocks = import_blocks(&std::fs::read_to_string(dir.join(CHAIN_FILE))?)?;
    let mut registry = AgentRegistry::new();
    for entry in store.decode::<AgentRegistryEntry>(Table::Agents) {
        registry.register(entry)?;
    }
    Ok(StoreVerdict {
        chain: validate_chain(&blocks, &registry),
        anchors: verify_anchors(&store, &blocks),
    })
}
