use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::anchor::{anchor_params, plan_anchor, AnchorReceipt};
use super::store::{OffChainStore, Table};
use super::{
    CycleConfig, CycleReport, OrchestratorError, Phase, SessionReport, TickMode, CHAIN_FILE, GOVERNANCE_FILE,
    REPORT_FILE,
};
use crate::agents::anomaly::EnsembleConfig;
use crate::agents::llm::LlmTransport;
use crate::agents::nlu::{nlu_parse, NluOutcome};
use crate::agents::router::{default_catalog, route_model, CostTracker, ModelEntry, Preset};
use crate::agents::{evaluate_agent, AgentContext, AgentDecision, AgentSpec, Backend, BackendKind, Evaluation};
use crate::arbitration::{partition_pool, resolve, AgentHistory, Arbiter, ConflictRecord, LlmArbiter};
use crate::clock::{Clock, ManualClock, SystemClock};
use crate::devices::{build_sim_home, Device, FaultScenario, Gateway, SimSource, TelemetrySource, Thresholds};
use crate::governance::{names, GovValue, GovernanceContract, GovernanceSnapshot, Verdict};
use crate::ledger::{
    keypair_from_seed, seed_from_label, AgentRegistryEntry, Block, DeviceScope, Ledger, Mined, Params, Scalar,
    SecretKey, Transaction, TxDraft, TxKind, TxVerdict,
};
use crate::roles::AgentRole;
use crate::telemetry::{TelemetryHistory, TelemetrySnapshot};

pub const EMERGENCY_IDENTITY: &str = "emergency-scanner";
pub const GOVERNANCE_IDENTITY: &str = "governance-contract";
pub const ORCHESTRATOR_IDENTITY: &str = "orchestrator";
pub const SYSTEM_IDENTITIES: [&str; 3] = [EMERGENCY_IDENTITY, GOVERNANCE_IDENTITY, ORCHESTRATOR_IDENTITY];

/// Samples per (device, metric) kept for the anomaly ensemble.
const HISTORY_CAPACITY: usize = 64;

#[derive(Clone)]
pub enum AgentBackend {
    Rules(EnsembleConfig),
    /// Rule-kind and LLM-kind roles go to the transport; the anomaly role
    /// stays on its local ensemble.
    Llm {
        transport: Arc<dyn LlmTransport>,
        catalog: Vec<ModelEntry>,
        anomaly: EnsembleConfig,
    },
}

impl Default for AgentBackend {
    fn default() -> Self {
        AgentBackend::Rules(EnsembleConfig::default())
    }
}

impl AgentBackend {
    pub fn llm(transport: Arc<dyn LlmTransport>) -> Self {
        AgentBackend::Llm {
            transport,
            catalog: default_catalog(),
            anomaly: EnsembleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionStatus {
    Committed,
    /// Lost arbitration.
    Lost,
    /// Won but failed the capability check or a ledger gate.
    Rejected,
    /// Exact duplicate of an earlier proposal.
    Merged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    #[serde(flatten)]
    pub decision: AgentDecision,
    pub status: DecisionStatus,
    pub tx_id: Option<String>,
    pub conflict_id: Option<String>,
    pub block_index: Option<u64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct BlockIndexRecord<'a> {
    index: u64,
    kind: &'a str,
    block_hash: String,
    difficulty: u32,
    tx_count: usize,
    nonce_count: u64,
    cycle: u64,
    timestamp_ms: i64,
}

#[derive(Debug, Clone, Serialize)]
struct TelemetryRecord<'a> {
    #[serde(flatten)]
    snapshot: &'a TelemetrySnapshot,
    timestamp_ms: i64,
}

#[derive(Debug, Clone, Serialize)]
struct TxIndexRecord<'a> {
    tx_id: &'a str,
    block_index: u64,
    kind: &'a str,
    agent_id: &'a str,
    device_id: Option<&'a str>,
    action: &'a str,
}

#[derive(Debug, Clone, Serialize)]
struct ModelUsageRecord<'a> {
    cycle: u64,
    agent_id: &'a str,
    model: &'a str,
    provider: &'a str,
    prompt_tokens: u64,
    response_tokens: u64,
    agent_total_usd: f64,
    total_usd: f64,
    over_budget: bool,
}

fn evaluate(
    spec: &AgentSpec,
    ctx: AgentContext<'_>,
    backend: &AgentBackend,
    preset: Preset,
    llm_allowed: bool,
) -> (Evaluation, Option<ModelEntry>) {
    match backend {
        AgentBackend::Rules(cfg) => (evaluate_agent(spec, ctx, &Backend::Local(cfg.clone())), None),
        AgentBackend::Llm { anomaly, .. } if spec.backend_kind == BackendKind::Ml => {
            (evaluate_agent(spec, ctx, &Backend::Local(anomaly.clone())), None)
        }
        AgentBackend::Llm { transport, catalog, .. } => {
            let routed = route_model(preset, spec, catalog);
            match routed {
                Ok(model) if llm_allowed => {
                    let e = evaluate_agent(
                        spec,
                        ctx,
                        &Backend::Llm {
                            transport: transport.as_ref(),
                            model: &model,
                        },
                    );
                    (e, Some(model))
                }
                _ => (
                    Evaluation {
                        backend_unavailable: true,
                        ..Evaluation::default()
                    },
                    None,
                ),
            }
        }
    }
}

fn scope_from(overrides: Option<&GovValue>, agent_id: &str) -> DeviceScope {
    match overrides {
        Some(GovValue::Map(m)) => match m.get(agent_id) {
            Some(pattern) => DeviceScope(pattern.split(',').map(str::to_owned).collect()),
            None => DeviceScope::wildcard(),
        },
        _ => DeviceScope::wildcard(),
    }
}

/// One running household: gateway, ledger, governance and store, advanced
/// one agent cycle at a time by its owner.
pub struct Session {
    config: CycleConfig,
    manual: Option<Arc<ManualClock>>,
    clock: Arc<dyn Clock>,
    gateway: Gateway,
    ledger: Ledger,
    governance: GovernanceContract,
    store: OffChainStore,
    history: AgentHistory,
    telemetry_history: TelemetryHistory,
    keys: BTreeMap<String, SecretKey>,
    backend: AgentBackend,
    costs: CostTracker,
    cycle: u64,
    anchored: BTreeMap<Table, usize>,
    receipts: Vec<AnchorReceipt>,
    audit_seen: usize,
    pending_commands: Vec<AgentDecision>,
    report: SessionReport,
    finished: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("cycle", &self.cycle)
            .field("blocks", &self.ledger.chain().len())
            .field("finished", &self.finished)
            .finish()
    }
}

impl Session {
    pub fn new(
        config: CycleConfig,
        devices: Vec<Device>,
        source: Box<dyn TelemetrySource>,
        backend: AgentBackend,
    ) -> Result<Self, OrchestratorError> {
        config.validate()?;
        let (manual, clock): (Option<Arc<ManualClock>>, Arc<dyn Clock>) = match config.tick_mode {
            TickMode::Fast => {
                let m = Arc::new(ManualClock::new(config.start_ms));
                (Some(m.clone()), m)
            }
            TickMode::Realtime => (None, Arc::new(SystemClock)),
        };
        let governance = GovernanceContract::new(clock.clone());
        let snapshot = governance.snapshot();
        let mut ledger = Ledger::new(config.difficulty.clone());
        let mut store = OffChainStore::new();
        let mut keys = BTreeMap::new();

        let priorities = snapshot.priorities();
        let overrides = snapshot.get(names::PER_AGENT_DEVICE_OVERRIDES);
        let identities = AgentRole::ALL
            .iter()
            .map(|r| (r.agent_id().to_owned(), priorities[r.agent_id()]))
            .chain(SYSTEM_IDENTITIES.iter().map(|id| ((*id).to_owned(), 1.0)));
        for (agent_id, priority) in identities {
            let (sk, pk) = keypair_from_seed(&seed_from_label(&format!("{agent_id}#{}", config.seed)))?;
            let entry = AgentRegistryEntry {
                device_scope: scope_from(overrides, &agent_id),
                agent_id: agent_id.clone(),
                public_key: pk,
                priority,
            };
            store.append(Table::Agents, &entry);
            ledger.register_agent(entry)?;
            keys.insert(agent_id, sk);
        }
        for d in &devices {
            store.append(Table::Devices, d);
        }
        for (key, value) in &snapshot.values {
            store.append(
                Table::GovernanceParams,
                &serde_json::json!({"key": key, "value": value, "version": snapshot.version, "actor": "default"}),
            );
        }
        store.append(
            Table::Sessions,
            &serde_json::json!({"event": "start", "config": &config, "timestamp_ms": clock.now_ms()}),
        );
        let costs = CostTracker::new(snapshot.number(names::API_BUDGET_CAP_USD));
        let report = SessionReport {
            seed: config.seed,
            mode: Some(config.mode),
            acceptance_rate: 1.0,
            chain_valid: true,
            ..SessionReport::default()
        };
        Ok(Self {
            gateway: Gateway::new(devices, source),
            manual,
            clock,
            ledger,
            governance,
            store,
            history: AgentHistory::new(),
            telemetry_history: TelemetryHistory::new(HISTORY_CAPACITY),
            keys,
            backend,
            costs,
            cycle: 0,
            anchored: BTreeMap::new(),
            receipts: Vec::new(),
            audit_seen: 0,
            pending_commands: Vec::new(),
            report,
            finished: false,
            config,
        })
    }

    /// The simulated 16-device home with the rule backend.
    pub fn sim(config: CycleConfig) -> Result<Self, OrchestratorError> {
        let home = build_sim_home(config.seed);
        let source = SimSource::new(&home, config.seed);
        Self::new(config, home, Box::new(source), AgentBackend::default())
    }

    /// Builds the device set and telemetry source `config.mode` calls for.
    /// Real mode reads only `endpoints`; hybrid overlays them on the
    /// simulated home, adding any device id the home lacks.
    #[cfg(feature = "http")]
    pub fn for_mode(
        config: CycleConfig,
        endpoints: Vec<crate::devices::http::HttpEndpoint>,
        backend: AgentBackend,
    ) -> Result<Self, OrchestratorError> {
        use super::Mode;
        use crate::devices::http::{HttpSource, HybridSource};

        let timeout = Duration::from_secs(2);
        let as_device = |e: &crate::devices::http::HttpEndpoint| Device::new(&e.device_id, &e.room, e.device_type);
        match config.mode {
            Mode::Sim => {
                let home = build_sim_home(config.seed);
                let source = SimSource::new(&home, config.seed);
                Self::new(config, home, Box::new(source), backend)
            }
            Mode::Real => {
                if endpoints.is_empty() {
                    return Err(OrchestratorError::Config(
                        "real mode needs at least one device endpoint".into(),
                    ));
                }
                let devices = endpoints.iter().map(as_device).collect();
                Self::new(config, devices, Box::new(HttpSource::new(endpoints, timeout)), backend)
            }
            Mode::Hybrid => {
                let mut home = build_sim_home(config.seed);
                let sim = SimSource::new(&home, config.seed);
                for e in &endpoints {
                    if !home.iter().any(|d| d.device_id == e.device_id) {
                        home.push(as_device(e));
                    }
                }
                let source = HybridSource::new(sim, HttpSource::new(endpoints, timeout));
                Self::new(config, home, Box::new(source), backend)
            }
        }
    }

    pub fn config(&self) -> &CycleConfig {
        &self.config
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn store(&self) -> &OffChainStore {
        &self.store
    }

    pub fn governance(&self) -> &GovernanceContract {
        &self.governance
    }

    pub fn gateway(&mut self) -> &mut Gateway {
        &mut self.gateway
    }

    pub fn history(&self) -> &AgentHistory {
        &self.history
    }

    pub fn receipts(&self) -> &[AnchorReceipt] {
        &self.receipts
    }

    pub fn report(&self) -> &SessionReport {
        &self.report
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn now_ms(&self) -> i64 {
        self.clock.now_ms()
    }

    pub fn inject_fault(&mut self, fault: FaultScenario) -> Result<(), OrchestratorError> {
        self.gateway.inject_fault(fault).map_err(OrchestratorError::Config)
    }

    /// Writes a preference and records every resulting audit entry. Invalid
    /// values are audited before the error is returned.
    pub fn set_preference(&mut self, key: &str, value: GovValue, actor: &str) -> Result<Verdict, OrchestratorError> {
        let result = self.governance.set_preference(key, value.clone(), actor);
        self.flush_audit();
        let verdict = result?;
        if let Verdict::Allowed { version, .. } = verdict {
            self.store.append(
                Table::GovernanceParams,
                &serde_json::json!({"key": key, "value": value, "version": version, "actor": actor}),
            );
            if key == names::API_BUDGET_CAP_USD {
                self.costs
                    .set_budget(self.governance.snapshot().number(names::API_BUDGET_CAP_USD));
            }
        }
        Ok(verdict)
    }

    fn flush_audit(&mut self) {
        let new: Vec<_> = self.governance.audit_log()[self.audit_seen..].to_vec();
        self.audit_seen += new.len();
        for e in &new {
            self.store.append(Table::GovernanceAudit, e);
        }
    }

    /// Parses a resident sentence. Device commands join the next cycle's
    /// decision pool; preferences go through governance at once.
    pub fn command(&mut self, text: &str) -> Result<(NluOutcome, Option<Verdict>), OrchestratorError> {
        let snapshot = self.latest_or_layout();
        let outcome = nlu_parse(text, &snapshot).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        let verdict = match &outcome {
            NluOutcome::Decision(d) => {
                self.pending_commands.push(d.clone());
                None
            }
            NluOutcome::Preference { key, value } => {
                Some(self.set_preference(key, GovValue::Number(*value), AgentRole::Nlu.agent_id())?)
            }
        };
        Ok((outcome, verdict))
    }

    fn latest_or_layout(&mut self) -> TelemetrySnapshot {
        if let Some(s) = self.gateway.read_telemetry(ORCHESTRATOR_IDENTITY) {
            return s;
        }
        let readings = self
            .gateway
            .list_devices(ORCHESTRATOR_IDENTITY)
            .into_iter()
            .map(|d| {
                let mut r = crate::telemetry::Reading::new(&d.device_id, &d.room, d.device_type);
                r.state = d.state;
                (d.device_id, r)
            })
            .collect();
        TelemetrySnapshot {
            readings,
            ..TelemetrySnapshot::default()
        }
    }

    fn tick_time(&self, tick: u64) -> i64 {
        match &self.manual {
            Some(m) => {
                m.set(self.config.start_ms + (tick * self.config.telemetry_interval_ms) as i64);
                m.now_ms()
            }
            None => {
                if tick > 0 {
                    thread::sleep(Duration::from_millis(self.config.telemetry_interval_ms));
                }
                self.clock.now_ms()
            }
        }
    }

    fn sign(&self, draft: TxDraft) -> Transaction {
        let sk = self
            .keys
            .get(&draft.agent_id)
            .expect("identity registered at session start");
        draft.seal_and_sign(sk)
    }

    fn record_block(&mut self, mined: &Mined, cycle: u64) -> (u64, crate::ledger::BlockKind) {
        let b = &mined.block;
        let kind = b.kind();
        self.store.append(
            Table::BlocksIndex,
            &BlockIndexRecord {
                index: b.index,
                kind: kind.as_str(),
                block_hash: b.block_hash.to_hex(),
                difficulty: b.difficulty,
                tx_count: b.txs.len(),
                nonce_count: mined.nonce_count,
                cycle,
                timestamp_ms: b.timestamp_ms,
            },
        );
        for tx in &b.txs {
            self.store.append(
                Table::TransactionsIndex,
                &TxIndexRecord {
                    tx_id: &tx.tx_id,
                    block_index: b.index,
                    kind: tx.kind.as_str(),
                    agent_id: &tx.agent_id,
                    device_id: tx.device_id.as_deref(),
                    action: &tx.action,
                },
            );
        }
        *self.report.blocks_by_kind.entry(kind).or_insert(0) += 1;
        (b.index, kind)
    }

    /// One agent cycle: collect, evaluate, arbitrate, mine, record.
    pub fn run_cycle(&mut self) -> Result<CycleReport, OrchestratorError> {
        if self.finished {
            return Err(OrchestratorError::Finished);
        }
        let c = self.cycle + 1;
        let mut trace = Vec::new();
        let constraints: Arc<GovernanceSnapshot> = self.governance.snapshot();
        let th = Thresholds::from_snapshot(&constraints);

        // Phase 1: telemetry, device guards.
        let tpc = self.config.ticks_per_cycle();
        let mut emergency_txs = Vec::new();
        let mut emergencies = 0;
        for k in 0..tpc {
            let tick = (c - 1) * tpc + k;
            let now = self.tick_time(tick);
            let col = self.gateway.collect(c, tick, &th, now);
            trace.push(Phase::Telemetry { tick });
            if !col.emergencies.is_empty() || !col.actuations.is_empty() {
                trace.push(Phase::DeviceGuard {
                    events: col.emergencies.len(),
                    actuations: col.actuations.len(),
                });
            }
            self.store.append(
                Table::Telemetry,
                &TelemetryRecord {
                    snapshot: &col.snapshot,
                    timestamp_ms: now,
                },
            );
            for (i, e) in col.emergencies.iter().enumerate() {
                self.store.append(Table::Emergencies, e);
                let mut params = Params::new();
                params.insert("metric".into(), Scalar::Text(e.metric.as_str().into()));
                params.insert("value".into(), Scalar::Real(e.value));
                params.insert("threshold".into(), Scalar::Real(e.threshold));
                emergency_txs.push(self.sign(TxDraft {
                    tx_id: format!("em-{c:05}-{tick}-{i:03}"),
                    agent_id: EMERGENCY_IDENTITY.into(),
                    kind: TxKind::Emergency,
                    device_id: Some(e.device_id.clone()),
                    action: e.action.clone(),
                    params,
                    confidence: 1.0,
                    timestamp_ms: now,
                }));
            }
            emergencies += col.emergencies.len();
            self.telemetry_history.push(&col.snapshot);
        }
        let now = self.clock.now_ms();
        let snapshot = self
            .gateway
            .read_telemetry(ORCHESTRATOR_IDENTITY)
            .expect("collected at least one tick");

        // Phase 2: concurrent agent evaluation over one snapshot.
        let specs: Vec<AgentSpec> = AgentSpec::all(&constraints)
            .into_iter()
            .filter(AgentSpec::is_cycle_agent)
            .collect();
        let ctx = AgentContext {
            telemetry: &snapshot,
            constraints: &constraints,
            history: &self.telemetry_history,
        };
        let backend = &self.backend;
        let preset = self.config.preset;
        let llm_allowed = !self.costs.over_budget();
        let evaluations: Vec<(Evaluation, Option<ModelEntry>)> = thread::scope(|s| {
            let handles: Vec<_> = specs
                .iter()
                .map(|spec| s.spawn(move || evaluate(spec, ctx, backend, preset, llm_allowed)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("agent evaluation panicked"))
                .collect()
        });
        let mut pool: Vec<AgentDecision> = self
            .pending_commands
            .drain(..)
            .map(|mut d| {
                d.cycle = c;
                d
            })
            .collect();
        let mut unavailable = Vec::new();
        for (spec, (eval, model)) in specs.iter().zip(evaluations) {
            if eval.backend_unavailable {
                unavailable.push(spec.agent_id.clone());
            }
            if let Some(m) = model {
                let u = self
                    .costs
                    .track(&spec.agent_id, &m, eval.prompt_tokens, eval.response_tokens);
                self.store.append(
                    Table::ModelUsage,
                    &ModelUsageRecord {
                        cycle: c,
                        agent_id: &spec.agent_id,
                        model: &m.model_name,
                        provider: m.provider.as_str(),
                        prompt_tokens: eval.prompt_tokens,
                        response_tokens: eval.response_tokens,
                        agent_total_usd: u.agent_total_usd,
                        total_usd: u.total_usd,
                        over_budget: u.over_budget,
                    },
                );
            }
            pool.extend(eval.decisions);
        }
        trace.push(Phase::AgentsEvaluated { proposals: pool.len() });

        // Phase 3: conflicts.
        let partition = partition_pool(&pool);
        let priorities = constraints.priorities();
        let arbiter_spec = AgentSpec::for_role(AgentRole::Arbitration);
        let llm_arbiter = match &self.backend {
            AgentBackend::Llm { transport, catalog, .. } if llm_allowed => route_model(preset, &arbiter_spec, catalog)
                .ok()
                .map(|model| LlmArbiter {
                    transport: transport.as_ref(),
                    model,
                    system_prompt: arbiter_spec.system_prompt.clone(),
                    context: format!(
                        "time {} min; sliders comfort_vs_energy={} security_vs_privacy={}",
                        snapshot.time_of_day_min,
                        constraints.number(names::COMFORT_VS_ENERGY),
                        constraints.number(names::SECURITY_VS_PRIVACY)
                    ),
                }),
            _ => None,
        };
        let conflicts: Vec<ConflictRecord> = partition
            .conflicts
            .iter()
            .map(|g| {
                resolve(
                    g,
                    &priorities,
                    &self.history,
                    llm_arbiter.as_ref().map(|a| a as &dyn Arbiter),
                    now,
                )
            })
            .collect();
        drop(llm_arbiter);
        trace.push(Phase::Arbitrated {
            conflicts: conflicts.len(),
        });

        // Phase 4: sign, validate, mine.
        let mut winners: Vec<(AgentDecision, Option<String>)> =
            partition.uncontested.iter().map(|d| (d.clone(), None)).collect();
        winners.extend(
            conflicts
                .iter()
                .map(|r| (r.winning_decision().clone(), Some(r.conflict_id.clone()))),
        );
        let mut block_txs: Vec<Transaction> = Vec::new();
        let mut outcomes: Vec<(AgentDecision, Option<String>, Result<String, String>)> = Vec::new();
        for (i, (d, conflict_id)) in winners.into_iter().enumerate() {
            let capable = self
                .gateway
                .device_capabilities(ORCHESTRATOR_IDENTITY, &d.device_id)
                .map(|caps| caps.contains(&d.action));
            let outcome = match capable {
                Err(e) => Err(e.to_string()),
                Ok(false) => Err(format!("{} does not support {}", d.device_id, d.action)),
                Ok(true) if !self.keys.contains_key(&d.agent_id) => Err(format!("unregistered agent {}", d.agent_id)),
                Ok(true) => {
                    let tx = self.sign(TxDraft {
                        tx_id: format!("tx-{c:05}-{i:03}"),
                        agent_id: d.agent_id.clone(),
                        kind: TxKind::Decision,
                        device_id: Some(d.device_id.clone()),
                        action: d.action.clone(),
                        params: d.params.clone(),
                        confidence: d.confidence.clamp(0.0, 1.0),
                        timestamp_ms: now,
                    });
                    match self.ledger.validate(&tx, &block_txs) {
                        TxVerdict::Accepted => {
                            let id = tx.tx_id.clone();
                            block_txs.push(tx);
                            Ok(id)
                        }
                        TxVerdict::Conflicted { with } => Err(format!("conflicts with {}", with.join(","))),
                        TxVerdict::Rejected { gate, reason } => Err(format!("{gate} gate: {reason}")),
                    }
                }
            };
            outcomes.push((d, conflict_id, outcome));
        }
        for r in &conflicts {
            let mut params = Params::new();
            params.insert("winner".into(), Scalar::Text(r.winner.clone()));
            params.insert("level".into(), Scalar::Text(r.resolution_level.to_string()));
            params.insert("competitors".into(), Scalar::Int(r.competitors.len() as i64));
            block_txs.push(self.sign(TxDraft {
                tx_id: r.conflict_id.clone(),
                agent_id: AgentRole::Arbitration.agent_id().into(),
                kind: TxKind::Conflict,
                device_id: Some(r.device_id.clone()),
                action: "resolve".into(),
                params,
                confidence: 1.0,
                timestamp_ms: now,
            }));
        }
        for ch in self.governance.drain_changes() {
            let mut params = Params::new();
            params.insert("key".into(), Scalar::Text(ch.key.clone()));
            params.insert(
                "value".into(),
                Scalar::Text(serde_json::to_string(&ch.new_value).unwrap_or_default()),
            );
            params.insert("actor".into(), Scalar::Text(ch.actor.clone()));
            params.insert("version".into(), Scalar::Int(ch.version as i64));
            block_txs.push(self.sign(TxDraft {
                tx_id: format!("gov-{:06}", ch.version),
                agent_id: GOVERNANCE_IDENTITY.into(),
                kind: TxKind::Governance,
                device_id: None,
                action: "set_preference".into(),
                params,
                confidence: 1.0,
                timestamp_ms: ch.timestamp_ms,
            }));
        }

        let mut blocks = Vec::new();
        let mut decision_block = None;
        if !emergency_txs.is_empty() {
            let mined = self.ledger.commit(emergency_txs, self.clock.as_ref())?;
            trace.push(Phase::Mined {
                block: mined.block.index,
                kind: mined.block.kind(),
            });
            blocks.push(self.record_block(&mined, c));
        }
        if !block_txs.is_empty() {
            let mined = self.ledger.commit(block_txs, self.clock.as_ref())?;
            trace.push(Phase::Mined {
                block: mined.block.index,
                kind: mined.block.kind(),
            });
            decision_block = Some(mined.block.index);
            blocks.push(self.record_block(&mined, c));
        }

        // Phase 5: records, device effects, history.
        let mut committed = Vec::new();
        let mut rejected = 0;
        let conflicted_agents: BTreeMap<(String, String), &ConflictRecord> = conflicts
            .iter()
            .flat_map(|r| {
                r.competitors
                    .iter()
                    .map(move |d| ((d.agent_id.clone(), r.device_id.clone()), r))
            })
            .collect();
        for (d, conflict_id, outcome) in outcomes {
            let in_conflict = conflict_id.is_some();
            let rec = match outcome {
                Ok(tx_id) => {
                    let _ = self
                        .gateway
                        .send_command(&d.agent_id, &d.device_id, &d.action, &d.params);
                    self.history.record_outcome(&d, true, in_conflict);
                    *self.report.committed_by_agent.entry(d.agent_id.clone()).or_insert(0) += 1;
                    DecisionRecord {
                        decision: d,
                        status: DecisionStatus::Committed,
                        tx_id: Some(tx_id),
                        conflict_id,
                        block_index: decision_block,
                        reason: None,
                    }
                }
                Err(reason) => {
                    rejected += 1;
                    self.history.record_outcome(&d, false, in_conflict);
                    DecisionRecord {
                        decision: d,
                        status: DecisionStatus::Rejected,
                        tx_id: None,
                        conflict_id,
                        block_index: None,
                        reason: Some(reason),
                    }
                }
            };
            self.store.append(Table::Decisions, &rec);
            if rec.status == DecisionStatus::Committed {
                committed.push(rec);
            }
        }
        for r in &conflicts {
            for d in r.competitors.iter().filter(|d| d.agent_id != r.winner) {
                self.history.record_outcome(d, false, true);
                let rec = DecisionRecord {
                    decision: d.clone(),
                    status: DecisionStatus::Lost,
                    tx_id: None,
                    conflict_id: Some(r.conflict_id.clone()),
                    block_index: None,
                    reason: Some(format!("lost to {} at {}", r.winner, r.resolution_level)),
                };
                self.store.append(Table::Decisions, &rec);
            }
            self.store.append(Table::Conflicts, r);
            *self.report.conflicts_by_level.entry(r.resolution_level).or_insert(0) += 1;
        }
        for d in &partition.merged {
            let key = (d.agent_id.clone(), d.device_id.clone());
            self.history
                .record_outcome(d, true, conflicted_agents.contains_key(&key));
            let rec = DecisionRecord {
                decision: d.clone(),
                status: DecisionStatus::Merged,
                tx_id: None,
                conflict_id: None,
                block_index: None,
                reason: Some("duplicate command".into()),
            };
            self.store.append(Table::Decisions, &rec);
        }
        trace.push(Phase::Recorded);

        let difficulty = self.ledger.chain().current_difficulty();
        let winning = committed.len() + rejected;
        self.report.cycles_run = c;
        self.report.proposed += pool.len();
        self.report.winning += winning;
        self.report.committed += committed.len();
        self.report.rejected += rejected;
        self.report.acceptance_rate = if self.report.winning == 0 {
            1.0
        } else {
            self.report.committed as f64 / self.report.winning as f64
        };
        for d in &pool {
            *self.report.proposed_by_agent.entry(d.agent_id.clone()).or_insert(0) += 1;
        }
        self.report.emergencies += emergencies;
        self.report.difficulty_trace.push(difficulty);
        self.cycle = c;

        if c % self.config.anchor_every == 0 {
            let receipt = self.anchor_now()?;
            trace.push(Phase::Anchored {
                block: receipt.block_index,
            });
            blocks.push((receipt.block_index, crate::ledger::BlockKind::Anchor));
        }

        Ok(CycleReport {
            cycle: c,
            emergencies,
            proposals: pool.len(),
            committed,
            rejected,
            conflicts,
            blocks,
            difficulty,
            backend_unavailable: unavailable,
            trace,
        })
    }

    /// Commits the Merkle root of every unanchored record in its own block.
    pub fn anchor_now(&mut self) -> Result<AnchorReceipt, OrchestratorError> {
        let (ranges, root) = plan_anchor(&self.store, &self.anchored).ok_or(OrchestratorError::NothingToAnchor)?;
        let seq = self.receipts.len() as u64;
        let tx = self.sign(TxDraft {
            tx_id: format!("anchor-{seq:05}"),
            agent_id: ORCHESTRATOR_IDENTITY.into(),
            kind: TxKind::Anchor,
            device_id: None,
            action: "anchor".into(),
            params: anchor_params(seq, &root, &ranges),
            confidence: 1.0,
            timestamp_ms: self.clock.now_ms(),
        });
        let mined = self.ledger.commit(vec![tx], self.clock.as_ref())?;
        for (t, r) in &ranges {
            self.anchored.insert(*t, r.end);
        }
        let receipt = AnchorReceipt {
            seq,
            merkle_root: root,
            ranges,
            anchor_tx_id: format!("anchor-{seq:05}"),
            block_index: mined.block.index,
        };
        self.store.append(Table::Anchors, &receipt);
        *self.report.blocks_by_kind.entry(mined.block.kind()).or_insert(0) += 1;
        self.receipts.push(receipt.clone());
        self.report.anchors = self.receipts.clone();
        Ok(receipt)
    }

    /// Closes the session: stop record, final anchor, chain check.
    pub fn finish(&mut self) -> Result<SessionReport, OrchestratorError> {
        if self.finished {
            return Ok(self.report.clone());
        }
        self.flush_audit();
        self.store.append(
            Table::Sessions,
            &serde_json::json!({
                "event": "stop",
                "cycles": self.cycle,
                "committed": self.report.committed,
                "timestamp_ms": self.clock.now_ms(),
            }),
        );
        match self.anchor_now() {
            Ok(_) | Err(OrchestratorError::NothingToAnchor) => {}
            Err(e) => return Err(e),
        }
        self.report.chain_valid = self.ledger.validate_chain().valid;
        self.finished = true;
        Ok(self.report.clone())
    }

    pub fn blocks(&self) -> &[Block] {
        self.ledger.chain().blocks()
    }

    /// Table files, the chain, the governance export and the report text.
    pub fn save(&self, dir: &Path) -> Result<(), OrchestratorError> {
        self.store.save(dir)?;
        std::fs::write(dir.join(CHAIN_FILE), self.ledger.chain().export_lines())?;
        std::fs::write(dir.join(GOVERNANCE_FILE), self.governance.export_text())?;
        std::fs::write(dir.join(REPORT_FILE), self.report.to_text())?;
        Ok(())
    }
}

/// Runs `config.cycles` cycles of the simulated home with `faults` queued,
/// then finishes. A cycle error ends the loop; the partial report carries it.
pub fn run_session(
    config: CycleConfig,
    faults: &[FaultScenario],
    backend: AgentBackend,
) -> Result<(Session, SessionReport), OrchestratorError> {
    let home = build_sim_home(config.seed);
    let source = SimSource::new(&home, config.seed);
    let mut session = Session::new(config, home, Box::new(source), backend)?;
    for f in faults {
        session.inject_fault(f.clone())?;
    }
    let mut error = None;
    for _ in 0..session.config.cycles {
        if let Err(e) = session.run_cycle() {
            error = Some(e.to_string());
            break;
        }
    }
    let mut report = session.finish()?;
    report.error = error;
    session.report.error = report.error.clone();
    Ok((session, report))
}
