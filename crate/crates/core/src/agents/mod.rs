//! Agent specifications, decision backends, the NLU grammar, model routing
//! with cost tracking, and anomaly detection.

pub mod anomaly;
pub mod llm;
pub mod nlu;
pub mod router;
pub mod rules;

use serde::{Deserialize, Serialize};

use crate::governance::{names, GovernanceSnapshot};
use crate::ledger::Params;
use crate::roles::AgentRole;
use crate::telemetry::{TelemetryHistory, TelemetrySnapshot};

pub use router::{MinTier, ModelTier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Rule,
    Llm,
    Ml,
    Grammar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub role: AgentRole,
    pub base_priority: f64,
    pub backend_kind: BackendKind,
    pub min_model_tier: MinTier,
    pub system_prompt: String,
}

fn system_prompt(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Safety => {
            "You guard occupants against fire, gas and air hazards. Act on any sensor crossing its locked threshold."
        }
        AgentRole::Arbitration => {
            "You settle disputes between agents that target the same device. Name exactly one winning agent_id."
        }
        AgentRole::Health => "You keep indoor air healthy. Ventilate when CO2 climbs.",
        AgentRole::Anomaly => "You watch telemetry for readings that break from their recent history.",
        AgentRole::Nlu => "You turn resident sentences into device commands or preference updates.",
        AgentRole::Security => "You keep the home secure: locks, cameras and intrusion response.",
        AgentRole::Privacy => "You limit recording while residents are home, following the camera policy.",
        AgentRole::Energy => "You keep consumption down outside quiet hours without touching safety devices.",
        AgentRole::Climate => "You hold each zone near the resident's target temperature.",
        AgentRole::Maintenance => "You report failing devices: low batteries and error flags.",
    }
}

impl AgentSpec {
    pub fn for_role(role: AgentRole) -> Self {
        let (backend_kind, min_model_tier) = match role {
            AgentRole::Safety => (BackendKind::Rule, MinTier::Pro),
            AgentRole::Arbitration => (BackendKind::Llm, MinTier::Flash),
            AgentRole::Anomaly => (BackendKind::Ml, MinTier::None),
            AgentRole::Nlu => (BackendKind::Grammar, MinTier::None),
            _ => (BackendKind::Rule, MinTier::Flash),
        };
        Self {
            agent_id: role.agent_id().to_owned(),
            role,
            base_priority: role.base_priority(),
            backend_kind,
            min_model_tier,
            system_prompt: system_prompt(role).to_owned(),
        }
    }

    /// All ten specs; the safety tier comes from the governance snapshot,
    /// where it is a LOCKED key.
    pub fn all(constraints: &GovernanceSnapshot) -> Vec<AgentSpec> {
        let safety_tier = constraints
            .get(names::SAFETY_AGENT_MIN_MODEL_TIER)
            .and_then(|v| v.as_str())
            .and_then(|s| s.parse().ok())
            .unwrap_or(MinTier::Pro)
            .max(MinTier::Pro);
        AgentRole::ALL
            .iter()
            .map(|r| {
                let mut s = AgentSpec::for_role(*r);
                if *r == AgentRole::Safety {
                    s.min_model_tier = safety_tier;
                }
                s
            })
            .collect()
    }

    /// Roles that produce decisions from telemetry each cycle.
    pub fn is_cycle_agent(&self) -> bool {
        !matches!(self.role, AgentRole::Arbitration | AgentRole::Nlu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub agent_id: String,
    pub device_id: String,
    pub action: String,
    #[serde(default)]
    pub params: Params,
    pub confidence: f64,
    pub cycle: u64,
    #[serde(default)]
    pub rationale: String,
}

impl AgentDecision {
    /// Same device, action and params.
    pub fn same_command(&self, other: &AgentDecision) -> bool {
        self.device_id == other.device_id && self.action == other.action && self.params == other.params
    }
}

/// Everything an agent may look at in one cycle.
#[derive(Debug, Clone, Copy)]
pub struct AgentContext<'a> {
    pub telemetry: &'a TelemetrySnapshot,
    pub constraints: &'a GovernanceSnapshot,
    pub history: &'a TelemetryHistory,
}

pub enum Backend<'a> {
    /// Rule tables, the anomaly ensemble; no network.
    Local(anomaly::EnsembleConfig),
    Llm {
        transport: &'a dyn llm::LlmTransport,
        model: &'a router::ModelEntry,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub decisions: Vec<AgentDecision>,
    /// The LLM transport failed; device-level fallbacks still apply.
    pub backend_unavailable: bool,
    pub prompt_tokens: u64,
    pub response_tokens: u64,
}

pub fn evaluate_agent(spec: &AgentSpec, ctx: AgentContext<'_>, backend: &Backend<'_>) -> Evaluation {
    if !spec.is_cycle_agent() {
        return Evaluation::default();
    }
    match backend {
        Backend::Local(cfg) => Evaluation {
            decisions: rules::evaluate_rules(spec.role, ctx, cfg),
            ..Evaluation::default()
        },
        Backend::Llm { transport, model } => llm::evaluate_llm(spec, ctx, *transport, model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_follow_priority_table() {
        let specs = AgentSpec::all(&GovernanceSnapshot::defaults());
        assert_eq!(specs.len(), 10);
        for s in &specs {
            assert_eq!(s.base_priority, s.role.base_priority());
            assert!(!s.system_prompt.is_empty());
        }
        let safety = specs.iter().find(|s| s.role == AgentRole::Safety).unwrap();
        assert_eq!(safety.min_model_tier, MinTier::Pro);
    }

    #[test]
    fn safety_tier_cannot_drop_below_pro() {
        let mut snap = GovernanceSnapshot::defaults();
        snap.values
            .insert(names::SAFETY_AGENT_MIN_MODEL_TIER.into(), "flash".into());
        let specs = AgentSpec::all(&snap);
        assert_eq!(specs[0].min_model_tier, MinTier::Pro);
    }
}
