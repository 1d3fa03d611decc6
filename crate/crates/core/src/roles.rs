//! The ten agent roles and their baseline priorities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Safety,
    Arbitration,
    Health,
    Anomaly,
    Nlu,
    Security,
    Privacy,
    Energy,
    Climate,
    Maintenance,
}

pub const SAFETY_AGENT_ID: &str = "safety-agent-001";

impl AgentRole {
    pub const ALL: [AgentRole; 10] = [
        AgentRole::Safety,
        AgentRole::Arbitration,
        AgentRole::Health,
        AgentRole::Anomaly,
        AgentRole::Nlu,
        AgentRole::Security,
        AgentRole::Privacy,
        AgentRole::Energy,
        AgentRole::Climate,
        AgentRole::Maintenance,
    ];

    /// Roles whose priority the governance sliders can move.
    pub const ADJUSTABLE: [AgentRole; 4] = [
        AgentRole::Security,
        AgentRole::Privacy,
        AgentRole::Energy,
        AgentRole::Climate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Safety => "safety",
            AgentRole::Arbitration => "arbitration",
            AgentRole::Health => "health",
            AgentRole::Anomaly => "anomaly",
            AgentRole::Nlu => "nlu",
            AgentRole::Security => "security",
            AgentRole::Privacy => "privacy",
            AgentRole::Energy => "energy",
            AgentRole::Climate => "climate",
            AgentRole::Maintenance => "maintenance",
        }
    }

    pub fn agent_id(self) -> &'static str {
        match self {
            AgentRole::Safety => SAFETY_AGENT_ID,
            AgentRole::Arbitration => "arbitration-agent-001",
            AgentRole::Health => "health-agent-001",
            AgentRole::Anomaly => "anomaly-agent-001",
            AgentRole::Nlu => "nlu-agent-001",
            AgentRole::Security => "security-agent-001",
            AgentRole::Privacy => "privacy-agent-001",
            AgentRole::Energy => "energy-agent-001",
            AgentRole::Climate => "climate-agent-001",
            AgentRole::Maintenance => "maintenance-agent-001",
        }
    }

    pub fn from_agent_id(id: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.agent_id() == id)
    }

    pub fn base_priority(self) -> f64 {
        match self {
            AgentRole::Safety => 1.0,
            AgentRole::Arbitration => 0.95,
            AgentRole::Health => 0.9,
            AgentRole::Anomaly => 0.88,
            AgentRole::Nlu => 0.85,
            AgentRole::Security => 0.8,
            AgentRole::Privacy => 0.7,
            AgentRole::Energy => 0.6,
            AgentRole::Climate => 0.5,
            AgentRole::Maintenance => 0.4,
        }
    }

    pub fn is_adjustable(self) -> bool {
        AgentRole::ADJUSTABLE.contains(&self)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s || r.agent_id() == s)
            .ok_or_else(|| format!("unknown agent role {s:?}"))
    }
}
