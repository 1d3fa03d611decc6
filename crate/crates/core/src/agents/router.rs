//! The eight-model catalog, preset routing with tier constraints, and
//! per-agent cost tracking.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AgentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Gemini,
    Claude,
    Gpt,
    Ollama,
}

impl Provider {
    pub const ALL: [Provider; 4] = [Provider::Gemini, Provider::Claude, Provider::Gpt, Provider::Ollama];

    pub fn as_str(self) -> &'static str {
        match self {
            Provider::Gemini => "gemini",
            Provider::Claude => "claude",
            Provider::Gpt => "gpt",
            Provider::Ollama => "ollama",
        }
    }

    /// Environment variable holding the credential; never logged.
    pub fn api_key_env(self) -> &'static str {
        match self {
            Provider::Gemini => "HEARTH_GEMINI_API_KEY",
            Provider::Claude => "HEARTH_CLAUDE_API_KEY",
            Provider::Gpt => "HEARTH_GPT_API_KEY",
            Provider::Ollama => "HEARTH_OLLAMA_API_KEY",
        }
    }
}

impl FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Provider::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown provider {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTier {
    Flash,
    Pro,
}

/// Minimum tier an agent accepts. Ordered None < Flash < Pro.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinTier {
    None,
    Flash,
    Pro,
}

impl MinTier {
    pub fn admits(self, t: ModelTier) -> bool {
        match self {
            MinTier::None | MinTier::Flash => true,
            MinTier::Pro => t == ModelTier::Pro,
        }
    }
}

impl FromStr for MinTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(MinTier::None),
            "flash" => Ok(MinTier::Flash),
            "pro" => Ok(MinTier::Pro),
            _ => Err(format!("unknown model tier {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Privacy {
    Cloud,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub provider: Provider,
    pub model_name: String,
    pub tier: ModelTier,
    pub privacy: Privacy,
    pub cost_per_1k_tokens: f64,
}

fn entry(provider: Provider, name: &str, tier: ModelTier, cost: f64) -> ModelEntry {
    ModelEntry {
        provider,
        model_name: name.to_owned(),
        tier,
        privacy: if provider == Provider::Ollama {
            Privacy::Local
        } else {
            Privacy::Cloud
        },
        cost_per_1k_tokens: cost,
    }
}

/// Placeholder names and prices; only their ordering matters.
pub fn default_catalog() -> Vec<ModelEntry> {
    use ModelTier::*;
    use Provider::*;
    vec![
        entry(Gemini, "gemini-flash", Flash, 0.000_10),
        entry(Gpt, "gpt-mini", Flash, 0.000_15),
        entry(Claude, "claude-haiku", Flash, 0.000_25),
        entry(Gemini, "gemini-pro", Pro, 0.001_25),
        entry(Gpt, "gpt-large", Pro, 0.002_50),
        entry(Claude, "claude-sonnet", Pro, 0.003_00),
        entry(Ollama, "ollama-llama-8b", Flash, 0.0),
        entry(Ollama, "ollama-llama-70b", Pro, 0.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Balanced,
    MaxPrivacy,
    Budget,
    BestQuality,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Balanced,
        Preset::MaxPrivacy,
        Preset::Budget,
        Preset::BestQuality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Balanced => "balanced",
            Preset::MaxPrivacy => "max_privacy",
            Preset::Budget => "budget",
            Preset::BestQuality => "best_quality",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown preset {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("empty model catalog")]
    EmptyCatalog,
    #[error("preset {preset} has no model for {agent_id}: needs {needs}")]
    Unsatisfied {
        preset: Preset,
        agent_id: String,
        needs: String,
    },
}

pub fn route_model(preset: Preset, spec: &AgentSpec, catalog: &[ModelEntry]) -> Result<ModelEntry, RoutingError> {
    if catalog.is_empty() {
        return Err(RoutingError::EmptyCatalog);
    }
    let min = spec.min_model_tier;
    let fail = |needs: String| RoutingError::Unsatisfied {
        preset,
        agent_id: spec.agent_id.clone(),
        needs,
    };
    let admissible = catalog.iter().filter(|m| min.admits(m.tier));
    let picked = match preset {
        Preset::Balanced => {
            let want = if min == MinTier::Pro {
                ModelTier::Pro
            } else {
                ModelTier::Flash
            };
            catalog
                .iter()
                .find(|m| m.tier == want)
                .ok_or_else(|| fail(format!("a {want:?} tier model")))?
        }
        Preset::MaxPrivacy => admissible
            .filter(|m| m.privacy == Privacy::Local)
            .min_by(|a, b| {
                a.cost_per_1k_tokens
                    .total_cmp(&b.cost_per_1k_tokens)
                    .then(a.tier.cmp(&b.tier))
            })
            .ok_or_else(|| fail(format!("a local model at tier {min:?} or above")))?,
        Preset::Budget => admissible
            .min_by(|a, b| {
                a.cost_per_1k_tokens
                    .total_cmp(&b.cost_per_1k_tokens)
                    .then(a.tier.cmp(&b.tier))
            })
            .ok_or_else(|| fail(format!("any model at tier {min:?} or above")))?,
        Preset::BestQuality => catalog
            .iter()
            .find(|m| m.tier == ModelTier::Pro)
            .ok_or_else(|| fail("a Pro tier model".to_owned()))?,
    };
    Ok(picked.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostUpdate {
    pub agent_total_usd: f64,
    pub total_usd: f64,
    pub over_budget: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CostTracker {
    per_agent: BTreeMap<String, f64>,
    tokens: BTreeMap<String, u64>,
    budget_cap_usd: f64,
}

impl CostTracker {
    pub fn new(budget_cap_usd: f64) -> Self {
        Self {
            budget_cap_usd,
            ..Self::default()
        }
    }

    pub fn set_budget(&mut self, cap: f64) {
        self.budget_cap_usd = cap;
    }

    pub fn track(
        &mut self,
        agent_id: &str,
        model: &ModelEntry,
        prompt_tokens: u64,
        response_tokens: u64,
    ) -> CostUpdate {
        let delta = model.cost_per_1k_tokens.max(0.0) * (prompt_tokens + response_tokens) as f64 / 1000.0;
        let acc = self.per_agent.entry(agent_id.to_owned()).or_insert(0.0);
        *acc += delta;
        let agent_total_usd = *acc;
        *self.tokens.entry(agent_id.to_owned()).or_insert(0) += prompt_tokens + response_tokens;
        let total_usd = self.total_usd();
        CostUpdate {
            agent_total_usd,
            total_usd,
            over_budget: total_usd > self.budget_cap_usd,
        }
    }

    pub fn agent_usd(&self, agent_id: &str) -> f64 {
        self.per_agent.get(agent_id).copied().unwrap_or(0.0)
    }

    pub fn agent_tokens(&self, agent_id: &str) -> u64 {
        self.tokens.get(agent_id).copied().unwrap_or(0)
    }

    pub fn total_usd(&self) -> f64 {
        self.per_agent.values().sum()
    }

    pub fn over_budget(&self) -> bool {
        self.total_usd() > self.budget_cap_usd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::AgentRole;

    #[test]
    fn catalog_shape() {
        let c = default_catalog();
        assert_eq!(c.len(), 8);
        for p in Provider::ALL {
            assert!(c.iter().any(|m| m.provider == p));
        }
        assert!(c
            .iter()
            .filter(|m| m.provider == Provider::Ollama)
            .all(|m| m.privacy == Privacy::Local));
    }

    #[test]
    fn preset_examples() {
        let c = default_catalog();
        let safety = AgentSpec::for_role(AgentRole::Safety);
        let climate = AgentSpec::for_role(AgentRole::Climate);
        let energy = AgentSpec::for_role(AgentRole::Energy);
        assert_eq!(route_model(Preset::Balanced, &safety, &c).unwrap().tier, ModelTier::Pro);
        assert_eq!(
            route_model(Preset::Balanced, &climate, &c).unwrap().tier,
            ModelTier::Flash
        );
        assert_eq!(
            route_model(Preset::MaxPrivacy, &climate, &c).unwrap().privacy,
            Privacy::Local
        );
        assert_eq!(
            route_model(Preset::MaxPrivacy, &safety, &c).unwrap().model_name,
            "ollama-llama-70b"
        );

        // Exhaustive scan for the cheapest admissible entry.
        let cheapest = c
            .iter()
            .filter(|m| energy.min_model_tier.admits(m.tier))
            .map(|m| m.cost_per_1k_tokens)
            .fold(f64::INFINITY, f64::min);
        let got = route_model(Preset::Budget, &energy, &c).unwrap();
        assert_eq!(got.cost_per_1k_tokens, cheapest);
        for spec in [&safety, &climate] {
            assert_eq!(route_model(Preset::BestQuality, spec, &c).unwrap().tier, ModelTier::Pro);
        }
    }

    #[test]
    fn missing_local_pro_names_constraint() {
        let c: Vec<_> = default_catalog()
            .into_iter()
            .filter(|m| m.model_name != "ollama-llama-70b")
            .collect();
        let err = route_model(Preset::MaxPrivacy, &AgentSpec::for_role(AgentRole::Safety), &c).unwrap_err();
        assert!(err.to_string().contains("local"), "{err}");
        assert_eq!(
            route_model(Preset::Budget, &AgentSpec::for_role(AgentRole::Safety), &[]),
            Err(RoutingError::EmptyCatalog)
        );
    }

    #[test]
    fn tier_soundness_over_every_sub_catalog() {
        let full = default_catalog();
        let specs: Vec<_> = AgentRole::ALL.iter().map(|r| AgentSpec::for_role(*r)).collect();
        let mut routed = 0;
        for mask in 1u32..(1 << full.len()) {
            let cat: Vec<_> = full
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, m)| m.clone())
                .collect();
            for preset in Preset::ALL {
                for spec in &specs {
                    if let Ok(m) = route_model(preset, spec, &cat) {
                        routed += 1;
                        assert!(spec.min_model_tier.admits(m.tier));
                        if spec.role == AgentRole::Safety {
                            assert_eq!(m.tier, ModelTier::Pro);
                        }
                        if preset == Preset::MaxPrivacy {
                            assert_eq!(m.privacy, Privacy::Local);
                        }
                    }
                }
            }
        }
        assert!(routed > 0);
    }

    #[test]
    fn cost_arithmetic() {
        let mut t = CostTracker::new(50.0);
        let mut m = default_catalog().remove(0);
        m.cost_per_1k_tokens = 0.001;
        let u = t.track("energy-agent-001", &m, 100, 50);
        assert!((u.agent_total_usd - 0.000_15).abs() < 1e-15);
        let u2 = t.track("energy-agent-001", &m, 0, 0);
        assert_eq!(u2.agent_total_usd, u.agent_total_usd);
        t.track("energy-agent-001", &m, 100, 50);
        assert!((t.agent_usd("energy-agent-001") - 0.000_30).abs() < 1e-15);
        assert!(!t.over_budget());
        t.set_budget(0.0001);
        assert!(t.over_budget());
    }
}
