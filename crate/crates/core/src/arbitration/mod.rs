//! Conflict detection over a cycle's decision pool and the four-level
//! resolution cascade.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::llm::{LlmRequest, LlmTransport};
use crate::agents::router::ModelEntry;
use crate::agents::AgentDecision;
use crate::governance::PriorityMap;
use crate::roles::SAFETY_AGENT_ID;

/// Decisions an agent needs on record before historical scoring applies.
pub const MIN_HISTORY: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResolutionLevel {
    L1,
    L2,
    L3,
    L4,
}

impl fmt::Display for ResolutionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictGroup {
    pub device_id: String,
    pub decisions: Vec<AgentDecision>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolPartition {
    pub uncontested: Vec<AgentDecision>,
    pub conflicts: Vec<ConflictGroup>,
    /// Exact repeats of an earlier command; executed through that one.
    pub merged: Vec<AgentDecision>,
}

/// Drops exact duplicate commands (first occurrence kept), then groups by
/// device. Devices with two or more distinct commands are conflicts.
pub fn partition_pool(pool: &[AgentDecision]) -> PoolPartition {
    let mut out = PoolPartition::default();
    let mut by_device: BTreeMap<&str, Vec<AgentDecision>> = BTreeMap::new();
    for d in pool {
        let group = by_device.entry(d.device_id.as_str()).or_default();
        if group.iter().any(|g| g.same_command(d)) {
            out.merged.push(d.clone());
        } else {
            group.push(d.clone());
        }
    }
    for (device, mut group) in by_device {
        if group.len() == 1 {
            out.uncontested.push(group.remove(0));
        } else {
            out.conflicts.push(ConflictGroup {
                device_id: device.to_owned(),
                decisions: group,
            });
        }
    }
    out
}

pub fn detect_conflicts(pool: &[AgentDecision]) -> Vec<ConflictGroup> {
    partition_pool(pool).conflicts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgentStats {
    pub total_decisions: u64,
    pub accepted_decisions: u64,
    pub conflicts_involved: u64,
}

impl AgentStats {
    pub fn r_accept(&self) -> Option<f64> {
        (self.total_decisions > 0).then(|| self.accepted_decisions as f64 / self.total_decisions as f64)
    }

    pub fn r_conflict(&self) -> Option<f64> {
        (self.total_decisions > 0).then(|| self.conflicts_involved as f64 / self.total_decisions as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentHistory {
    pub agents: BTreeMap<String, AgentStats>,
}

impl AgentHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self, agent_id: &str) -> AgentStats {
        self.agents.get(agent_id).copied().unwrap_or_default()
    }

    pub fn record_outcome(&mut self, decision: &AgentDecision, accepted: bool, conflicted: bool) -> AgentStats {
        let s = self.agents.entry(decision.agent_id.clone()).or_default();
        s.total_decisions += 1;
        s.accepted_decisions += u64::from(accepted);
        s.conflicts_involved += u64::from(conflicted);
        *s
    }
}

/// S(a) = 0.6 * r_accept * (1 - 0.5 * r_conflict) + 0.4 * priority
pub fn historical_score(stats: &AgentStats, priority: f64) -> Option<f64> {
    Some(0.6 * (stats.r_accept()? * (1.0 - 0.5 * stats.r_conflict()?)) + 0.4 * priority)
}

/// The L2 stage: given the dispute, name one competitor or decline.
pub trait Arbiter: Send + Sync {
    fn arbitrate(&self, group: &ConflictGroup, priorities: &PriorityMap) -> Option<String>;
}

/// Asks an LLM to pick a winner. The reply must mention exactly one
/// competing agent id; anything else counts as a failed arbitration.
pub struct LlmArbiter<'a> {
    pub transport: &'a dyn LlmTransport,
    pub model: ModelEntry,
    pub system_prompt: String,
    /// Telemetry and governance preferences, already rendered.
    pub context: String,
}

impl Arbiter for LlmArbiter<'_> {
    fn arbitrate(&self, group: &ConflictGroup, priorities: &PriorityMap) -> Option<String> {
        let commands = serde_json::to_string(&group.decisions).ok()?;
        let prios: BTreeMap<&str, f64> = group
            .decisions
            .iter()
            .map(|d| (d.agent_id.as_str(), priorities.get(&d.agent_id).copied().unwrap_or(0.0)))
            .collect();
        let request = LlmRequest {
            model_name: self.model.model_name.clone(),
            system_prompt: self.system_prompt.clone(),
            user_prompt: format!(
                "device: {}\ncommands: {commands}\npriorities: {}\ncontext: {}\nAnswer with the winning agent_id only.",
                group.device_id,
                serde_json::to_string(&prios).ok()?,
                self.context
            ),
        };
        let reply = self.transport.complete(&request).ok()?;
        let mut named: Vec<&str> = group
            .decisions
            .iter()
            .map(|d| d.agent_id.as_str())
            .filter(|id| reply.text.contains(id))
            .collect();
        named.dedup();
        match named.as_slice() {
            [one] => Some((*one).to_owned()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub conflict_id: String,
    pub device_id: String,
    pub competitors: Vec<AgentDecision>,
    pub resolution_level: ResolutionLevel,
    pub winner: String,
    pub rationale: String,
    pub cycle: u64,
    pub timestamp_ms: i64,
}

impl ConflictRecord {
    pub fn winning_decision(&self) -> &AgentDecision {
        self.competitors
            .iter()
            .find(|d| d.agent_id == self.winner)
            .expect("winner is a competitor")
    }
}

/// Highest value wins; equal values go to the lexicographically smallest id.
fn argmax<'a>(candidates: impl Iterator<Item = (&'a str, f64)>) -> Option<(&'a str, f64)> {
    candidates.fold(None, |best, (id, v)| match best {
        None => Some((id, v)),
        Some((bid, bv)) if v > bv || (v == bv && id < bid) => Some((id, v)),
        keep => keep,
    })
}

pub fn resolve(
    group: &ConflictGroup,
    priorities: &PriorityMap,
    history: &AgentHistory,
    arbiter: Option<&dyn Arbiter>,
    timestamp_ms: i64,
) -> ConflictRecord {
    assert!(group.decisions.len() >= 2, "a conflict needs at least two decisions");
    let cycle = group.decisions[0].cycle;
    let ids = || group.decisions.iter().map(|d| d.agent_id.as_str());
    let prio = |id: &str| priorities.get(id).copied().unwrap_or(0.0);

    let (level, winner, rationale) = if ids().any(|id| id == SAFETY_AGENT_ID) {
        (
            ResolutionLevel::L1,
            SAFETY_AGENT_ID.to_owned(),
            "safety agent overrides every other agent".to_owned(),
        )
    } else if let Some(w) = arbiter
        .and_then(|a| a.arbitrate(group, priorities))
        .filter(|w| ids().any(|id| id == w))
    {
        (ResolutionLevel::L2, w, "contextual arbitration verdict".to_owned())
    } else if ids().all(|id| history.stats(id).total_decisions >= MIN_HISTORY) {
        let scored: Vec<(&str, f64)> = ids()
            .map(|id| {
                (
                    id,
                    historical_score(&history.stats(id), prio(id)).expect("history is non-empty"),
                )
            })
            .collect();
        let (w, s) = argmax(scored.iter().copied()).expect("non-empty group");
        let detail = scored
            .iter()
            .map(|(id, s)| format!("{id}={s:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        (
            ResolutionLevel::L3,
            w.to_owned(),
            format!("historical score {s:.4} ({detail})"),
        )
    } else {
        let (w, p) = argmax(ids().map(|id| (id, prio(id)))).expect("non-empty group");
        (ResolutionLevel::L4, w.to_owned(), format!("highest priority {p}"))
    };

    ConflictRecord {
        conflict_id: format!("conflict-{cycle:05}-{}", group.device_id),
        device_id: group.device_id.clone(),
        competitors: group.decisions.clone(),
        resolution_level: level,
        winner,
        rationale,
        cycle,
        timestamp_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::{priorities_from_sliders, SliderState};
    use crate::ledger::Params;
    use crate::roles::AgentRole;

    fn d(role: AgentRole, device: &str, action: &str) -> AgentDecision {
        AgentDecision {
            agent_id: role.agent_id().into(),
            device_id: device.into(),
            action: action.into(),
            params: Params::new(),
            confidence: 0.9,
            cycle: 1,
            rationale: String::new(),
        }
    }

    fn group(ds: Vec<AgentDecision>) -> ConflictGroup {
        ConflictGroup {
            device_id: ds[0].device_id.clone(),
            decisions: ds,
        }
    }

    fn with_history(h: &mut AgentHistory, role: AgentRole, total: u64, accepted: u64, conflicts: u64) {
        h.agents.insert(
            role.agent_id().into(),
            AgentStats {
                total_decisions: total,
                accepted_decisions: accepted,
                conflicts_involved: conflicts,
            },
        );
    }

    #[test]
    fn detection() {
        let pool = vec![
            d(AgentRole::Climate, "hvac", "set_cooling"),
            d(AgentRole::Energy, "hvac", "power_off"),
            d(AgentRole::Climate, "light", "off"),
            d(AgentRole::Energy, "light", "off"),
        ];
        let p = partition_pool(&pool);
        assert_eq!(p.conflicts.len(), 1);
        assert_eq!(p.conflicts[0].device_id, "hvac");
        assert_eq!(p.uncontested.len(), 1);
        assert_eq!(p.merged.len(), 1);
        assert!(detect_conflicts(&[]).is_empty());
    }

    #[test]
    fn safety_wins_at_l1() {
        let g = group(vec![
            d(AgentRole::Climate, "hvac", "set_cooling"),
            d(AgentRole::Safety, "hvac", "power_off"),
        ]);
        let r = resolve(
            &g,
            &priorities_from_sliders(SliderState::new(1.0, 1.0)),
            &AgentHistory::new(),
            None,
            0,
        );
        assert_eq!(r.resolution_level, ResolutionLevel::L1);
        assert_eq!(r.winner, SAFETY_AGENT_ID);
        assert_eq!(r.winning_decision().action, "power_off");
    }

    #[test]
    fn worked_l3_example() {
        let mut h = AgentHistory::new();
        with_history(&mut h, AgentRole::Energy, 10, 9, 2);
        with_history(&mut h, AgentRole::Climate, 10, 7, 0);
        let s_e = historical_score(&h.stats("energy-agent-001"), 0.6).unwrap();
        let s_c = historical_score(&h.stats("climate-agent-001"), 0.5).unwrap();
        assert!((s_e - 0.726).abs() < 1e-9);
        assert!((s_c - 0.62).abs() < 1e-9);
        let g = group(vec![
            d(AgentRole::Climate, "hvac", "set_cooling"),
            d(AgentRole::Energy, "hvac", "power_off"),
        ]);
        let r = resolve(&g, &priorities_from_sliders(SliderState::default()), &h, None, 0);
        assert_eq!(
            (r.resolution_level, r.winner.as_str()),
            (ResolutionLevel::L3, "energy-agent-001")
        );
    }

    #[test]
    fn cold_start_falls_to_priority() {
        let g = group(vec![
            d(AgentRole::Privacy, "cam", "off"),
            d(AgentRole::Security, "cam", "on"),
        ]);
        let r = resolve(
            &g,
            &priorities_from_sliders(SliderState::default()),
            &AgentHistory::new(),
            None,
            0,
        );
        assert_eq!(
            (r.resolution_level, r.winner.as_str()),
            (ResolutionLevel::L4, "security-agent-001")
        );
    }

    #[test]
    fn sliders_flip_l4() {
        let g = group(vec![d(AgentRole::Privacy, "x", "a"), d(AgentRole::Energy, "x", "b")]);
        let r = resolve(
            &g,
            &priorities_from_sliders(SliderState::new(0.5, 1.0)),
            &AgentHistory::new(),
            None,
            0,
        );
        assert_eq!(r.winner, "energy-agent-001");
    }

    #[test]
    fn lexicographic_tie_break() {
        let mut p = PriorityMap::new();
        p.insert("b-agent".into(), 0.5);
        p.insert("a-agent".into(), 0.5);
        let mut x = d(AgentRole::Climate, "x", "a");
        x.agent_id = "b-agent".into();
        let mut y = d(AgentRole::Climate, "x", "b");
        y.agent_id = "a-agent".into();
        let r = resolve(&group(vec![x, y]), &p, &AgentHistory::new(), None, 0);
        assert_eq!(r.winner, "a-agent");
    }

    struct Fixed(Option<String>);
    impl Arbiter for Fixed {
        fn arbitrate(&self, _: &ConflictGroup, _: &PriorityMap) -> Option<String> {
            self.0.clone()
        }
    }

    #[test]
    fn arbiter_stage() {
        let g = group(vec![
            d(AgentRole::Privacy, "cam", "off"),
            d(AgentRole::Security, "cam", "on"),
        ]);
        let p = priorities_from_sliders(SliderState::default());
        let h = AgentHistory::new();
        let pick = Fixed(Some("privacy-agent-001".into()));
        let r = resolve(&g, &p, &h, Some(&pick), 0);
        assert_eq!(
            (r.resolution_level, r.winner.as_str()),
            (ResolutionLevel::L2, "privacy-agent-001")
        );
        for bad in [Fixed(None), Fixed(Some("climate-agent-001".into()))] {
            assert_eq!(resolve(&g, &p, &h, Some(&bad), 0).resolution_level, ResolutionLevel::L4);
        }
    }

    #[test]
    fn llm_arbiter_needs_exactly_one_name() {
        use crate::agents::llm::CannedTransport;
        use crate::agents::router::default_catalog;
        let g = group(vec![
            d(AgentRole::Privacy, "cam", "off"),
            d(AgentRole::Security, "cam", "on"),
        ]);
        let p = priorities_from_sliders(SliderState::default());
        let t = CannedTransport::replying(["privacy-agent-001", "security-agent-001 or privacy-agent-001"]);
        let arb = LlmArbiter {
            transport: &t,
            model: default_catalog().remove(0),
            system_prompt: "arbitrate".into(),
            context: "{}".into(),
        };
        assert_eq!(arb.arbitrate(&g, &p).as_deref(), Some("privacy-agent-001"));
        assert_eq!(arb.arbitrate(&g, &p), None);
        assert!(t.requests()[0].user_prompt.contains("\"cam\"") || t.requests()[0].user_prompt.contains("cam"));
    }

    #[test]
    fn record_outcome_counts() {
        let mut h = AgentHistory::new();
        let x = d(AgentRole::Energy, "x", "a");
        let s = h.record_outcome(&x, true, false);
        assert_eq!((s.r_accept(), s.r_conflict()), (Some(1.0), Some(0.0)));
        let mut h = AgentHistory::new();
        for i in 0..10 {
            h.record_outcome(&x, i < 8, i < 4);
        }
        let s = h.stats("energy-agent-001");
        assert_eq!((s.r_accept(), s.r_conflict()), (Some(0.8), Some(0.4)));
        assert_eq!(AgentStats::default().r_accept(), None);
    }
}
