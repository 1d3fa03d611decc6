//! The two trade-off sliders and the priority surfaces they drive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::roles::AgentRole;

/// agent_id → priority, always holding all ten agents.
pub type PriorityMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderState {
    pub comfort_vs_energy: f64,
    pub security_vs_privacy: f64,
}

impl Default for SliderState {
    fn default() -> Self {
        Self {
            comfort_vs_energy: 0.5,
            security_vs_privacy: 0.5,
        }
    }
}

fn clamp_unit(s: f64) -> f64 {
    if s.is_nan() {
        0.5
    } else {
        s.clamp(0.0, 1.0)
    }
}

impl SliderState {
    /// Clamps both inputs to [0, 1]; NaN falls back to the neutral 0.5.
    pub fn new(comfort_vs_energy: f64, security_vs_privacy: f64) -> Self {
        Self {
            comfort_vs_energy: clamp_unit(comfort_vs_energy),
            security_vs_privacy: clamp_unit(security_vs_privacy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slider {
    ComfortVsEnergy,
    SecurityVsPrivacy,
}

/// (slider, priority at s=0, priority at s=1) for the four adjustable roles.
pub fn slider_span(role: AgentRole) -> Option<(Slider, f64, f64)> {
    match role {
        AgentRole::Security => Some((Slider::SecurityVsPrivacy, 0.6, 1.0)),
        AgentRole::Privacy => Some((Slider::SecurityVsPrivacy, 0.9, 0.5)),
        AgentRole::Climate => Some((Slider::ComfortVsEnergy, 0.4, 0.6)),
        AgentRole::Energy => Some((Slider::ComfortVsEnergy, 0.7, 0.5)),
        _ => None,
    }
}

// Written as a two-sided blend so s = 0, 0.5 and 1 land exactly on the
// endpoint and baseline constants.
fn lerp(lo: f64, hi: f64, s: f64) -> f64 {
    let v = lo * (1.0 - s) + hi * s;
    v.clamp(lo.min(hi), lo.max(hi))
}

pub fn priority_of(role: AgentRole, sliders: SliderState) -> f64 {
    let s = SliderState::new(sliders.comfort_vs_energy, sliders.security_vs_privacy);
    match slider_span(role) {
        Some((Slider::ComfortVsEnergy, lo, hi)) => lerp(lo, hi, s.comfort_vs_energy),
        Some((Slider::SecurityVsPrivacy, lo, hi)) => lerp(lo, hi, s.security_vs_privacy),
        None => role.base_priority(),
    }
}

pub fn priorities_from_sliders(sliders: SliderState) -> PriorityMap {
    AgentRole::ALL
        .iter()
        .map(|r| (r.agent_id().to_owned(), priority_of(*r, sliders)))
        .collect()
}
