//! WebAssembly bindings for the static demo page.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. Failures come back as `{"error": "..."}`.

use std::collections::BTreeMap;

use hearth::agents::AgentDecision;
use hearth::arbitration::{historical_score, resolve, AgentHistory, AgentStats, ConflictGroup, MIN_HISTORY};
use hearth::bench::{difficulty_trace as trace, generate_workload, ConfigId};
use hearth::governance::{priorities_from_sliders, PriorityMap, SliderState};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

#[derive(Serialize)]
struct Surface {
    steps: u32,
    axis: Vec<f64>,
    /// `grid[i][j]` is the priority at comfort `axis[i]`, security `axis[j]`.
    agents: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Agent priorities over a `(steps + 1)²` grid of slider positions.
#[wasm_bindgen]
pub fn priority_surface(steps: u32) -> String {
    if steps == 0 || steps > 200 {
        return error("steps must be in 1..=200");
    }
    let axis: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let mut agents: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, c) in axis.iter().enumerate() {
        for s in &axis {
            for (id, p) in priorities_from_sliders(SliderState::new(*c, *s)) {
                let rows = agents.entry(id).or_insert_with(|| vec![Vec::new(); axis.len()]);
                rows[i].push(p);
            }
        }
    }
    serde_json::to_string(&Surface { steps, axis, agents }).unwrap()
}

/// Priorities at one slider position.
#[wasm_bindgen]
pub fn priorities_at(comfort_vs_energy: f64, security_vs_privacy: f64) -> String {
    serde_json::to_string(&priorities_from_sliders(SliderState::new(
        comfort_vs_energy,
        security_vs_privacy,
    )))
    .unwrap()
}

#[derive(Serialize)]
struct TracePoint {
    block: usize,
    phase: Option<String>,
    tx_count: usize,
    difficulty: u32,
}

/// Difficulty chosen for each block of a workload.
///
/// `workload` is either `{"seed": n}` for the synthetic four-phase workload
/// or `{"counts": [...]}` for explicit per-block transaction counts.
#[wasm_bindgen]
pub fn difficulty_trace(config: &str, workload: &str) -> String {
    let id: ConfigId = match config.parse() {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let w: Value = match serde_json::from_str(workload) {
        Ok(v) => v,
        Err(e) => return error(format!("workload: {e}")),
    };
    let blocks: Vec<(Option<String>, usize)> = if let Some(counts) = w.get("counts") {
        match serde_json::from_value::<Vec<usize>>(counts.clone()) {
            Ok(c) => c.into_iter().map(|n| (None, n)).collect(),
            Err(e) => return error(format!("counts: {e}")),
        }
    } else if let Some(seed) = w.get("seed").and_then(Value::as_u64) {
        generate_workload(seed)
            .into_iter()
            .map(|(p, n)| (Some(p.as_str().to_owned()), n))
            .collect()
    } else {
        return error("workload needs `seed` or `counts`");
    };
    let params = id.params();
    let counts: Vec<usize> = blocks.iter().map(|b| b.1).collect();
    let points: Vec<TracePoint> = trace(&params, &counts)
        .into_iter()
        .zip(blocks)
        .enumerate()
        .map(|(block, (difficulty, (phase, tx_count)))| TracePoint {
            block,
            phase,
            tx_count,
            difficulty,
        })
        .collect();
    json!({ "config": id.to_string(), "params": params, "blocks": points }).to_string()
}

#[derive(Deserialize)]
struct Competitor {
    agent_id: String,
    action: String,
    #[serde(default)]
    total: u64,
    #[serde(default)]
    accepted: u64,
    #[serde(default)]
    conflicts: u64,
}

#[derive(Deserialize)]
struct ArbitrateInput {
    #[serde(default = "default_device")]
    device_id: String,
    competitors: Vec<Competitor>,
    /// Explicit priorities; otherwise derived from `sliders`.
    #[serde(default)]
    priorities: Option<PriorityMap>,
    #[serde(default)]
    sliders: Option<SliderState>,
}

fn default_device() -> String {
    "hvac-living".to_owned()
}

/// Settles one conflict with the deterministic levels of the cascade.
///
/// Returns the conflict record plus each competitor's historical score
/// (null below the history threshold).
#[wasm_bindgen]
pub fn arbitrate(input: &str) -> String {
    let req: ArbitrateInput = match serde_json::from_str(input) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    if req.competitors.len() < 2 {
        return error("a conflict needs at least two competitors");
    }
    let mut seen = std::collections::BTreeSet::new();
    for c in &req.competitors {
        if !seen.insert(c.agent_id.as_str()) {
            return error(format!("duplicate competitor {}", c.agent_id));
        }
        if c.accepted > c.total || c.conflicts > c.total {
            return error(format!("{}: accepted and conflicts cannot exceed total", c.agent_id));
        }
    }
    let priorities = req
        .priorities
        .unwrap_or_else(|| priorities_from_sliders(req.sliders.unwrap_or_default()));
    let mut history = AgentHistory::new();
    let mut scores = BTreeMap::new();
    for c in &req.competitors {
        let stats = AgentStats {
            total_decisions: c.total,
            accepted_decisions: c.accepted,
            conflicts_involved: c.conflicts,
        };
        history.agents.insert(c.agent_id.clone(), stats);
        let p = priorities.get(&c.agent_id).copied().unwrap_or(0.0);
        let s = (c.total >= MIN_HISTORY).then(|| historical_score(&stats, p)).flatten();
        scores.insert(c.agent_id.clone(), s);
    }
    let group = ConflictGroup {
        device_id: req.device_id.clone(),
        decisions: req
            .competitors
            .iter()
            .map(|c| AgentDecision {
                agent_id: c.agent_id.clone(),
                device_id: req.device_id.clone(),
                action: c.action.clone(),
                params: Default::default(),
                confidence: 1.0,
                cycle: 0,
                rationale: String::new(),
            })
            .collect(),
    };
    let record = resolve(&group, &priorities, &history, None, 0);
    json!({ "record": record, "scores": scores, "priorities": priorities }).to_string()
}
