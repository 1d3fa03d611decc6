use serde::{Deserialize, Serialize};

use super::{isolation_forest_scores, lof_scores, zscores};
use crate::agents::AgentDecision;
use crate::ledger::Scalar;
use crate::roles::AgentRole;
use crate::telemetry::{DeviceType, Metric, TelemetryHistory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub z_threshold: f64,
    /// Isolation-forest score that counts as one vote.
    pub if_vote: f64,
    /// Isolation-forest score that is anomalous on its own.
    pub if_critical: f64,
    pub lof_threshold: f64,
    pub lof_k: usize,
    pub trees: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            z_threshold: 3.0,
            if_vote: 0.6,
            if_critical: 0.8,
            lof_threshold: 1.5,
            lof_k: 5,
            trees: 64,
            warmup: 20,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Votes {
    pub zscore: bool,
    pub if_score: f64,
    pub lof: bool,
}

pub fn consensus(v: &Votes, cfg: &EnsembleConfig) -> bool {
    let n = [v.zscore, v.if_score > cfg.if_vote, v.lof]
        .iter()
        .filter(|b| **b)
        .count();
    n >= 2 || v.if_score > cfg.if_critical
}

/// Scores the most recent sample of a series against the rest of it.
/// `None` until the series reaches the warm-up length.
pub fn score_latest(series: &[f64], cfg: &EnsembleConfig) -> Option<Votes> {
    if series.len() < cfg.warmup.max(cfg.lof_k + 1).max(8) {
        return None;
    }
    let last = series.len() - 1;
    let z = zscores(series).ok()?[last];
    let pts: Vec<Vec<f64>> = series.iter().map(|x| vec![*x]).collect();
    let iso = isolation_forest_scores(&pts, cfg.trees, cfg.seed).ok()?[last];
    let lof = lof_scores(&pts, cfg.lof_k).ok()?[last];
    Some(Votes {
        zscore: z > cfg.z_threshold,
        if_score: iso,
        lof: lof > cfg.lof_threshold,
    })
}

/// Corrective action per device type; anything else raises an alert.
pub fn corrective_action(t: DeviceType) -> &'static str {
    match t {
        DeviceType::Hvac => "hold_setpoint",
        DeviceType::Lock => "lock",
        DeviceType::Camera => "enable_recording",
        DeviceType::Light => "power_off",
        DeviceType::PowerOutlet => "cut_power",
        DeviceType::SmokeDetector => "self_test",
        DeviceType::Valve => "valve_shutoff",
        _ => "raise_alert",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyFinding {
    pub device_id: String,
    pub metric: Metric,
    pub votes: Votes,
    pub decision: AgentDecision,
}

/// One finding per device at most: the first anomalous metric in metric order.
pub fn ensemble_anomaly(history: &TelemetryHistory, cfg: &EnsembleConfig, cycle: u64) -> Vec<AnomalyFinding> {
    let mut out: Vec<AnomalyFinding> = Vec::new();
    for (device, metric, series) in history.series() {
        if out.last().is_some_and(|f| f.device_id == device) {
            continue;
        }
        let series: Vec<f64> = series.iter().copied().collect();
        let Some(votes) = score_latest(&series, cfg) else {
            continue;
        };
        if !consensus(&votes, cfg) {
            continue;
        }
        let action = corrective_action(history.device_type(device));
        let mut params = crate::ledger::Params::new();
        params.insert("metric".into(), Scalar::from(metric.as_str()));
        params.insert("value".into(), Scalar::Real(series[series.len() - 1]));
        let confidence = votes.if_score.clamp(0.5, 1.0);
        out.push(AnomalyFinding {
            device_id: device.to_owned(),
            metric,
            votes,
            decision: AgentDecision {
                agent_id: AgentRole::Anomaly.agent_id().to_owned(),
                device_id: device.to_owned(),
                action: action.to_owned(),
                params,
                confidence,
                cycle,
                rationale: format!(
                    "{metric} outlier (z={}, iforest={:.3}, lof={})",
                    votes.zscore, votes.if_score, votes.lof
                ),
            },
        });
    }
    out
}
