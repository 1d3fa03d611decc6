//! Deterministic rule tables, one per domain role.

use std::collections::BTreeMap;

use super::anomaly::{ensemble_anomaly, EnsembleConfig};
use super::{AgentContext, AgentDecision};
use crate::governance::names;
use crate::ledger::{Params, Scalar};
use crate::roles::AgentRole;
use crate::telemetry::{in_window, parse_hhmm, DeviceType};

pub const CLIMATE_BAND_C: f64 = 2.0;
pub const ENERGY_LIMIT_W: f64 = 2000.0;
pub const CO2_VENTILATE_PPM: f64 = 1500.0;
pub const CO2_ELEVATED_PPM: f64 = 850.0;
pub const LOW_BATTERY_PCT: f64 = 15.0;

/// Collects at most one decision per device for a single agent.
struct Out {
    role: AgentRole,
    cycle: u64,
    by_device: BTreeMap<String, AgentDecision>,
}

impl Out {
    fn new(role: AgentRole, cycle: u64) -> Self {
        Self {
            role,
            cycle,
            by_device: BTreeMap::new(),
        }
    }

    fn push(&mut self, device: &str, action: &str, params: &[(&str, Scalar)], confidence: f64, rationale: String) {
        self.by_device
            .entry(device.to_owned())
            .or_insert_with(|| AgentDecision {
                agent_id: self.role.agent_id().to_owned(),
                device_id: device.to_owned(),
                action: action.to_owned(),
                params: params
                    .iter()
                    .map(|(k, v)| ((*k).to_owned(), v.clone()))
                    .collect::<Params>(),
                confidence,
                cycle: self.cycle,
                rationale,
            });
    }

    fn finish(self) -> Vec<AgentDecision> {
        self.by_device.into_values().collect()
    }
}

pub fn evaluate_rules(role: AgentRole, ctx: AgentContext<'_>, anomaly: &EnsembleConfig) -> Vec<AgentDecision> {
    let cycle = ctx.telemetry.cycle;
    match role {
        AgentRole::Safety => safety(ctx),
        AgentRole::Health => health(ctx),
        AgentRole::Security => security(ctx),
        AgentRole::Privacy => privacy(ctx),
        AgentRole::Energy => energy(ctx),
        AgentRole::Climate => climate(ctx),
        AgentRole::Maintenance => maintenance(ctx),
        AgentRole::Anomaly => ensemble_anomaly(ctx.history, anomaly, cycle)
            .into_iter()
            .map(|f| f.decision)
            .collect(),
        AgentRole::Arbitration | AgentRole::Nlu => Vec::new(),
    }
}

fn safety(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let g = ctx.constraints;
    let t = ctx.telemetry;
    let mut out = Out::new(AgentRole::Safety, t.cycle);
    let thresholds = [
        ("smoke", g.number(names::SMOKE_THRESHOLD)),
        ("co", g.number(names::CO_THRESHOLD_PPM)),
        ("co2", g.number(names::CO2_THRESHOLD_PPM)),
    ];
    let ng = g.number(names::NG_THRESHOLD_PPM);

    for r in t.iter() {
        if r.ng_ppm.is_some_and(|v| v >= ng) {
            for valve in t.of_type(DeviceType::Valve) {
                out.push(
                    &valve.device_id,
                    "valve_shutoff",
                    &[("cause", "ng".into())],
                    1.0,
                    format!("{} reads ng {} ppm", r.device_id, r.ng_ppm.unwrap_or_default()),
                );
            }
        }
    }
    for r in t.iter() {
        let values = [r.smoke_level, r.co_ppm, r.co2_ppm];
        let crossed = thresholds
            .iter()
            .zip(values)
            .find(|((_, th), v)| v.is_some_and(|v| v >= *th));
        if let Some(((cause, th), v)) = crossed {
            out.push(
                &r.device_id,
                "alarm_on",
                &[("cause", (*cause).into())],
                1.0,
                format!("{cause} {} at or above {th}", v.unwrap_or_default()),
            );
            if *cause == "smoke" {
                for outlet in t.in_room(&r.room).filter(|d| d.kind() == DeviceType::PowerOutlet) {
                    out.push(
                        &outlet.device_id,
                        "cut_power",
                        &[("cause", "smoke".into())],
                        1.0,
                        format!("smoke in {}", r.room),
                    );
                }
            }
        }
    }
    out.finish()
}

fn health(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let mut out = Out::new(AgentRole::Health, ctx.telemetry.cycle);
    for r in ctx.telemetry.iter() {
        let Some(co2) = r.co2_ppm else { continue };
        let (conf, level) = if co2 > CO2_VENTILATE_PPM {
            (0.8, "high")
        } else if co2 > CO2_ELEVATED_PPM {
            (0.6, "elevated")
        } else {
            continue;
        };
        out.push(
            &r.device_id,
            "ventilate",
            &[("level", level.into())],
            conf,
            format!("co2 {co2:.0} ppm"),
        );
    }
    out.finish()
}

fn security(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let t = ctx.telemetry;
    let mut out = Out::new(AgentRole::Security, t.cycle);
    let forced = t.iter().find(|r| r.lock_state.as_deref() == Some("forced"));
    let away = ctx.constraints.text(names::AWAY_MODE_POLICY) == "always";
    let cause = match (forced, away && t.occupied()) {
        (Some(r), _) => format!("{} forced", r.device_id),
        (None, true) => "motion while away".to_owned(),
        (None, false) => return Vec::new(),
    };
    for lock in t.of_type(DeviceType::Lock) {
        out.push(&lock.device_id, "lock", &[], 0.9, cause.clone());
    }
    for cam in t.of_type(DeviceType::Camera) {
        out.push(&cam.device_id, "enable_recording", &[], 0.9, cause.clone());
    }
    out.finish()
}

fn privacy(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let t = ctx.telemetry;
    let policy = ctx.constraints.text(names::CAMERA_RECORDING_POLICY);
    let fire = policy == "off" || (policy == "off_when_home" && t.occupied());
    if !fire {
        return Vec::new();
    }
    let mut out = Out::new(AgentRole::Privacy, t.cycle);
    for cam in t.of_type(DeviceType::Camera) {
        out.push(
            &cam.device_id,
            "disable_recording",
            &[],
            0.8,
            format!("occupied, camera policy {policy}"),
        );
    }
    out.finish()
}

fn energy(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let t = ctx.telemetry;
    let g = ctx.constraints;
    let quiet = match (
        parse_hhmm(g.text(names::QUIET_HOURS_START)),
        parse_hhmm(g.text(names::QUIET_HOURS_END)),
    ) {
        (Some(s), Some(e)) => in_window(t.time_of_day_min, s, e),
        _ => false,
    };
    if quiet {
        return Vec::new();
    }
    let mut out = Out::new(AgentRole::Energy, t.cycle);
    for r in t.iter() {
        if let Some(p) = r.power_w.filter(|p| *p > ENERGY_LIMIT_W) {
            out.push(
                &r.device_id,
                "curtail",
                &[("limit_w", Scalar::Int(1500))],
                0.7,
                format!("drawing {p:.0} W"),
            );
        }
    }
    out.finish()
}

fn climate(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let t = ctx.telemetry;
    let g = ctx.constraints;
    if g.text(names::HVAC_SCHEDULE_MODE) == "off" {
        return Vec::new();
    }
    let target = g.number(names::TARGET_TEMPERATURE_C);
    let mut out = Out::new(AgentRole::Climate, t.cycle);
    for r in t.of_type(DeviceType::Hvac) {
        let Some(temp) = r.temperature_c else { continue };
        let action = if temp - target > CLIMATE_BAND_C {
            "set_cooling"
        } else if target - temp > CLIMATE_BAND_C {
            "set_heating"
        } else {
            continue;
        };
        out.push(
            &r.device_id,
            action,
            &[("target_c", Scalar::Real(target))],
            0.9,
            format!("{temp:.1} C vs target {target}"),
        );
    }
    out.finish()
}

fn maintenance(ctx: AgentContext<'_>) -> Vec<AgentDecision> {
    let mut out = Out::new(AgentRole::Maintenance, ctx.telemetry.cycle);
    for r in ctx.telemetry.iter() {
        let reason = if r.error_flag {
            "error_flag"
        } else if r.battery_pct.is_some_and(|b| b < LOW_BATTERY_PCT) {
            "low_battery"
        } else {
            continue;
        };
        out.push(
            &r.device_id,
            "maintenance_alert",
            &[("reason", reason.into())],
            0.85,
            reason.to_owned(),
        );
    }
    out.finish()
}
