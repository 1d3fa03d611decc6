use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Device;
use crate::governance::{names, GovernanceSnapshot};
use crate::ledger::{Params, Scalar};
use crate::telemetry::{DeviceType, Metric, TelemetrySnapshot};

/// Scanner and fallback limits, always taken from the LOCKED governance keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub smoke: f64,
    pub co_ppm: f64,
    pub co2_ppm: f64,
    pub ng_ppm: f64,
    pub temp_high_c: f64,
    pub temp_low_c: f64,
}

impl Thresholds {
    pub fn from_snapshot(g: &GovernanceSnapshot) -> Self {
        Self {
            smoke: g.number(names::SMOKE_THRESHOLD),
            co_ppm: g.number(names::CO_THRESHOLD_PPM),
            co2_ppm: g.number(names::CO2_THRESHOLD_PPM),
            ng_ppm: g.number(names::NG_THRESHOLD_PPM),
            temp_high_c: g.number(names::TEMP_FALLBACK_HIGH_C),
            temp_low_c: g.number(names::TEMP_FALLBACK_LOW_C),
        }
    }

    fn scanned(&self) -> [(Metric, f64); 4] {
        [
            (Metric::SmokeLevel, self.smoke),
            (Metric::CoPpm, self.co_ppm),
            (Metric::Co2Ppm, self.co2_ppm),
            (Metric::NgPpm, self.ng_ppm),
        ]
    }
}

/// A device-layer command issued without agent involvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub device_id: String,
    pub action: String,
    pub params: Params,
    pub reason: String,
}

impl Actuation {
    fn new(device_id: &str, action: &str, cause: &str, reason: String) -> Self {
        let mut params = Params::new();
        params.insert("cause".into(), Scalar::Text(cause.into()));
        Self {
            device_id: device_id.to_owned(),
            action: action.to_owned(),
            params,
            reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencyEvent {
    pub cycle: u64,
    pub device_id: String,
    pub metric: Metric,
    pub value: f64,
    pub threshold: f64,
    pub action: String,
    /// Devices the action was applied to.
    pub actuated: Vec<String>,
    pub timestamp_ms: i64,
    pub bypass: bool,
}

/// One event per (device, metric) at or above its locked threshold.
pub fn emergency_scan(
    snap: &TelemetrySnapshot,
    th: &Thresholds,
    timestamp_ms: i64,
) -> (Vec<EmergencyEvent>, Vec<Actuation>) {
    let valves: Vec<String> = snap.of_type(DeviceType::Valve).map(|r| r.device_id.clone()).collect();
    let mut events = Vec::new();
    let mut acts: Vec<Actuation> = Vec::new();
    for r in snap.iter() {
        for (metric, limit) in th.scanned() {
            let Some(value) = r.metric(metric).filter(|v| *v >= limit) else {
                continue;
            };
            let (action, targets) = if metric == Metric::NgPpm {
                ("valve_shutoff", valves.clone())
            } else {
                ("alarm_on", vec![r.device_id.clone()])
            };
            for t in &targets {
                if !acts.iter().any(|a| &a.device_id == t && a.action == action) {
                    let reason = format!("{} {metric} {value} >= {limit}", r.device_id);
                    acts.push(Actuation::new(t, action, metric.as_str(), reason));
                }
            }
            events.push(EmergencyEvent {
                cycle: snap.cycle,
                device_id: r.device_id.clone(),
                metric,
                value,
                threshold: limit,
                action: action.to_owned(),
                actuated: targets,
                timestamp_ms,
                bypass: true,
            });
        }
    }
    (events, acts)
}

/// Thermal guard per hvac zone; independent of any agent backend.
pub fn firmware_fallback(snap: &TelemetrySnapshot, th: &Thresholds) -> Vec<Actuation> {
    let mut out = Vec::new();
    for r in snap
        .iter()
        .filter(|r| matches!(r.kind(), DeviceType::Hvac | DeviceType::Thermostat))
    {
        let Some(t) = r.temperature_c else { continue };
        if t > th.temp_high_c {
            out.push(Actuation::new(
                &r.device_id,
                "set_cooling",
                "firmware",
                format!("{t} > {}", th.temp_high_c),
            ));
        } else if t < th.temp_low_c {
            out.push(Actuation::new(
                &r.device_id,
                "set_heating",
                "firmware",
                format!("{t} < {}", th.temp_low_c),
            ));
        }
    }
    out
}

/// Applies actuations to device state. Unknown devices and unsupported
/// actions are skipped; returns the count applied.
pub fn apply_firmware(devices: &mut BTreeMap<String, Device>, acts: &[Actuation]) -> usize {
    acts.iter()
        .filter(|a| {
            devices
                .get_mut(&a.device_id)
                .is_some_and(|d| d.apply(&a.action, &a.params).is_ok())
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{build_sim_home, FaultKind, FaultScenario, SimSource, TelemetrySource};
    use crate::governance::GovValue;
    use crate::telemetry::Reading;

    fn snap_of(readings: Vec<Reading>) -> TelemetrySnapshot {
        TelemetrySnapshot {
            readings: readings.into_iter().map(|r| (r.device_id.clone(), r)).collect(),
            ..TelemetrySnapshot::default()
        }
    }

    fn defaults() -> Thresholds {
        Thresholds::from_snapshot(&GovernanceSnapshot::defaults())
    }

    fn co(v: f64) -> TelemetrySnapshot {
        let mut r = Reading::new("airq-bedroom", "bedroom", DeviceType::AirQuality);
        r.co_ppm = Some(v);
        snap_of(vec![r])
    }

    #[test]
    fn co_boundary() {
        let (ev, acts) = emergency_scan(&co(60.0), &defaults(), 0);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].bypass);
        assert_eq!(acts[0].action, "alarm_on");
        assert_eq!(emergency_scan(&co(50.0), &defaults(), 0).0.len(), 1);
        assert!(emergency_scan(&co(49.0), &defaults(), 0).0.is_empty());
    }

    #[test]
    fn thresholds_come_from_governance() {
        let mut g = GovernanceSnapshot::defaults();
        g.values.insert(names::CO_THRESHOLD_PPM.into(), GovValue::Number(70.0));
        let th = Thresholds::from_snapshot(&g);
        assert!(emergency_scan(&co(60.0), &th, 0).0.is_empty());
        assert_eq!(defaults().smoke, 0.3);
        assert_eq!(defaults().ng_ppm, 1000.0);
    }

    #[test]
    fn cascading_crosses_three_thresholds() {
        let home = build_sim_home(42);
        let mut src = SimSource::new(&home, 42);
        let faults = [FaultScenario::new(FaultKind::CascadingEmergency, 1)];
        let snap = src.poll(1, 0, &faults);
        // Independent recount of the override set against the defaults.
        let expected = snap
            .iter()
            .map(|r| {
                [
                    (r.smoke_level, 0.3),
                    (r.co_ppm, 50.0),
                    (r.co2_ppm, 5000.0),
                    (r.ng_ppm, 1000.0),
                ]
                .iter()
                .filter(|(v, th)| v.is_some_and(|v| v >= *th))
                .count()
            })
            .sum::<usize>();
        let (ev, acts) = emergency_scan(&snap, &defaults(), 0);
        assert!(ev.len() >= 3);
        assert_eq!(ev.len(), expected);
        assert!(acts
            .iter()
            .any(|a| a.action == "valve_shutoff" && a.device_id == "valve-gas-main"));
        assert!(acts
            .iter()
            .any(|a| a.action == "alarm_on" && a.device_id == "smoke-kitchen"));

        let mut devices: BTreeMap<_, _> = home.into_iter().map(|d| (d.device_id.clone(), d)).collect();
        assert_eq!(apply_firmware(&mut devices, &acts), acts.len());
        assert_eq!(devices["valve-gas-main"].state["valve"], "closed");
        assert_eq!(devices["smoke-kitchen"].state["alarm"], "on");
    }

    #[test]
    fn thermal_fallback() {
        let hvac = |t: f64| {
            let mut r = Reading::new("hvac-kitchen", "kitchen", DeviceType::Hvac);
            r.temperature_c = Some(t);
            snap_of(vec![r])
        };
        let th = defaults();
        assert_eq!(firmware_fallback(&hvac(31.0), &th)[0].action, "set_cooling");
        assert_eq!(firmware_fallback(&hvac(15.0), &th)[0].action, "set_heating");
        assert!(firmware_fallback(&hvac(22.0), &th).is_empty());
        assert!(firmware_fallback(&hvac(30.0), &th).is_empty());
        assert!(firmware_fallback(&hvac(16.0), &th).is_empty());
    }
}
