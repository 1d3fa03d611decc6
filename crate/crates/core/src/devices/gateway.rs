use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::safety::{apply_firmware, emergency_scan, firmware_fallback, Actuation, EmergencyEvent, Thresholds};
use super::{Device, DeviceError, FaultScenario, TelemetrySource};
use crate::ledger::Params;
use crate::telemetry::{DeviceType, TelemetrySnapshot};

/// The nine operations through which agents and clients reach devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    ListDevices,
    ListRooms,
    ReadTelemetry,
    GetDeviceState,
    SendCommand,
    DeviceCapabilities,
    EmergencyStatus,
    SubscribeEvents,
    GetHomeSummary,
}

impl Tool {
    pub const ALL: [Tool; 9] = [
        Tool::ListDevices,
        Tool::ListRooms,
        Tool::ReadTelemetry,
        Tool::GetDeviceState,
        Tool::SendCommand,
        Tool::DeviceCapabilities,
        Tool::EmergencyStatus,
        Tool::SubscribeEvents,
        Tool::GetHomeSummary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tool::ListDevices => "list_devices",
            Tool::ListRooms => "list_rooms",
            Tool::ReadTelemetry => "read_telemetry",
            Tool::GetDeviceState => "get_device_state",
            Tool::SendCommand => "send_command",
            Tool::DeviceCapabilities => "device_capabilities",
            Tool::EmergencyStatus => "emergency_status",
            Tool::SubscribeEvents => "subscribe_events",
            Tool::GetHomeSummary => "get_home_summary",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessEntry {
    pub seq: u64,
    pub tool: Tool,
    pub caller: String,
    pub device_id: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayEventKind {
    Command,
    Emergency,
    Firmware,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayEvent {
    pub seq: u64,
    pub cycle: u64,
    pub kind: GatewayEventKind,
    pub device_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencyStatus {
    /// True while the latest scan found a crossing.
    pub active: bool,
    pub latest: Vec<EmergencyEvent>,
    pub total_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeSummary {
    pub device_count: usize,
    pub rooms: Vec<String>,
    pub by_type: BTreeMap<DeviceType, usize>,
    pub active_faults: Vec<FaultScenario>,
    pub alarms_on: Vec<String>,
    pub accepts_faults: bool,
}

/// Result of one telemetry tick after the device-layer guards ran.
#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub snapshot: TelemetrySnapshot,
    pub emergencies: Vec<EmergencyEvent>,
    pub actuations: Vec<Actuation>,
}

pub struct Gateway {
    devices: BTreeMap<String, Device>,
    source: Box<dyn TelemetrySource>,
    faults: Vec<FaultScenario>,
    latest: Option<TelemetrySnapshot>,
    last_scan: Vec<EmergencyEvent>,
    emergency_total: usize,
    events: Vec<GatewayEvent>,
    access: Vec<AccessEntry>,
    cycle: u64,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("devices", &self.devices.len())
            .field("faults", &self.faults.len())
            .field("cycle", &self.cycle)
            .finish()
    }
}

impl Gateway {
    pub fn new(devices: Vec<Device>, source: Box<dyn TelemetrySource>) -> Self {
        Self {
            devices: devices.into_iter().map(|d| (d.device_id.clone(), d)).collect(),
            source,
            faults: Vec::new(),
            latest: None,
            last_scan: Vec::new(),
            emergency_total: 0,
            events: Vec::new(),
            access: Vec::new(),
            cycle: 0,
        }
    }

    fn log(&mut self, tool: Tool, caller: &str, device_id: Option<&str>, ok: bool) {
        let seq = self.access.len() as u64;
        self.access.push(AccessEntry {
            seq,
            tool,
            caller: caller.to_owned(),
            device_id: device_id.map(str::to_owned),
            ok,
        });
    }

    fn event(&mut self, kind: GatewayEventKind, device_id: Option<&str>, detail: String) {
        let seq = self.events.len() as u64;
        self.events.push(GatewayEvent {
            seq,
            cycle: self.cycle,
            kind,
            device_id: device_id.map(str::to_owned),
            detail,
        });
    }

    pub fn access_log(&self) -> &[AccessEntry] {
        &self.access
    }

    pub fn accepts_faults(&self) -> bool {
        self.source.accepts_faults()
    }

    pub fn faults(&self) -> &[FaultScenario] {
        &self.faults
    }

    /// Queues a fault; refused when the backing source ignores faults.
    pub fn inject_fault(&mut self, fault: FaultScenario) -> Result<(), String> {
        if !self.source.accepts_faults() {
            return Err("fault injection requires a simulated source".into());
        }
        self.event(
            GatewayEventKind::Fault,
            None,
            format!(
                "{} at cycle {} for {}",
                fault.kind, fault.start_cycle, fault.duration_cycles
            ),
        );
        self.faults.push(fault);
        Ok(())
    }

    /// Polls the source, runs the emergency scan and thermal fallback, applies
    /// their actuations, then stamps post-actuation device state onto the
    /// snapshot. Only the cycle owner calls this.
    pub fn collect(&mut self, cycle: u64, tick: u64, th: &Thresholds, timestamp_ms: i64) -> Collected {
        self.cycle = cycle;
        let mut snap = self.source.poll(cycle, tick, &self.faults);
        let (emergencies, mut actuations) = emergency_scan(&snap, th, timestamp_ms);
        let firmware = firmware_fallback(&snap, th);
        apply_firmware(&mut self.devices, &actuations);
        apply_firmware(&mut self.devices, &firmware);
        for e in &emergencies {
            self.event(
                GatewayEventKind::Emergency,
                Some(&e.device_id),
                format!("{} {} >= {} -> {}", e.metric, e.value, e.threshold, e.action),
            );
        }
        for a in &firmware {
            self.event(
                GatewayEventKind::Firmware,
                Some(&a.device_id),
                format!("{} ({})", a.action, a.reason),
            );
        }
        self.emergency_total += emergencies.len();
        self.last_scan = emergencies.clone();
        actuations.extend(firmware);
        self.stamp_state(&mut snap);
        self.latest = Some(snap.clone());
        Collected {
            snapshot: snap,
            emergencies,
            actuations,
        }
    }

    fn stamp_state(&self, snap: &mut TelemetrySnapshot) {
        for r in snap.readings.values_mut() {
            if let Some(d) = self.devices.get(&r.device_id) {
                r.state = d.state.clone();
                if d.device_type == DeviceType::Lock && r.lock_state.is_none() {
                    r.lock_state = d.state.get("lock").cloned();
                }
            }
        }
    }

    pub fn list_devices(&mut self, caller: &str) -> Vec<Device> {
        self.log(Tool::ListDevices, caller, None, true);
        self.devices.values().cloned().collect()
    }

    pub fn list_rooms(&mut self, caller: &str) -> Vec<String> {
        self.log(Tool::ListRooms, caller, None, true);
        let rooms: BTreeSet<_> = self.devices.values().map(|d| d.room.clone()).collect();
        rooms.into_iter().collect()
    }

    pub fn read_telemetry(&mut self, caller: &str) -> Option<TelemetrySnapshot> {
        self.log(Tool::ReadTelemetry, caller, None, true);
        self.latest.clone()
    }

    pub fn get_device_state(&mut self, caller: &str, device_id: &str) -> Result<BTreeMap<String, String>, DeviceError> {
        let found = self.devices.get(device_id).map(|d| d.state.clone());
        self.log(Tool::GetDeviceState, caller, Some(device_id), found.is_some());
        found.ok_or_else(|| DeviceError::UnknownDevice(device_id.to_owned()))
    }

    pub fn send_command(
        &mut self,
        caller: &str,
        device_id: &str,
        action: &str,
        params: &Params,
    ) -> Result<(), DeviceError> {
        let result = match self.devices.get_mut(device_id) {
            None => Err(DeviceError::UnknownDevice(device_id.to_owned())),
            Some(d) => d.apply(action, params),
        };
        self.log(Tool::SendCommand, caller, Some(device_id), result.is_ok());
        if result.is_ok() {
            self.event(
                GatewayEventKind::Command,
                Some(device_id),
                format!("{action} by {caller}"),
            );
        }
        result
    }

    pub fn device_capabilities(&mut self, caller: &str, device_id: &str) -> Result<Vec<String>, DeviceError> {
        let found = self.devices.get(device_id).map(|d| d.capabilities.clone());
        self.log(Tool::DeviceCapabilities, caller, Some(device_id), found.is_some());
        found.ok_or_else(|| DeviceError::UnknownDevice(device_id.to_owned()))
    }

    pub fn emergency_status(&mut self, caller: &str) -> EmergencyStatus {
        self.log(Tool::EmergencyStatus, caller, None, true);
        EmergencyStatus {
            active: !self.last_scan.is_empty(),
            latest: self.last_scan.clone(),
            total_events: self.emergency_total,
        }
    }

    /// Events with `seq >= from`.
    pub fn subscribe_events(&mut self, caller: &str, from: u64) -> Vec<GatewayEvent> {
        self.log(Tool::SubscribeEvents, caller, None, true);
        self.events.iter().skip(from as usize).cloned().collect()
    }

    pub fn get_home_summary(&mut self, caller: &str) -> HomeSummary {
        self.log(Tool::GetHomeSummary, caller, None, true);
        let mut by_type = BTreeMap::new();
        for d in self.devices.values() {
            *by_type.entry(d.device_type).or_insert(0) += 1;
        }
        let rooms: BTreeSet<_> = self.devices.values().map(|d| d.room.clone()).collect();
        HomeSummary {
            device_count: self.devices.len(),
            rooms: rooms.into_iter().collect(),
            by_type,
            active_faults: self
                .faults
                .iter()
                .filter(|f| f.active_at(self.cycle))
                .cloned()
                .collect(),
            alarms_on: self
                .devices
                .values()
                .filter(|d| d.state.get("alarm").is_some_and(|v| v == "on"))
                .map(|d| d.device_id.clone())
                .collect(),
            accepts_faults: self.source.accepts_faults(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devices::{build_sim_home, FaultKind, ReplaySource, SimSource};
    use crate::governance::GovernanceSnapshot;

    fn sim() -> Gateway {
        let home = build_sim_home(42);
        let src = SimSource::new(&home, 42);
        Gateway::new(home, Box::new(src))
    }

    #[test]
    fn tools_cover_the_home() {
        let mut g = sim();
        assert_eq!(g.list_devices("test").len(), 16);
        assert_eq!(g.list_rooms("test").len(), 4);
        g.send_command("test", "light-kitchen", "power_off", &Params::new())
            .unwrap();
        assert_eq!(g.get_device_state("test", "light-kitchen").unwrap()["power"], "off");
        assert!(matches!(
            g.send_command("test", "light-kitchen", "launch", &Params::new()),
            Err(DeviceError::UnsupportedAction { .. })
        ));
        assert!(matches!(
            g.device_capabilities("test", "nope"),
            Err(DeviceError::UnknownDevice(_))
        ));
        assert_eq!(g.subscribe_events("test", 0).len(), 1);
        assert_eq!(g.get_home_summary("test").device_count, 16);
        assert!(!g.emergency_status("test").active);
        assert!(g.read_telemetry("test").is_none());
        let tools: BTreeSet<_> = g.access_log().iter().map(|a| a.tool).collect();
        assert_eq!(tools.len(), 9);
        assert_eq!(Tool::ALL.len(), 9);
    }

    #[test]
    fn scan_actuates_before_the_snapshot_is_handed_out() {
        let mut g = sim();
        g.inject_fault(FaultScenario::new(FaultKind::Smoke, 1)).unwrap();
        let th = Thresholds::from_snapshot(&GovernanceSnapshot::defaults());
        let c = g.collect(1, 0, &th, 5);
        assert!(!c.emergencies.is_empty());
        assert!(c.snapshot.get("smoke-kitchen").unwrap().state_is("alarm", "on"));
        assert!(g.emergency_status("x").active);
        assert_eq!(g.get_home_summary("x").alarms_on, vec!["smoke-kitchen".to_string()]);
        let lock = c.snapshot.get("lock-front").unwrap();
        assert_eq!(lock.lock_state.as_deref(), Some("locked"));
    }

    #[test]
    fn replay_refuses_faults() {
        let mut g = Gateway::new(build_sim_home(1), Box::new(ReplaySource::new(Vec::new())));
        assert!(g.inject_fault(FaultScenario::new(FaultKind::Smoke, 1)).is_err());
        assert!(!g.get_home_summary("x").accepts_faults);
    }
}
