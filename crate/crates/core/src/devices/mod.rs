//! Devices, the simulated home, fault injection, firmware-level safety, the
//! nine-tool gateway and the real-mode HTTP adapter.

mod faults;
mod gateway;
#[cfg(feature = "http")]
pub mod http;
mod safety;
mod sim;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use faults::{threat_schedule, FaultKind, FaultScenario};
pub use gateway::{
    AccessEntry, Collected, EmergencyStatus, Gateway, GatewayEvent, GatewayEventKind, HomeSummary, Tool,
};
pub use safety::{apply_firmware, emergency_scan, firmware_fallback, Actuation, EmergencyEvent, Thresholds};
pub use sim::{build_sim_home, time_of_day, ReplaySource, SimSource, TelemetrySource, SIM_ROOMS};

use crate::ledger::{Params, Scalar};
use crate::telemetry::DeviceType;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error("device {device} does not support {action:?}")]
    UnsupportedAction { device: String, action: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub device_id: String,
    pub room: String,
    pub device_type: DeviceType,
    pub state: BTreeMap<String, String>,
    pub capabilities: Vec<String>,
}

/// Actions every device accepts.
const COMMON: [&str; 2] = ["raise_alert", "maintenance_alert"];

pub fn capabilities_for(t: DeviceType) -> Vec<String> {
    let own: &[&str] = match t {
        DeviceType::Hvac | DeviceType::Thermostat => &[
            "set_cooling",
            "set_heating",
            "set_temperature",
            "hold_setpoint",
            "power_on",
            "power_off",
        ],
        DeviceType::Light => &["power_on", "power_off", "set_brightness"],
        DeviceType::SmokeDetector | DeviceType::GasDetector => &["alarm_on", "alarm_off", "self_test"],
        DeviceType::Valve => &["valve_shutoff", "valve_open"],
        DeviceType::Lock => &["lock", "unlock"],
        DeviceType::Camera => &["enable_recording", "disable_recording"],
        DeviceType::AirQuality => &["ventilate", "alarm_on", "alarm_off"],
        DeviceType::PowerOutlet => &["curtail", "cut_power", "power_on", "power_off"],
        DeviceType::MotionSensor | DeviceType::Generic => &[],
    };
    own.iter().chain(COMMON.iter()).map(|s| (*s).to_owned()).collect()
}

fn initial_state(t: DeviceType) -> BTreeMap<String, String> {
    let pairs: &[(&str, &str)] = match t {
        DeviceType::Hvac | DeviceType::Thermostat => &[("power", "on"), ("mode", "auto"), ("setpoint", "22")],
        DeviceType::Light => &[("power", "on"), ("brightness", "80")],
        DeviceType::SmokeDetector | DeviceType::GasDetector | DeviceType::AirQuality => &[("alarm", "off")],
        DeviceType::Valve => &[("valve", "open")],
        DeviceType::Lock => &[("lock", "locked")],
        DeviceType::Camera => &[("recording", "on")],
        DeviceType::PowerOutlet => &[("power", "on")],
        DeviceType::MotionSensor | DeviceType::Generic => &[],
    };
    pairs.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect()
}

impl Device {
    pub fn new(device_id: &str, room: &str, device_type: DeviceType) -> Self {
        Self {
            device_id: device_id.to_owned(),
            room: room.to_owned(),
            device_type,
            state: initial_state(device_type),
            capabilities: capabilities_for(device_type),
        }
    }

    pub fn supports(&self, action: &str) -> bool {
        self.capabilities.iter().any(|c| c == action)
    }

    /// Applies a supported action to the device state.
    pub fn apply(&mut self, action: &str, params: &Params) -> Result<(), DeviceError> {
        if !self.supports(action) {
            return Err(DeviceError::UnsupportedAction {
                device: self.device_id.clone(),
                action: action.to_owned(),
            });
        }
        let value = |key: &str| params.get(key).map(Scalar::to_string);
        let mut set = |k: &str, v: String| {
            self.state.insert(k.to_owned(), v);
        };
        match action {
            "set_cooling" => set("mode", "cool".into()),
            "set_heating" => set("mode", "heat".into()),
            "hold_setpoint" => set("mode", "hold".into()),
            "set_temperature" => set("setpoint", value("value").unwrap_or_default()),
            "power_on" => set("power", "on".into()),
            "power_off" | "cut_power" => set("power", "off".into()),
            "set_brightness" => set("brightness", value("value").unwrap_or_default()),
            "alarm_on" => set("alarm", "on".into()),
            "alarm_off" => set("alarm", "off".into()),
            "self_test" => set("self_test", "passed".into()),
            "valve_shutoff" => set("valve", "closed".into()),
            "valve_open" => set("valve", "open".into()),
            "lock" => set("lock", "locked".into()),
            "unlock" => set("lock", "unlocked".into()),
            "enable_recording" => set("recording", "on".into()),
            "disable_recording" => set("recording", "off".into()),
            "ventilate" => set("ventilation", "on".into()),
            "curtail" => set("power_limit_w", value("limit_w").unwrap_or_else(|| "1500".into())),
            "raise_alert" => set("alert", "raised".into()),
            "maintenance_alert" => set("maintenance", "requested".into()),
            _ => {}
        }
        Ok(())
    }
}
