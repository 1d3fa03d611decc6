//! Device types and the per-tick telemetry snapshot shared by the device
//! layer and the agents.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceType {
    Hvac,
    Lock,
    Camera,
    Light,
    PowerOutlet,
    SmokeDetector,
    Valve,
    MotionSensor,
    AirQuality,
    GasDetector,
    Thermostat,
    Generic,
}

impl DeviceType {
    pub const ALL: [DeviceType; 12] = [
        DeviceType::Hvac,
        DeviceType::Lock,
        DeviceType::Camera,
        DeviceType::Light,
        DeviceType::PowerOutlet,
        DeviceType::SmokeDetector,
        DeviceType::Valve,
        DeviceType::MotionSensor,
        DeviceType::AirQuality,
        DeviceType::GasDetector,
        DeviceType::Thermostat,
        DeviceType::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceType::Hvac => "hvac",
            DeviceType::Lock => "lock",
            DeviceType::Camera => "camera",
            DeviceType::Light => "light",
            DeviceType::PowerOutlet => "power_outlet",
            DeviceType::SmokeDetector => "smoke_detector",
            DeviceType::Valve => "valve",
            DeviceType::MotionSensor => "motion_sensor",
            DeviceType::AirQuality => "air_quality",
            DeviceType::GasDetector => "gas_detector",
            DeviceType::Thermostat => "thermostat",
            DeviceType::Generic => "generic",
        }
    }
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown device type {s:?}"))
    }
}

/// Numeric metrics tracked per device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TemperatureC,
    SmokeLevel,
    CoPpm,
    Co2Ppm,
    NgPpm,
    PowerW,
    BatteryPct,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::TemperatureC,
        Metric::SmokeLevel,
        Metric::CoPpm,
        Metric::Co2Ppm,
        Metric::NgPpm,
        Metric::PowerW,
        Metric::BatteryPct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TemperatureC => "temperature_c",
            Metric::SmokeLevel => "smoke_level",
            Metric::CoPpm => "co_ppm",
            Metric::Co2Ppm => "co2_ppm",
            Metric::NgPpm => "ng_ppm",
            Metric::PowerW => "power_w",
            Metric::BatteryPct => "battery_pct",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reading {
    pub device_id: String,
    pub room: String,
    pub device_type: Option<DeviceType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoke_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co_ppm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co2_ppm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ng_ppm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_pct: Option<f64>,
    #[serde(default)]
    pub error_flag: bool,
    /// Actuator state (power, mode, recording, alarm, valve ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub state: BTreeMap<String, String>,
    /// Set when a real-mode poll failed and the values are carried over.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stale: bool,
}

impl Reading {
    pub fn new(device_id: &str, room: &str, device_type: DeviceType) -> Self {
        Self {
            device_id: device_id.to_owned(),
            room: room.to_owned(),
            device_type: Some(device_type),
            ..Self::default()
        }
    }

    pub fn kind(&self) -> DeviceType {
        self.device_type.unwrap_or(DeviceType::Generic)
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::TemperatureC => self.temperature_c,
            Metric::SmokeLevel => self.smoke_level,
            Metric::CoPpm => self.co_ppm,
            Metric::Co2Ppm => self.co2_ppm,
            Metric::NgPpm => self.ng_ppm,
            Metric::PowerW => self.power_w,
            Metric::BatteryPct => self.battery_pct,
        }
    }

    pub fn metric_mut(&mut self, m: Metric) -> &mut Option<f64> {
        match m {
            Metric::TemperatureC => &mut self.temperature_c,
            Metric::SmokeLevel => &mut self.smoke_level,
            Metric::CoPpm => &mut self.co_ppm,
            Metric::Co2Ppm => &mut self.co2_ppm,
            Metric::NgPpm => &mut self.ng_ppm,
            Metric::PowerW => &mut self.power_w,
            Metric::BatteryPct => &mut self.battery_pct,
        }
    }

    pub fn state_is(&self, key: &str, value: &str) -> bool {
        self.state.get(key).is_some_and(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub cycle: u64,
    pub tick: u64,
    /// Minutes since local midnight.
    pub time_of_day_min: u32,
    pub readings: BTreeMap<String, Reading>,
}

impl TelemetrySnapshot {
    pub fn get(&self, device_id: &str) -> Option<&Reading> {
        self.readings.get(device_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Reading> {
        self.readings.values()
    }

    pub fn of_type(&self, t: DeviceType) -> impl Iterator<Item = &Reading> {
        self.readings.values().filter(move |r| r.kind() == t)
    }

    pub fn in_room<'a>(&'a self, room: &'a str) -> impl Iterator<Item = &'a Reading> {
        self.readings.values().filter(move |r| r.room == room)
    }

    /// Any motion anywhere in the home.
    pub fn occupied(&self) -> bool {
        self.readings.values().any(|r| r.motion == Some(true))
    }
}

/// Parses "HH:MM" into minutes since midnight.
pub fn parse_hhmm(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h < 24 && m < 60).then_some(h * 60 + m)
}

/// Whether `now` falls in the window [start, end), which may wrap midnight.
pub fn in_window(now: u32, start: u32, end: u32) -> bool {
    if start <= end {
        start <= now && now < end
    } else {
        now >= start || now < end
    }
}

/// Bounded per-(device, metric) sample history.
#[derive(Debug, Clone, Default)]
pub struct TelemetryHistory {
    capacity: usize,
    series: BTreeMap<(String, Metric), VecDeque<f64>>,
    types: BTreeMap<String, DeviceType>,
}

impl TelemetryHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            ..Self::default()
        }
    }

    pub fn push(&mut self, snap: &TelemetrySnapshot) {
        for r in snap.readings.values() {
            if r.stale {
                continue;
            }
            self.types.insert(r.device_id.clone(), r.kind());
            for m in Metric::ALL {
                if let Some(v) = r.metric(m) {
                    let s = self.series.entry((r.device_id.clone(), m)).or_default();
                    if s.len() == self.capacity {
                        s.pop_front();
                    }
                    s.push_back(v);
                }
            }
        }
    }

    pub fn series(&self) -> impl Iterator<Item = (&str, Metric, &VecDeque<f64>)> {
        self.series.iter().map(|((d, m), s)| (d.as_str(), *m, s))
    }

    pub fn device_type(&self, device_id: &str) -> DeviceType {
        self.types.get(device_id).copied().unwrap_or(DeviceType::Generic)
    }
}
