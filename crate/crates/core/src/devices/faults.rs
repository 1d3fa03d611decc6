use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Smoke,
    GasLeak,
    Intrusion,
    TemperatureSpike,
    Motion,
    PowerSurge,
    CascadingEmergency,
}

impl FaultKind {
    pub const ALL: [FaultKind; 7] = [
        FaultKind::Smoke,
        FaultKind::GasLeak,
        FaultKind::Intrusion,
        FaultKind::TemperatureSpike,
        FaultKind::Motion,
        FaultKind::PowerSurge,
        FaultKind::CascadingEmergency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::Smoke => "smoke",
            FaultKind::GasLeak => "gas_leak",
            FaultKind::Intrusion => "intrusion",
            FaultKind::TemperatureSpike => "temperature_spike",
            FaultKind::Motion => "motion",
            FaultKind::PowerSurge => "power_surge",
            FaultKind::CascadingEmergency => "cascading_emergency",
        }
    }

    /// Devices a fault of this kind targets in the simulated home.
    pub fn default_targets(self) -> Vec<String> {
        let t: &[&str] = match self {
            FaultKind::Smoke => &["smoke-kitchen"],
            FaultKind::GasLeak => &["gas-kitchen"],
            FaultKind::Intrusion => &["lock-front", "motion-hallway"],
            FaultKind::TemperatureSpike => &["hvac-living_room"],
            FaultKind::Motion => &["motion-hallway"],
            FaultKind::PowerSurge => &["outlet-kitchen"],
            FaultKind::CascadingEmergency => &["smoke-kitchen", "gas-kitchen", "outlet-kitchen"],
        };
        t.iter().map(|s| (*s).to_owned()).collect()
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = if s == "cascading" { "cascading_emergency" } else { s };
        FaultKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown fault kind {s:?}"))
    }
}

fn default_duration() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub kind: FaultKind,
    /// 1-based agent cycle.
    pub start_cycle: u64,
    #[serde(default = "default_duration")]
    pub duration_cycles: u64,
    #[serde(default)]
    pub targets: Vec<String>,
}

impl FaultScenario {
    pub fn new(kind: FaultKind, start_cycle: u64) -> Self {
        Self {
            kind,
            start_cycle,
            duration_cycles: default_duration(),
            targets: kind.default_targets(),
        }
    }

    pub fn active_at(&self, cycle: u64) -> bool {
        self.start_cycle <= cycle && cycle < self.start_cycle + self.duration_cycles
    }

    pub fn targets(&self) -> Vec<String> {
        if self.targets.is_empty() {
            self.kind.default_targets()
        } else {
            self.targets.clone()
        }
    }
}

/// The seven faults at odd cycles 11..=23, two cycles each.
pub fn threat_schedule() -> Vec<FaultScenario> {
    FaultKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| FaultScenario::new(*k, 11 + 2 * i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let s = threat_schedule();
        assert_eq!(s.len(), 7);
        assert_eq!(s[0].start_cycle, 11);
        assert_eq!(s[6].start_cycle, 23);
        assert!(s.iter().all(|f| f.duration_cycles == 2));
        assert!(s[0].active_at(12) && !s[0].active_at(13) && !s[0].active_at(10));
    }

    #[test]
    fn parse_names() {
        assert_eq!("cascading".parse::<FaultKind>().unwrap(), FaultKind::CascadingEmergency);
        assert_eq!("gas_leak".parse::<FaultKind>().unwrap(), FaultKind::GasLeak);
        assert!("meteor".parse::<FaultKind>().is_err());
    }
}
