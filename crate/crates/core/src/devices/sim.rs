use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Device, FaultKind, FaultScenario};
use crate::telemetry::{DeviceType, Reading, TelemetrySnapshot};

pub const SIM_ROOMS: [&str; 4] = ["living_room", "kitchen", "bedroom", "hallway"];

/// Simulated clock starts at 08:00 and advances 10 s per telemetry tick.
pub const SIM_START_MIN: u32 = 8 * 60;
pub const TICK_SECONDS: u64 = 10;

pub fn time_of_day(tick: u64) -> u32 {
    ((SIM_START_MIN as u64 + tick * TICK_SECONDS / 60) % (24 * 60)) as u32
}

/// The 16-device, 4-room layout. The layout is fixed; `seed` only drives
/// telemetry, so equal seeds give equal homes.
pub fn build_sim_home(_seed: u64) -> Vec<Device> {
    let mut devices = Vec::with_capacity(16);
    for room in SIM_ROOMS {
        devices.push(Device::new(&format!("hvac-{room}"), room, DeviceType::Hvac));
        devices.push(Device::new(&format!("light-{room}"), room, DeviceType::Light));
    }
    devices.extend([
        Device::new("smoke-kitchen", "kitchen", DeviceType::SmokeDetector),
        Device::new("gas-kitchen", "kitchen", DeviceType::GasDetector),
        Device::new("valve-gas-main", "kitchen", DeviceType::Valve),
        Device::new("outlet-kitchen", "kitchen", DeviceType::PowerOutlet),
        Device::new("airq-bedroom", "bedroom", DeviceType::AirQuality),
        Device::new("lock-front", "hallway", DeviceType::Lock),
        Device::new("camera-hallway", "hallway", DeviceType::Camera),
        Device::new("motion-hallway", "hallway", DeviceType::MotionSensor),
    ]);
    devices
}

/// Anything that can produce one telemetry tick.
pub trait TelemetrySource: Send {
    fn poll(&mut self, cycle: u64, tick: u64, faults: &[FaultScenario]) -> TelemetrySnapshot;

    /// Whether injected faults have any effect on this source.
    fn accepts_faults(&self) -> bool;
}

fn has_battery(t: DeviceType) -> bool {
    matches!(
        t,
        DeviceType::SmokeDetector | DeviceType::GasDetector | DeviceType::Lock | DeviceType::MotionSensor
    )
}

/// Calm-band telemetry with fault overrides. Every tick consumes the same
/// random draws whatever the faults, so fault schedules never shift the
/// nominal stream.
pub struct SimSource {
    layout: Vec<(String, String, DeviceType)>,
    rng: ChaCha8Rng,
    temps: BTreeMap<String, f64>,
    battery: BTreeMap<String, f64>,
}

impl SimSource {
    pub fn new(devices: &[Device], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layout: Vec<_> = devices
            .iter()
            .map(|d| (d.device_id.clone(), d.room.clone(), d.device_type))
            .collect();
        layout.sort();
        let mut temps = BTreeMap::new();
        let mut battery = BTreeMap::new();
        for (id, _, t) in &layout {
            if *t == DeviceType::Hvac {
                temps.insert(id.clone(), rng.random_range(21.0..23.0));
            }
            if has_battery(*t) {
                battery.insert(id.clone(), rng.random_range(60.0..100.0));
            }
        }
        Self {
            layout,
            rng,
            temps,
            battery,
        }
    }

    fn nominal(&mut self, id: &str, room: &str, t: DeviceType) -> Reading {
        let mut r = Reading::new(id, room, t);
        let rng = &mut self.rng;
        match t {
            DeviceType::Hvac => {
                let temp = self.temps.get_mut(id).expect("hvac has a temperature");
                let mut next = *temp + rng.random_range(-0.3..=0.3);
                if next > 24.0 {
                    next = 48.0 - next;
                } else if next < 20.0 {
                    next = 40.0 - next;
                }
                *temp = next;
                r.temperature_c = Some(next);
            }
            DeviceType::SmokeDetector => {
                r.smoke_level = Some(rng.random_range(0.0..0.05));
                r.co_ppm = Some(rng.random_range(0.0..10.0));
            }
            DeviceType::GasDetector => r.ng_ppm = Some(rng.random_range(0.0..50.0)),
            DeviceType::MotionSensor => r.motion = Some(rng.random_bool(0.3)),
            DeviceType::AirQuality => {
                r.co2_ppm = Some(rng.random_range(400.0..900.0));
                r.co_ppm = Some(rng.random_range(0.0..10.0));
            }
            DeviceType::PowerOutlet => r.power_w = Some(rng.random_range(100.0..1500.0)),
            _ => {}
        }
        if let Some(b) = self.battery.get_mut(id) {
            *b = (*b - 0.01).max(0.0);
            r.battery_pct = Some(*b);
        }
        r
    }
}

/// Overrides the metrics a fault of `kind` drives on one target.
pub(crate) fn apply_fault(kind: FaultKind, r: &mut Reading) {
    match kind {
        FaultKind::Smoke => {
            if r.smoke_level.is_some() {
                r.smoke_level = Some(0.6);
                r.co_ppm = Some(60.0);
            }
        }
        FaultKind::GasLeak => {
            if r.ng_ppm.is_some() {
                r.ng_ppm = Some(1500.0);
            }
        }
        FaultKind::TemperatureSpike => {
            if r.temperature_c.is_some() {
                r.temperature_c = Some(35.0);
            }
        }
        FaultKind::PowerSurge => {
            if r.power_w.is_some() {
                r.power_w = Some(4000.0);
                r.error_flag = true;
            }
        }
        FaultKind::Intrusion => {
            if r.kind() == DeviceType::Lock {
                r.lock_state = Some("forced".into());
            }
            if r.motion.is_some() {
                r.motion = Some(true);
            }
        }
        FaultKind::Motion => {
            if r.motion.is_some() {
                r.motion = Some(true);
            }
        }
        FaultKind::CascadingEmergency => {
            for k in [FaultKind::Smoke, FaultKind::GasLeak, FaultKind::PowerSurge] {
                apply_fault(k, r);
            }
        }
    }
}

impl TelemetrySource for SimSource {
    fn poll(&mut self, cycle: u64, tick: u64, faults: &[FaultScenario]) -> TelemetrySnapshot {
        let layout = self.layout.clone();
        let mut readings: BTreeMap<String, Reading> = layout
            .iter()
            .map(|(id, room, t)| (id.clone(), self.nominal(id, room, *t)))
            .collect();
        for f in faults.iter().filter(|f| f.active_at(cycle)) {
            for target in f.targets() {
                if let Some(r) = readings.get_mut(&target) {
                    apply_fault(f.kind, r);
                }
            }
        }
        TelemetrySnapshot {
            cycle,
            tick,
            time_of_day_min: time_of_day(tick),
            readings,
        }
    }

    fn accepts_faults(&self) -> bool {
        true
    }
}

/// Plays back recorded snapshots by tick; the stand-in for a real home.
pub struct ReplaySource {
    frames: Vec<TelemetrySnapshot>,
}

impl ReplaySource {
    pub fn new(frames: Vec<TelemetrySnapshot>) -> Self {
        Self { frames }
    }
}

impl TelemetrySource for ReplaySource {
    fn poll(&mut self, cycle: u64, tick: u64, _faults: &[FaultScenario]) -> TelemetrySnapshot {
        let mut snap = self
            .frames
            .iter()
            .find(|f| f.tick == tick)
            .cloned()
            .or_else(|| self.frames.last().cloned())
            .unwrap_or_default();
        snap.cycle = cycle;
        snap.tick = tick;
        snap
    }

    fn accepts_faults(&self) -> bool {
        false
    }
}
