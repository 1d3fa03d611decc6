//! The 27 governance keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rules::{GovValue, RuleId};
use crate::roles::SAFETY_AGENT_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tier {
    Safe,
    Impactful,
    Advanced,
    Locked,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Safe, Tier::Impactful, Tier::Advanced, Tier::Locked];

    pub fn level(self) -> u8 {
        match self {
            Tier::Safe => 1,
            Tier::Impactful => 2,
            Tier::Advanced => 3,
            Tier::Locked => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Safe => "SAFE",
            Tier::Impactful => "IMPACTFUL",
            Tier::Advanced => "ADVANCED",
            Tier::Locked => "LOCKED",
        }
    }

    pub fn requires_confirmation(self) -> bool {
        matches!(self, Tier::Impactful | Tier::Advanced)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown tier {s:?}"))
    }
}

/// Static definition of one key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeySpec {
    pub name: &'static str,
    pub tier: Tier,
    /// `None` only for LOCKED keys, which are never validated because never mutated.
    pub rule_id: Option<RuleId>,
    pub default: GovValue,
}

pub mod names {
    pub const TARGET_TEMPERATURE_C: &str = "target_temperature_c";
    pub const LIGHTING_BRIGHTNESS_PCT: &str = "lighting_brightness_pct";
    pub const QUIET_HOURS_START: &str = "quiet_hours_start";
    pub const QUIET_HOURS_END: &str = "quiet_hours_end";
    pub const VOICE_FEEDBACK_ENABLED: &str = "voice_feedback_enabled";
    pub const ALERT_VERBOSITY: &str = "alert_verbosity";
    pub const DISPLAY_UNITS: &str = "display_units";
    pub const NOTIFICATION_CHANNEL: &str = "notification_channel";

    pub const COMFORT_VS_ENERGY: &str = "comfort_vs_energy";
    pub const SECURITY_VS_PRIVACY: &str = "security_vs_privacy";
    pub const AUTOMATION_LEVEL: &str = "automation_level";
    pub const AWAY_MODE_POLICY: &str = "away_mode_policy";
    pub const CAMERA_RECORDING_POLICY: &str = "camera_recording_policy";
    pub const HVAC_SCHEDULE_MODE: &str = "hvac_schedule_mode";
    pub const GUEST_ACCESS_ENABLED: &str = "guest_access_enabled";

    pub const PER_AGENT_DEVICE_OVERRIDES: &str = "per_agent_device_overrides";
    pub const API_BUDGET_CAP_USD: &str = "api_budget_cap_usd";
    pub const ALLOWED_PROVIDERS: &str = "allowed_providers";

    pub const SMOKE_THRESHOLD: &str = "smoke_threshold";
    pub const CO_THRESHOLD_PPM: &str = "co_threshold_ppm";
    pub const CO2_THRESHOLD_PPM: &str = "co2_threshold_ppm";
    pub const NG_THRESHOLD_PPM: &str = "ng_threshold_ppm";
    pub const TEMP_FALLBACK_HIGH_C: &str = "temp_fallback_high_c";
    pub const TEMP_FALLBACK_LOW_C: &str = "temp_fallback_low_c";
    pub const SAFETY_AGENT_MIN_MODEL_TIER: &str = "safety_agent_min_model_tier";
    pub const SIGNATURE_SCHEME: &str = "signature_scheme";
    pub const SAFETY_OVERRIDE_AUTHORITY: &str = "safety_override_authority";
}

pub fn key_specs() -> Vec<KeySpec> {
    use names::*;
    use GovValue::*;
    use Tier::*;
    let k = |name, tier, rule_id, default| KeySpec {
        name,
        tier,
        rule_id,
        default,
    };
    let text = |s: &str| Text(s.to_owned());
    vec![
        k(TARGET_TEMPERATURE_C, Safe, Some(RuleId::R01), Number(22.0)),
        k(LIGHTING_BRIGHTNESS_PCT, Safe, Some(RuleId::R02), Number(80.0)),
        k(QUIET_HOURS_START, Safe, Some(RuleId::R09), text("22:00")),
        k(QUIET_HOURS_END, Safe, Some(RuleId::R09), text("07:00")),
        k(VOICE_FEEDBACK_ENABLED, Safe, Some(RuleId::R10), Bool(true)),
        k(ALERT_VERBOSITY, Safe, Some(RuleId::R05), text("normal")),
        k(DISPLAY_UNITS, Safe, Some(RuleId::R06), text("metric")),
        k(NOTIFICATION_CHANNEL, Safe, Some(RuleId::R08), text("app")),
        k(COMFORT_VS_ENERGY, Impactful, Some(RuleId::R03), Number(0.5)),
        k(SECURITY_VS_PRIVACY, Impactful, Some(RuleId::R03), Number(0.5)),
        k(AUTOMATION_LEVEL, Impactful, Some(RuleId::R07), text("assisted")),
        k(AWAY_MODE_POLICY, Impactful, Some(RuleId::R07), text("off")),
        k(
            CAMERA_RECORDING_POLICY,
            Impactful,
            Some(RuleId::R07),
            text("off_when_home"),
        ),
        k(HVAC_SCHEDULE_MODE, Impactful, Some(RuleId::R07), text("adaptive")),
        k(GUEST_ACCESS_ENABLED, Impactful, Some(RuleId::R10), Bool(false)),
        k(
            PER_AGENT_DEVICE_OVERRIDES,
            Advanced,
            Some(RuleId::R12),
            Map(BTreeMap::new()),
        ),
        k(API_BUDGET_CAP_USD, Advanced, Some(RuleId::R04), Number(50.0)),
        k(
            ALLOWED_PROVIDERS,
            Advanced,
            Some(RuleId::R11),
            List(["gemini", "claude", "gpt", "ollama"].map(String::from).to_vec()),
        ),
        k(SMOKE_THRESHOLD, Locked, None, Number(0.3)),
        k(CO_THRESHOLD_PPM, Locked, None, Number(50.0)),
        k(CO2_THRESHOLD_PPM, Locked, None, Number(5000.0)),
        k(NG_THRESHOLD_PPM, Locked, None, Number(1000.0)),
        k(TEMP_FALLBACK_HIGH_C, Locked, None, Number(30.0)),
        k(TEMP_FALLBACK_LOW_C, Locked, None, Number(16.0)),
        k(SAFETY_AGENT_MIN_MODEL_TIER, Locked, None, text("pro")),
        k(SIGNATURE_SCHEME, Locked, None, text("ed25519")),
        k(SAFETY_OVERRIDE_AUTHORITY, Locked, None, text(SAFETY_AGENT_ID)),
    ]
}
