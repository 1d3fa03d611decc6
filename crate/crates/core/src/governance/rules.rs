//! Typed values and the twelve validation rules.

use std::collections::BTreeMap;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::roles::AgentRole;

/// A governance parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GovValue {
    Bool(bool),
    Number(f64),
    Text(String),
    List(Vec<String>),
    Map(BTreeMap<String, String>),
}

impl GovValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            GovValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            GovValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            GovValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            GovValue::List(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for GovValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

impl From<f64> for GovValue {
    fn from(v: f64) -> Self {
        GovValue::Number(v)
    }
}

impl From<&str> for GovValue {
    fn from(v: &str) -> Self {
        GovValue::Text(v.to_owned())
    }
}

impl From<bool> for GovValue {
    fn from(v: bool) -> Self {
        GovValue::Bool(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    R01,
    R02,
    R03,
    R04,
    R05,
    R06,
    R07,
    R08,
    R09,
    R10,
    R11,
    R12,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    NumericRange {
        min: f64,
        max: f64,
    },
    Choice {
        allowed: Vec<String>,
    },
    Boolean,
    StringPattern {
        pattern: String,
    },
    ListOfChoices {
        allowed: Vec<String>,
    },
    /// Map keyed by agent id; every value must be a device-scope pattern.
    StructuredMap {
        keys: Vec<String>,
        value_pattern: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRule {
    pub rule_id: RuleId,
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: RuleKind,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|s| (*s).to_owned()).collect()
}

pub const TIME_OF_DAY_PATTERN: &str = r"^([01][0-9]|2[0-3]):[0-5][0-9]$";
pub const DEVICE_SCOPE_PATTERN: &str = r"^(\*|[a-z0-9_-]+\*?)(,(\*|[a-z0-9_-]+\*?))*$";

pub const OPERATING_MODES: [&str; 9] = [
    "off",
    "manual",
    "scheduled",
    "adaptive",
    "assisted",
    "autonomous",
    "always",
    "when_away",
    "off_when_home",
];

pub const PROVIDERS: [&str; 4] = ["gemini", "claude", "gpt", "ollama"];

pub fn all_rules() -> Vec<ValidationRule> {
    use RuleKind::*;
    vec![
        ValidationRule {
            rule_id: RuleId::R01,
            name: "temperature_c",
            kind: NumericRange { min: 10.0, max: 32.0 },
        },
        ValidationRule {
            rule_id: RuleId::R02,
            name: "brightness_pct",
            kind: NumericRange { min: 0.0, max: 100.0 },
        },
        ValidationRule {
            rule_id: RuleId::R03,
            name: "slider_unit",
            kind: NumericRange { min: 0.0, max: 1.0 },
        },
        ValidationRule {
            rule_id: RuleId::R04,
            name: "budget_usd",
            kind: NumericRange { min: 0.0, max: 1000.0 },
        },
        ValidationRule {
            rule_id: RuleId::R05,
            name: "verbosity",
            kind: Choice {
                allowed: words(&["silent", "minimal", "normal", "verbose"]),
            },
        },
        ValidationRule {
            rule_id: RuleId::R06,
            name: "units",
            kind: Choice {
                allowed: words(&["metric", "imperial"]),
            },
        },
        ValidationRule {
            rule_id: RuleId::R07,
            name: "operating_mode",
            kind: Choice {
                allowed: words(&OPERATING_MODES),
            },
        },
        ValidationRule {
            rule_id: RuleId::R08,
            name: "notification_channel",
            kind: Choice {
                allowed: words(&["app", "email", "sms", "speaker"]),
            },
        },
        ValidationRule {
            rule_id: RuleId::R09,
            name: "time_of_day",
            kind: StringPattern {
                pattern: TIME_OF_DAY_PATTERN.to_owned(),
            },
        },
        ValidationRule {
            rule_id: RuleId::R10,
            name: "flag",
            kind: Boolean,
        },
        ValidationRule {
            rule_id: RuleId::R11,
            name: "providers",
            kind: ListOfChoices {
                allowed: words(&PROVIDERS),
            },
        },
        ValidationRule {
            rule_id: RuleId::R12,
            name: "agent_device_overrides",
            kind: StructuredMap {
                keys: AgentRole::ALL.iter().map(|r| r.agent_id().to_owned()).collect(),
                value_pattern: DEVICE_SCOPE_PATTERN.to_owned(),
            },
        },
    ]
}

pub fn rule(id: RuleId) -> ValidationRule {
    all_rules()
        .into_iter()
        .find(|r| r.rule_id == id)
        .expect("every RuleId has a rule")
}

fn matches(pattern: &str, s: &str) -> bool {
    Regex::new(pattern).map(|re| re.is_match(s)).unwrap_or(false)
}

pub fn validate(value: &GovValue, rule: &ValidationRule) -> bool {
    match (&rule.kind, value) {
        (RuleKind::NumericRange { min, max }, GovValue::Number(n)) => n.is_finite() && *min <= *n && *n <= *max,
        (RuleKind::Choice { allowed }, GovValue::Text(s)) => allowed.iter().any(|a| a == s),
        (RuleKind::Boolean, GovValue::Bool(_)) => true,
        (RuleKind::StringPattern { pattern }, GovValue::Text(s)) => matches(pattern, s),
        (RuleKind::ListOfChoices { allowed }, GovValue::List(items)) => {
            items.iter().all(|i| allowed.iter().any(|a| a == i))
        }
        (RuleKind::StructuredMap { keys, value_pattern }, GovValue::Map(m)) => m
            .iter()
            .all(|(k, v)| keys.iter().any(|a| a == k) && matches(value_pattern, v)),
        _ => false,
    }
}
