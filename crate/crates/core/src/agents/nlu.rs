//! A small deterministic command grammar:
//!
//! ```text
//! set <room|device> <attribute> to <value>
//! turn <on|off> <device | room device-word>
//! I prefer <comfort|energy|security|privacy> over <...> [anything]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::AgentDecision;
use crate::governance::names;
use crate::ledger::{Params, Scalar};
use crate::roles::AgentRole;
use crate::telemetry::{DeviceType, TelemetrySnapshot};

pub const NLU_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NluOutcome {
    Decision(AgentDecision),
    Preference { key: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NluError {
    #[error("unrecognized command {0:?}")]
    Unrecognized(String),
    #[error("no device or room matches {0:?}")]
    UnknownTarget(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("bad value {0:?}")]
    BadValue(String),
    #[error("cannot trade {0} against {1}")]
    UnpairedPreference(String, String),
}

fn normalize(text: &str) -> String {
    text.trim()
        .trim_end_matches(['.', '!', '?'])
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn type_word(w: &str) -> Option<DeviceType> {
    match w {
        "light" | "lights" | "lamp" => Some(DeviceType::Light),
        "thermostat" | "hvac" | "heating" | "ac" => Some(DeviceType::Hvac),
        "camera" => Some(DeviceType::Camera),
        "outlet" | "plug" => Some(DeviceType::PowerOutlet),
        "lock" | "door" => Some(DeviceType::Lock),
        _ => None,
    }
}

/// attribute → (device type, action)
fn attribute(words: &[&str]) -> Option<(DeviceType, &'static str)> {
    match words.join(" ").as_str() {
        "thermostat" | "temperature" | "heating" | "hvac" => Some((DeviceType::Hvac, "set_temperature")),
        "brightness" | "light" | "lights" | "light brightness" => Some((DeviceType::Light, "set_brightness")),
        _ => None,
    }
}

/// Splits `words` into a target prefix (a device id, or the longest room
/// name) and the remaining words.
fn split_target<'a>(words: &'a [&'a str], catalog: &TelemetrySnapshot) -> Option<(Target, &'a [&'a str])> {
    let first = *words.first()?;
    if catalog.get(first).is_some() {
        return Some((Target::Device(first.to_owned()), &words[1..]));
    }
    (1..=words.len()).rev().find_map(|n| {
        let room = words[..n].join("_");
        catalog
            .iter()
            .any(|r| r.room == room)
            .then(|| (Target::Room(room), &words[n..]))
    })
}

enum Target {
    Device(String),
    Room(String),
}

fn resolve(target: Target, want: DeviceType, catalog: &TelemetrySnapshot, phrase: &str) -> Result<String, NluError> {
    match target {
        Target::Device(id) => {
            let r = catalog
                .get(&id)
                .ok_or_else(|| NluError::UnknownTarget(phrase.to_owned()))?;
            if r.kind() == want {
                Ok(id)
            } else {
                Err(NluError::UnknownTarget(phrase.to_owned()))
            }
        }
        Target::Room(room) => catalog
            .in_room(&room)
            .find(|r| r.kind() == want)
            .map(|r| r.device_id.clone())
            .ok_or_else(|| NluError::UnknownTarget(phrase.to_owned())),
    }
}

fn scalar(value: &str) -> Result<Scalar, NluError> {
    let v: f64 = value
        .trim_end_matches(['c', '%'])
        .trim()
        .parse()
        .map_err(|_| NluError::BadValue(value.to_owned()))?;
    if !v.is_finite() {
        return Err(NluError::BadValue(value.to_owned()));
    }
    Ok(if v.fract() == 0.0 && v.abs() < 1e15 {
        Scalar::Int(v as i64)
    } else {
        Scalar::Real(v)
    })
}

fn decision(device: String, action: &str, params: Params, cycle: u64, text: &str) -> NluOutcome {
    NluOutcome::Decision(AgentDecision {
        agent_id: AgentRole::Nlu.agent_id().to_owned(),
        device_id: device,
        action: action.to_owned(),
        params,
        confidence: NLU_CONFIDENCE,
        cycle,
        rationale: format!("resident said {text:?}"),
    })
}

fn preference(x: &str, y: &str) -> Result<NluOutcome, NluError> {
    let (key, value) = match (x, y) {
        ("comfort", "energy") => (names::COMFORT_VS_ENERGY, 0.75),
        ("energy", "comfort") => (names::COMFORT_VS_ENERGY, 0.25),
        ("security", "privacy") => (names::SECURITY_VS_PRIVACY, 0.75),
        ("privacy", "security") => (names::SECURITY_VS_PRIVACY, 0.25),
        _ => return Err(NluError::UnpairedPreference(x.to_owned(), y.to_owned())),
    };
    Ok(NluOutcome::Preference {
        key: key.to_owned(),
        value,
    })
}

/// Parses one resident sentence against the devices present in `catalog`.
/// Never guesses: anything outside the grammar is an error.
pub fn nlu_parse(text: &str, catalog: &TelemetrySnapshot) -> Result<NluOutcome, NluError> {
    let norm = normalize(text);
    let words: Vec<&str> = norm.split(' ').filter(|w| !w.is_empty()).collect();
    let unrecognized = || NluError::Unrecognized(text.to_owned());

    match words.as_slice() {
        ["i", "prefer", x, "over", y, ..] => preference(x, y),
        ["set", rest @ ..] => {
            let to = rest.iter().rposition(|w| *w == "to").ok_or_else(unrecognized)?;
            let (phrase, value) = (&rest[..to], &rest[to + 1..]);
            if phrase.is_empty() || value.len() != 1 {
                return Err(unrecognized());
            }
            let phrase = strip_article(phrase);
            let shown = phrase.join(" ");
            let (target, attr_words) =
                split_target(phrase, catalog).ok_or_else(|| NluError::UnknownTarget(shown.clone()))?;
            let (kind, action) =
                attribute(attr_words).ok_or_else(|| NluError::UnknownAttribute(attr_words.join(" ")))?;
            let device = resolve(target, kind, catalog, &shown)?;
            let mut params = Params::new();
            params.insert("value".into(), scalar(value[0])?);
            Ok(decision(device, action, params, catalog.cycle, text))
        }
        ["turn", onoff @ ("on" | "off"), rest @ ..] => {
            let rest = strip_article(rest);
            let shown = rest.join(" ");
            let (target, tail) = split_target(rest, catalog).ok_or_else(|| NluError::UnknownTarget(shown.clone()))?;
            let device = match (target, tail) {
                (Target::Device(id), []) => id,
                (Target::Room(room), [w]) => {
                    let kind = type_word(w).ok_or_else(|| NluError::UnknownTarget(shown.clone()))?;
                    resolve(Target::Room(room), kind, catalog, &shown)?
                }
                _ => return Err(NluError::UnknownTarget(shown)),
            };
            let action = if *onoff == "on" { "power_on" } else { "power_off" };
            Ok(decision(device, action, Params::new(), catalog.cycle, text))
        }
        _ => Err(unrecognized()),
    }
}

fn strip_article<'a>(words: &'a [&'a str]) -> &'a [&'a str] {
    match words {
        ["the", rest @ ..] => rest,
        other => other,
    }
}
