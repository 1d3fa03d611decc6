//! Tiered resident preferences, their validation rules, the slider priority
//! map and the append-only audit trail.

pub mod keys;
pub mod rules;
pub mod sliders;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use keys::{key_specs, names, KeySpec, Tier};
pub use rules::{all_rules, rule, validate, GovValue, RuleId, RuleKind, ValidationRule};
pub use sliders::{priorities_from_sliders, priority_of, slider_span, PriorityMap, Slider, SliderState};

use crate::clock::Clock;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GovernanceError {
    #[error("unknown governance key {0:?}")]
    UnknownKey(String),
    #[error("value {value} for {key} violates rule {rule_id}")]
    Invalid {
        key: String,
        rule_id: RuleId,
        value: GovValue,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Allowed { requires_confirmation: bool, version: u64 },
    Denied { tier: Tier, reason: String },
}

impl Verdict {
    pub fn is_allowed(&self) -> bool {
        matches!(self, Verdict::Allowed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Allowed,
    Denied,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceAuditEvent {
    pub seq: u64,
    pub key: String,
    pub old_value: GovValue,
    pub new_value: GovValue,
    pub actor: String,
    pub tier: Tier,
    pub verdict: AuditOutcome,
    pub timestamp_ms: i64,
}

/// An applied mutation waiting to be written to the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceChange {
    pub key: String,
    pub old_value: GovValue,
    pub new_value: GovValue,
    pub actor: String,
    pub tier: Tier,
    pub version: u64,
    pub timestamp_ms: i64,
}

/// Immutable, versioned view of every key's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceSnapshot {
    pub version: u64,
    pub values: BTreeMap<String, GovValue>,
}

impl GovernanceSnapshot {
    pub fn defaults() -> Self {
        Self {
            version: 0,
            values: key_specs()
                .into_iter()
                .map(|k| (k.name.to_owned(), k.default))
                .collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&GovValue> {
        self.values.get(key)
    }

    /// Panics on a missing key; callers use the names in [`keys::names`].
    pub fn number(&self, key: &str) -> f64 {
        self.values
            .get(key)
            .and_then(GovValue::as_f64)
            .unwrap_or_else(|| panic!("governance key {key} is not numeric"))
    }

    pub fn text(&self, key: &str) -> &str {
        self.values
            .get(key)
            .and_then(GovValue::as_str)
            .unwrap_or_else(|| panic!("governance key {key} is not text"))
    }

    pub fn flag(&self, key: &str) -> bool {
        self.values
            .get(key)
            .and_then(GovValue::as_bool)
            .unwrap_or_else(|| panic!("governance key {key} is not boolean"))
    }

    pub fn sliders(&self) -> SliderState {
        SliderState::new(
            self.number(names::COMFORT_VS_ENERGY),
            self.number(names::SECURITY_VS_PRIVACY),
        )
    }

    pub fn priorities(&self) -> PriorityMap {
        priorities_from_sliders(self.sliders())
    }
}

pub struct GovernanceContract {
    specs: BTreeMap<&'static str, KeySpec>,
    snapshot: Arc<GovernanceSnapshot>,
    audit: Vec<GovernanceAuditEvent>,
    outbox: Vec<GovernanceChange>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for GovernanceContract {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GovernanceContract")
            .field("version", &self.snapshot.version)
            .field("audit_len", &self.audit.len())
            .finish()
    }
}

impl GovernanceContract {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            specs: key_specs().into_iter().map(|k| (k.name, k)).collect(),
            snapshot: Arc::new(GovernanceSnapshot::defaults()),
            audit: Vec::new(),
            outbox: Vec::new(),
            clock,
        }
    }

    pub fn spec(&self, key: &str) -> Option<&KeySpec> {
        self.specs.get(key)
    }

    pub fn specs(&self) -> impl Iterator<Item = &KeySpec> {
        self.specs.values()
    }

    pub fn snapshot(&self) -> Arc<GovernanceSnapshot> {
        Arc::clone(&self.snapshot)
    }

    pub fn version(&self) -> u64 {
        self.snapshot.version
    }

    pub fn get_preference(&self, key: &str) -> Result<&GovValue, GovernanceError> {
        self.snapshot
            .get(key)
            .ok_or_else(|| GovernanceError::UnknownKey(key.to_owned()))
    }

    pub fn audit_log(&self) -> &[GovernanceAuditEvent] {
        &self.audit
    }

    pub fn pending_changes(&self) -> &[GovernanceChange] {
        &self.outbox
    }

    pub fn drain_changes(&mut self) -> Vec<GovernanceChange> {
        std::mem::take(&mut self.outbox)
    }

    fn record(&mut self, spec: &KeySpec, old: &GovValue, new: &GovValue, actor: &str, verdict: AuditOutcome) -> i64 {
        let ts = self.clock.now_ms();
        self.audit.push(GovernanceAuditEvent {
            seq: self.audit.len() as u64,
            key: spec.name.to_owned(),
            old_value: old.clone(),
            new_value: new.clone(),
            actor: actor.to_owned(),
            tier: spec.tier,
            verdict,
            timestamp_ms: ts,
        });
        ts
    }

    /// Applies `value` to `key` when the tier and rule allow it. Every attempt
    /// on a known key leaves exactly one audit event.
    pub fn set_preference(&mut self, key: &str, value: GovValue, actor: &str) -> Result<Verdict, GovernanceError> {
        let spec = self
            .specs
            .get(key)
            .cloned()
            .ok_or_else(|| GovernanceError::UnknownKey(key.to_owned()))?;
        let old = self.snapshot.values[spec.name].clone();

        let rule_id = match (spec.tier, spec.rule_id) {
            (Tier::Locked, _) | (_, None) => {
                self.record(&spec, &old, &value, actor, AuditOutcome::Denied);
                return Ok(Verdict::Denied {
                    tier: spec.tier,
                    reason: format!("{} is LOCKED and immutable for every actor", spec.name),
                });
            }
            (_, Some(r)) => r,
        };

        if !validate(&value, &rule(rule_id)) {
            self.record(&spec, &old, &value, actor, AuditOutcome::Invalid);
            return Err(GovernanceError::Invalid {
                key: spec.name.to_owned(),
                rule_id,
                value,
            });
        }

        let ts = self.record(&spec, &old, &value, actor, AuditOutcome::Allowed);
        let mut next = (*self.snapshot).clone();
        next.version += 1;
        next.values.insert(spec.name.to_owned(), value.clone());
        let version = next.version;
        self.snapshot = Arc::new(next);
        self.outbox.push(GovernanceChange {
            key: spec.name.to_owned(),
            old_value: old,
            new_value: value,
            actor: actor.to_owned(),
            tier: spec.tier,
            version,
            timestamp_ms: ts,
        });
        Ok(Verdict::Allowed {
            requires_confirmation: spec.tier.requires_confirmation(),
            version,
        })
    }

    /// `key = <json>  # tier=T rule=R` per line, sorted by key.
    pub fn export_text(&self) -> String {
        let mut out = format!("# governance version {}\n", self.snapshot.version);
        for (name, value) in &self.snapshot.values {
            let spec = &self.specs[name.as_str()];
            let rule = spec.rule_id.map_or_else(|| "-".to_owned(), |r| r.to_string());
            let _ = writeln!(out, "{name} = {value}  # tier={} rule={rule}", spec.tier);
        }
        out
    }

    pub fn export_audit_lines(&self) -> String {
        self.audit
            .iter()
            .map(|e| serde_json::to_string(e).expect("audit event serializes") + "\n")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FixedClock;

    fn contract() -> GovernanceContract {
        GovernanceContract::new(Arc::new(FixedClock(1_000)))
    }

    #[test]
    fn locked_key_denied() {
        let mut g = contract();
        let v = g
            .set_preference(names::SMOKE_THRESHOLD, 0.5.into(), "resident")
            .unwrap();
        assert!(matches!(v, Verdict::Denied { tier: Tier::Locked, .. }));
        assert_eq!(g.snapshot().number(names::SMOKE_THRESHOLD), 0.3);
        assert_eq!(g.audit_log().len(), 1);
        assert!(g.pending_changes().is_empty());
    }

    #[test]
    fn safe_key_allowed_and_versioned() {
        let mut g = contract();
        let v = g
            .set_preference(names::TARGET_TEMPERATURE_C, 22.0.into(), "resident")
            .unwrap();
        assert_eq!(
            v,
            Verdict::Allowed {
                requires_confirmation: false,
                version: 1
            }
        );
        assert_eq!(g.version(), 1);
        assert_eq!(g.drain_changes().len(), 1);
    }

    #[test]
    fn invalid_value_names_rule() {
        let mut g = contract();
        let err = g
            .set_preference(names::TARGET_TEMPERATURE_C, 99.0.into(), "resident")
            .unwrap_err();
        assert_eq!(
            err,
            GovernanceError::Invalid {
                key: names::TARGET_TEMPERATURE_C.into(),
                rule_id: RuleId::R01,
                value: 99.0.into()
            }
        );
        assert_eq!(g.version(), 0);
        assert_eq!(g.audit_log()[0].verdict, AuditOutcome::Invalid);
    }

    #[test]
    fn unknown_key() {
        let mut g = contract();
        assert!(matches!(
            g.set_preference("warp_drive", true.into(), "resident"),
            Err(GovernanceError::UnknownKey(_))
        ));
        assert!(g.get_preference("warp_drive").is_err());
    }

    #[test]
    fn impactful_requires_confirmation() {
        let mut g = contract();
        let v = g
            .set_preference(names::COMFORT_VS_ENERGY, 0.8.into(), "resident")
            .unwrap();
        assert!(matches!(
            v,
            Verdict::Allowed {
                requires_confirmation: true,
                ..
            }
        ));
        assert_eq!(g.snapshot().sliders().comfort_vs_energy, 0.8);
    }

    #[test]
    fn snapshots_are_immutable() {
        let mut g = contract();
        let before = g.snapshot();
        g.set_preference(names::LIGHTING_BRIGHTNESS_PCT, 10.0.into(), "resident")
            .unwrap();
        assert_eq!(before.number(names::LIGHTING_BRIGHTNESS_PCT), 80.0);
        assert_eq!(g.snapshot().number(names::LIGHTING_BRIGHTNESS_PCT), 10.0);
        assert_eq!(*before, GovernanceSnapshot::defaults());
    }

    #[test]
    fn export_annotates_tiers() {
        let g = contract();
        let text = g.export_text();
        assert_eq!(text.lines().count(), 28);
        assert!(text.contains("smoke_threshold = 0.3  # tier=LOCKED rule=-"));
        assert!(text.contains("target_temperature_c = 22.0  # tier=SAFE rule=R01"));
    }
}
