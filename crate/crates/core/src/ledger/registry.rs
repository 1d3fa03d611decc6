//! Registered signing identities and their device permissions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::crypto::{pubkey_hex, PublicKey};
use super::LedgerError;

/// Which devices an identity may command. `*` matches everything; a trailing
/// `*` matches by prefix (`light-*`); anything else must match exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceScope(pub Vec<String>);

impl Default for DeviceScope {
    fn default() -> Self {
        Self::wildcard()
    }
}

impl DeviceScope {
    pub fn wildcard() -> Self {
        DeviceScope(vec!["*".to_owned()])
    }

    pub fn permits(&self, device_id: &str) -> bool {
        self.0.iter().any(|p| match p.strip_suffix('*') {
            Some(prefix) => device_id.starts_with(prefix),
            None => p == device_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRegistryEntry {
    pub agent_id: String,
    #[serde(with = "pubkey_hex")]
    pub public_key: PublicKey,
    pub priority: f64,
    #[serde(default)]
    pub device_scope: DeviceScope,
}

#[derive(Debug, Clone, Default)]
pub struct AgentRegistry {
    entries: BTreeMap<String, AgentRegistryEntry>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, entry: AgentRegistryEntry) -> Result<(), LedgerError> {
        if !(entry.priority > 0.0 && entry.priority <= 1.0) {
            return Err(LedgerError::BadPriority {
                agent_id: entry.agent_id,
                priority: entry.priority,
            });
        }
        if self.entries.contains_key(&entry.agent_id) {
            return Err(LedgerError::DuplicateAgent(entry.agent_id));
        }
        self.entries.insert(entry.agent_id.clone(), entry);
        Ok(())
    }

    pub fn get(&self, agent_id: &str) -> Option<&AgentRegistryEntry> {
        self.entries.get(agent_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentRegistryEntry> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::crypto::keypair_from_seed;

    fn entry(id: &str, seed: u8) -> AgentRegistryEntry {
        AgentRegistryEntry {
            agent_id: id.into(),
            public_key: keypair_from_seed(&[seed; 32]).unwrap().1,
            priority: 0.5,
            device_scope: DeviceScope::default(),
        }
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut r = AgentRegistry::new();
        r.register(entry("a", 1)).unwrap();
        assert!(matches!(r.register(entry("a", 2)), Err(LedgerError::DuplicateAgent(_))));
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn priority_must_be_in_unit_interval() {
        let mut r = AgentRegistry::new();
        let mut e = entry("a", 1);
        e.priority = 0.0;
        assert!(r.register(e).is_err());
    }

    #[test]
    fn scope_patterns() {
        assert!(DeviceScope::wildcard().permits("anything"));
        let s = DeviceScope(vec!["light-*".into(), "lock-front".into()]);
        assert!(s.permits("light-kitchen"));
        assert!(s.permits("lock-front"));
        assert!(!s.permits("lock-back"));
        assert!(!s.permits("hvac-living"));
    }
}
