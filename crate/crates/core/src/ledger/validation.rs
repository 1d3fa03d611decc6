//! The four-gate transaction pipeline: structure, signature, permission, conflict.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::registry::AgentRegistry;
use super::transaction::{Transaction, TxKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Structural,
    Signature,
    Permission,
    Conflict,
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Gate::Structural => "structural",
            Gate::Signature => "signature",
            Gate::Permission => "permission",
            Gate::Conflict => "conflict",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TxVerdict {
    Accepted,
    /// Passed gates 1-3 but collides with pending decisions on the same device.
    /// Not a rejection: the transaction is routed to arbitration.
    Conflicted {
        with: Vec<String>,
    },
    Rejected {
        gate: Gate,
        reason: String,
    },
}

impl TxVerdict {
    pub fn is_admissible(&self) -> bool {
        !matches!(self, TxVerdict::Rejected { .. })
    }
}

fn reject(gate: Gate, reason: impl Into<String>) -> TxVerdict {
    TxVerdict::Rejected {
        gate,
        reason: reason.into(),
    }
}

fn structural(tx: &Transaction) -> Result<(), String> {
    if tx.tx_id.is_empty() {
        return Err("empty tx_id".into());
    }
    if tx.agent_id.is_empty() {
        return Err("empty agent_id".into());
    }
    if tx.action.is_empty() {
        return Err("empty action".into());
    }
    if matches!(tx.kind, TxKind::Decision | TxKind::Emergency) && tx.device_id.as_deref().is_none_or(str::is_empty) {
        return Err(format!("{} transaction without device_id", tx.kind.as_str()));
    }
    if !(0.0..=1.0).contains(&tx.confidence) {
        return Err(format!("confidence {} outside [0,1]", tx.confidence));
    }
    if tx.compute_payload_hash() != tx.payload_hash {
        return Err("payload_hash does not match contents".into());
    }
    Ok(())
}

pub fn validate_transaction(tx: &Transaction, registry: &AgentRegistry, pending: &[Transaction]) -> TxVerdict {
    if let Err(reason) = structural(tx) {
        return reject(Gate::Structural, reason);
    }
    let Some(entry) = registry.get(&tx.agent_id) else {
        return reject(Gate::Signature, format!("unknown agent {}", tx.agent_id));
    };
    if !tx.verify_signature(&entry.public_key) {
        return reject(
            Gate::Signature,
            format!("signature does not verify for {}", tx.agent_id),
        );
    }
    if let Some(device) = &tx.device_id {
        if !entry.device_scope.permits(device) {
            return reject(Gate::Permission, format!("{} may not command {device}", tx.agent_id));
        }
    }
    if tx.kind == TxKind::Decision {
        let with: Vec<String> = pending
            .iter()
            .filter(|p| {
                p.kind == TxKind::Decision
                    && p.tx_id != tx.tx_id
                    && p.device_id == tx.device_id
                    && p.action != tx.action
            })
            .map(|p| p.tx_id.clone())
            .collect();
        if !with.is_empty() {
            return TxVerdict::Conflicted { with };
        }
    }
    TxVerdict::Accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::crypto::keypair_from_seed;
    use crate::ledger::registry::{AgentRegistryEntry, DeviceScope};
    use crate::ledger::transaction::{Params, TxDraft};

    fn setup() -> (AgentRegistry, crate::ledger::SecretKey) {
        let (sk, pk) = keypair_from_seed(&[9u8; 32]).unwrap();
        let mut r = AgentRegistry::new();
        r.register(AgentRegistryEntry {
            agent_id: "climate-agent-001".into(),
            public_key: pk,
            priority: 0.5,
            device_scope: DeviceScope::wildcard(),
        })
        .unwrap();
        (r, sk)
    }

    fn decision(id: &str, device: &str, action: &str) -> TxDraft {
        TxDraft {
            tx_id: id.into(),
            agent_id: "climate-agent-001".into(),
            kind: TxKind::Decision,
            device_id: Some(device.into()),
            action: action.into(),
            params: Params::new(),
            confidence: 0.9,
            timestamp_ms: 1,
        }
    }

    #[test]
    fn well_formed_is_accepted() {
        let (r, sk) = setup();
        let tx = decision("t1", "hvac-1", "heat").seal_and_sign(&sk);
        assert_eq!(validate_transaction(&tx, &r, &[]), TxVerdict::Accepted);
    }

    #[test]
    fn unregistered_key_rejected_at_signature_gate() {
        let (r, _) = setup();
        let (rogue, _) = keypair_from_seed(&[10u8; 32]).unwrap();
        let tx = decision("t1", "hvac-1", "heat").seal_and_sign(&rogue);
        assert!(matches!(
            validate_transaction(&tx, &r, &[]),
            TxVerdict::Rejected {
                gate: Gate::Signature,
                ..
            }
        ));
    }

    #[test]
    fn unknown_agent_rejected_at_signature_gate() {
        let (r, sk) = setup();
        let mut d = decision("t1", "hvac-1", "heat");
        d.agent_id = "ghost".into();
        let tx = d.seal_and_sign(&sk);
        assert!(matches!(
            validate_transaction(&tx, &r, &[]),
            TxVerdict::Rejected {
                gate: Gate::Signature,
                ..
            }
        ));
    }

    #[test]
    fn structural_failures() {
        let (r, sk) = setup();
        let mut d = decision("t1", "hvac-1", "heat");
        d.confidence = 1.5;
        let tx = d.seal_and_sign(&sk);
        assert!(matches!(
            validate_transaction(&tx, &r, &[]),
            TxVerdict::Rejected {
                gate: Gate::Structural,
                ..
            }
        ));
        let mut tx = decision("t1", "hvac-1", "heat").seal_and_sign(&sk);
        tx.action = "cool".into();
        assert!(matches!(
            validate_transaction(&tx, &r, &[]),
            TxVerdict::Rejected {
                gate: Gate::Structural,
                ..
            }
        ));
    }

    #[test]
    fn permission_gate() {
        let (sk, pk) = keypair_from_seed(&[11u8; 32]).unwrap();
        let mut r = AgentRegistry::new();
        r.register(AgentRegistryEntry {
            agent_id: "climate-agent-001".into(),
            public_key: pk,
            priority: 0.5,
            device_scope: DeviceScope(vec!["hvac-*".into()]),
        })
        .unwrap();
        let ok = decision("t1", "hvac-1", "heat").seal_and_sign(&sk);
        let no = decision("t2", "lock-front", "unlock").seal_and_sign(&sk);
        assert_eq!(validate_transaction(&ok, &r, &[]), TxVerdict::Accepted);
        assert!(matches!(
            validate_transaction(&no, &r, &[]),
            TxVerdict::Rejected {
                gate: Gate::Permission,
                ..
            }
        ));
    }

    #[test]
    fn opposing_actions_on_same_device_are_tagged() {
        let (r, sk) = setup();
        let first = decision("t1", "hvac-1", "heat").seal_and_sign(&sk);
        let second = decision("t2", "hvac-1", "cool").seal_and_sign(&sk);
        let same = decision("t3", "hvac-1", "heat").seal_and_sign(&sk);
        assert_eq!(
            validate_transaction(&second, &r, std::slice::from_ref(&first)),
            TxVerdict::Conflicted {
                with: vec!["t1".into()]
            }
        );
        assert_eq!(validate_transaction(&same, &r, &[first]), TxVerdict::Accepted);
    }
}
