//! Agentic smart-home governance on an adaptive proof-of-work ledger.
//!
//! Prioritized agents read telemetry from a simulated (or real) home, issue
//! signed device commands, and have their disputes settled by a four-level
//! arbitration cascade. Residents steer the system through tiered governance
//! keys and two trade-off sliders; every decision, conflict and preference
//! change ends up in a hash-linked chain whose difficulty follows load.

pub mod agents;
pub mod arbitration;
pub mod bench;
pub mod clock;
pub mod devices;
pub mod governance;
pub mod ledger;
pub mod orchestrator;
pub mod roles;
pub mod telemetry;
