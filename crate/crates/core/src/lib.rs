//! Post-earthquake water network recovery planning.
//!
//! A damage scenario is sampled from a ground-motion model and fragility
//! curves ([`hazard`]), the recovery process is simulated as an MDP whose
//! actions assign repair crews to damaged components ([`sim`]), and crew
//! assignments are chosen stage by stage with rollout under either uniform or
//! OCBA sample allocation ([`planner`]). [`oracle`] holds exact tabular MDP
//! solvers used to check the planner, and [`harness`] runs batches of
//! scenarios and writes recovery curves.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod hazard;
pub mod network;
pub mod oracle;
pub mod planner;
pub mod rng;
pub mod sim;

pub use hazard::{DamageScenario, DamageState, HazardConfig, SeismicEvent};
pub use network::{ComponentKind, ServiceFlags, WaterNetwork};
pub use planner::{PlannerConfig, PlannerKind};
pub use sim::{RecoverySim, RecoveryState, RepairAction, RepairModel};
