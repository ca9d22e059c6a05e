//! Base heuristics that rollout improves upon.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::network::ComponentKind;
use crate::sim::{crews_deployed, RecoverySim, RecoveryState, RepairAction, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePolicyKind {
    /// Wells, then pumps, then tanks, then pipes; shortest expected repair first.
    #[default]
    KindPriority,
    UniformRandom,
    /// Largest single-repair gain in served population first.
    PopulationGreedy,
}

fn kind_rank(kind: ComponentKind) -> u8 {
    match kind {
        ComponentKind::Well => 0,
        ComponentKind::BoosterPump => 1,
        ComponentKind::Tank => 2,
        ComponentKind::PipeSegment => 3,
    }
}

fn priority_order(
    sim: &RecoverySim<'_>,
    state: &RecoveryState,
    a: usize,
    b: usize,
) -> Result<Ordering, SimError> {
    let (da, db) = (&state.damaged[a], &state.damaged[b]);
    let (ca, cb) = (
        sim.network.component(da.component),
        sim.network.component(db.component),
    );
    let ta = sim.expected_repair_days(da)?;
    let tb = sim.expected_repair_days(db)?;
    Ok(kind_rank(ca.kind)
        .cmp(&kind_rank(cb.kind))
        .then(ta.total_cmp(&tb))
        .then_with(|| ca.id.cmp(&cb.id)))
}

fn sort_by_priority(
    sim: &RecoverySim<'_>,
    state: &RecoveryState,
    order: &mut [usize],
) -> Result<(), SimError> {
    // Validate every expected time up front so the comparator cannot fail.
    for d in &state.damaged {
        sim.expected_repair_days(d)?;
    }
    order.sort_by(|&a, &b| priority_order(sim, state, a, b).expect("validated"));
    Ok(())
}

/// The default deterministic base policy: kind priority, then shortest
/// expected repair, then component id.
pub fn base_policy(
    state: &RecoveryState,
    sim: &RecoverySim<'_>,
    resources: usize,
) -> Result<RepairAction, SimError> {
    let n = state.num_damaged();
    let mut order: Vec<usize> = (0..n).collect();
    sort_by_priority(sim, state, &mut order)?;
    let k = crews_deployed(n, resources);
    Ok(RepairAction::from_indices(n, &order[..k]))
}

fn population_greedy(
    state: &RecoveryState,
    sim: &RecoverySim<'_>,
) -> Result<RepairAction, SimError> {
    let n = state.num_damaged();
    let now = sim.served_population(state);
    let mut gains = Vec::with_capacity(n);
    for i in 0..n {
        let mut probe = state.clone();
        probe.damaged.remove(i);
        gains.push(sim.served_population(&probe).saturating_sub(now));
    }
    let mut order: Vec<usize> = (0..n).collect();
    sort_by_priority(sim, state, &mut order)?;
    // Stable sort keeps the priority order among equal gains.
    order.sort_by(|&a, &b| gains[b].cmp(&gains[a]));
    let k = crews_deployed(n, sim.resources);
    Ok(RepairAction::from_indices(n, &order[..k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BasePolicy {
    pub kind: BasePolicyKind,
}

impl BasePolicy {
    pub fn new(kind: BasePolicyKind) -> Self {
        Self { kind }
    }
}

impl<'a> Policy<RecoverySim<'a>> for BasePolicy {
    fn act<R: Rng + ?Sized>(
        &self,
        sim: &RecoverySim<'a>,
        state: &RecoveryState,
        rng: &mut R,
    ) -> Result<RepairAction, SimError> {
        match self.kind {
            BasePolicyKind::KindPriority => base_policy(state, sim, sim.resources),
            BasePolicyKind::PopulationGreedy => population_greedy(state, sim),
            BasePolicyKind::UniformRandom => {
                let n = state.num_damaged();
                let k = crews_deployed(n, sim.resources);
                Ok(RepairAction::from_indices(
                    n,
                    &index::sample(rng, n, k).into_vec(),
                ))
            }
        }
    }
}
