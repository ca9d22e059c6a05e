//! Simulation-based recovery MDP: states, repair actions, the stochastic
//! transition simulator and the served-population reward.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hazard::{DamageScenario, DamageState};
use crate::network::{is_operational, ComponentKind, ServiceFlags, WaterNetwork};
use crate::planner::SimModel;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("no repair time for {kind} in state {state}")]
    NoRepairTime {
        kind: ComponentKind,
        state: DamageState,
    },
    #[error("pipe repair needs a positive expected break count, got {0}")]
    PipeBreaks(f64),
    #[error("action has {got} entries but the state has {expected} damaged components")]
    ActionLength { expected: usize, got: usize },
    #[error("action assigns {got} units; exactly {expected} are required")]
    ActionWeight { expected: usize, got: usize },
    #[error("state is terminal")]
    Terminal,
    #[error("repair time must be positive, got {0}")]
    RepairTime(f64),
}

/// Expected restoration times (days) by damage state, with pipes driven by
/// their expected break count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairModel {
    /// Minor, Moderate, Extensive, Complete means per facility kind.
    pub facility_means: BTreeMap<ComponentKind, [f64; 4]>,
    pub days_per_break: f64,
}

impl RepairModel {
    /// HAZUS-derived expected repair times for water facilities.
    pub fn hazus(days_per_break: f64) -> Self {
        let facility_means = BTreeMap::from([
            (ComponentKind::Tank, [1.2, 3.1, 93.0, 155.0]),
            (ComponentKind::Well, [0.8, 1.5, 10.5, 26.0]),
            (ComponentKind::BoosterPump, [0.9, 3.1, 13.5, 35.0]),
        ]);
        Self {
            facility_means,
            days_per_break,
        }
    }

    pub fn expected_days(
        &self,
        kind: ComponentKind,
        state: DamageState,
        expected_breaks: f64,
    ) -> Result<f64, SimError> {
        if !state.is_damaged() {
            return Err(SimError::NoRepairTime { kind, state });
        }
        if kind.is_pipe() {
            if !(expected_breaks > 0.0) {
                return Err(SimError::PipeBreaks(expected_breaks));
            }
            return Ok(expected_breaks * self.days_per_break);
        }
        self.facility_means
            .get(&kind)
            .map(|row| row[state as usize - 1])
            .ok_or(SimError::NoRepairTime { kind, state })
    }
}

impl Default for RepairModel {
    fn default() -> Self {
        Self::hazus(1.0)
    }
}

/// Exponential repair duration for a damaged component.
pub fn sample_repair_time<R: Rng + ?Sized>(
    model: &RepairModel,
    kind: ComponentKind,
    state: DamageState,
    expected_breaks: f64,
    rng: &mut R,
) -> Result<f64, SimError> {
    let mean = model.expected_days(kind, state, expected_breaks)?;
    let exp = Exp::new(1.0 / mean).map_err(|_| SimError::RepairTime(mean))?;
    loop {
        let t = exp.sample(rng);
        if t > 0.0 {
            return Ok(t);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamagedComponent {
    /// Index into `WaterNetwork::components`.
    pub component: usize,
    pub state: DamageState,
    pub expected_breaks: f64,
    /// Remaining repair work once a crew has started; `None` while unassigned.
    pub residual_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryState {
    pub damaged: Vec<DamagedComponent>,
    /// Days since the event.
    pub elapsed_days: f64,
}

impl RecoveryState {
    pub fn num_damaged(&self) -> usize {
        self.damaged.len()
    }
}

pub fn is_terminal(state: &RecoveryState) -> bool {
    state.damaged.is_empty()
}

/// One crew per marked component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RepairAction {
    pub assign: Vec<bool>,
}

impl RepairAction {
    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut assign = vec![false; len];
        for &i in indices {
            assign[i] = true;
        }
        Self { assign }
    }

    pub fn weight(&self) -> usize {
        self.assign.iter().filter(|&&a| a).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub next_state: RecoveryState,
    pub completion_time: f64,
    /// Served population over cumulative elapsed days.
    pub reward: f64,
    /// Component indices repaired in this step.
    pub completed: Vec<usize>,
    pub served_population: u64,
}

/// Units actually deployed: excess crews are retired.
pub fn crews_deployed(num_damaged: usize, resources: usize) -> usize {
    resources.min(num_damaged)
}

fn binomial_capped(n: usize, k: usize, cap: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap + 1;
        }
    }
    acc as usize
}

fn lexicographic_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Candidate crew assignments for `state`: all combinations when there are at
/// most `cap`, otherwise `cap` distinct combinations sampled uniformly.
/// Returned in lexicographic order of assigned indices.
pub fn enumerate_actions<R: Rng + ?Sized>(
    state: &RecoveryState,
    resources: usize,
    cap: usize,
    rng: &mut R,
) -> Vec<RepairAction> {
    let n = state.num_damaged();
    if n == 0 || resources == 0 || cap == 0 {
        return Vec::new();
    }
    let k = crews_deployed(n, resources);
    if binomial_capped(n, k, cap) <= cap {
        return lexicographic_combinations(n, k)
            .iter()
            .map(|c| RepairAction::from_indices(n, c))
            .collect();
    }
    let mut chosen = BTreeSet::new();
    while chosen.len() < cap {
        let mut pick = index::sample(rng, n, k).into_vec();
        pick.sort_unstable();
        chosen.insert(pick);
    }
    chosen
        .iter()
        .map(|c| RepairAction::from_indices(n, c))
        .collect()
}

/// The recovery MDP over one network with `resources` crews.
#[derive(Debug, Clone)]
pub struct RecoverySim<'a> {
    pub network: &'a WaterNetwork,
    pub repair: RepairModel,
    pub flags: ServiceFlags,
    pub resources: usize,
}

impl<'a> RecoverySim<'a> {
    pub fn new(network: &'a WaterNetwork, repair: RepairModel, resources: usize) -> Self {
        Self {
            network,
            repair,
            flags: ServiceFlags::default(),
            resources,
        }
    }

    /// s_0 for a sampled scenario.
    pub fn initial_state(&self, scenario: &DamageScenario) -> RecoveryState {
        let damaged = scenario
            .components
            .iter()
            .enumerate()
            .filter(|(_, d)| d.state.is_damaged())
            .map(|(i, d)| DamagedComponent {
                component: i,
                state: d.state,
                expected_breaks: d.expected_breaks,
                residual_days: None,
            })
            .collect();
        RecoveryState {
            damaged,
            elapsed_days: 0.0,
        }
    }

    pub fn served_population(&self, state: &RecoveryState) -> u64 {
        let mut operational = vec![true; self.network.components().len()];
        for d in &state.damaged {
            operational[d.component] =
                is_operational(self.network.component(d.component), d.state, self.flags);
        }
        self.network.served_population(&operational)
    }

    pub fn expected_repair_days(&self, d: &DamagedComponent) -> Result<f64, SimError> {
        let kind = self.network.component(d.component).kind;
        self.repair.expected_days(kind, d.state, d.expected_breaks)
    }

    pub fn validate_action(
        &self,
        state: &RecoveryState,
        action: &RepairAction,
    ) -> Result<(), SimError> {
        if is_terminal(state) {
            return Err(SimError::Terminal);
        }
        if action.assign.len() != state.num_damaged() {
            return Err(SimError::ActionLength {
                expected: state.num_damaged(),
                got: action.assign.len(),
            });
        }
        let expected = crews_deployed(state.num_damaged(), self.resources);
        if action.weight() != expected {
            return Err(SimError::ActionWeight {
                expected,
                got: action.weight(),
            });
        }
        Ok(())
    }

    /// Advances `state` under `action`, drawing fresh repair durations from `rng`.
    pub fn simulate_transition<R: Rng + ?Sized>(
        &self,
        state: &RecoveryState,
        action: &RepairAction,
        rng: &mut R,
    ) -> Result<TransitionOutcome, SimError> {
        self.simulate_transition_with(state, action, |d| {
            let kind = self.network.component(d.component).kind;
            sample_repair_time(&self.repair, kind, d.state, d.expected_breaks, rng)
        })
    }

    /// Like [`simulate_transition`](Self::simulate_transition) but with the
    /// duration of each newly started repair supplied by `draw`.
    pub fn simulate_transition_with<F>(
        &self,
        state: &RecoveryState,
        action: &RepairAction,
        mut draw: F,
    ) -> Result<TransitionOutcome, SimError>
    where
        F: FnMut(&DamagedComponent) -> Result<f64, SimError>,
    {
        self.validate_action(state, action)?;
        let mut work = state.damaged.clone();
        let mut t_hat = f64::INFINITY;
        for i in action.indices() {
            let d = &mut work[i];
            let residual = match d.residual_days {
                Some(r) => r,
                None => {
                    let r = draw(d)?;
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(SimError::RepairTime(r));
                    }
                    d.residual_days = Some(r);
                    r
                }
            };
            t_hat = t_hat.min(residual);
        }

        let mut completed = Vec::new();
        let mut damaged = Vec::with_capacity(work.len());
        for (i, mut d) in work.into_iter().enumerate() {
            if action.assign[i] {
                let r = d
                    .residual_days
                    .expect("assigned components have a residual");
                if r == t_hat {
                    completed.push(d.component);
                    continue;
                }
                d.residual_days = Some(r - t_hat);
            }
            damaged.push(d);
        }
        let next_state = RecoveryState {
            damaged,
            elapsed_days: state.elapsed_days + t_hat,
        };
        let served = self.served_population(&next_state);
        Ok(TransitionOutcome {
            reward: served as f64 / next_state.elapsed_days,
            next_state,
            completion_time: t_hat,
            completed,
            served_population: served,
        })
    }
}

impl SimModel for RecoverySim<'_> {
    type State = RecoveryState;
    type Action = RepairAction;
    type Error = SimError;

    fn is_terminal(&self, state: &RecoveryState) -> bool {
        is_terminal(state)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &RecoveryState,
        action: &RepairAction,
        rng: &mut R,
    ) -> Result<(RecoveryState, f64), SimError> {
        let out = self.simulate_transition(state, action, rng)?;
        Ok((out.next_state, out.reward))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::ComponentDamage;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn damaged(component: usize, state: DamageState) -> DamagedComponent {
        DamagedComponent {
            component,
            state,
            expected_breaks: 0.0,
            residual_days: None,
        }
    }

    fn state_with(n: usize) -> RecoveryState {
        RecoveryState {
            damaged: (0..n).map(|i| damaged(i, DamageState::Minor)).collect(),
            elapsed_days: 0.0,
        }
    }

    #[test]
    fn action_counts() {
        let mut rng = stream(0, &[]);
        assert_eq!(enumerate_actions(&state_with(3), 1, 100, &mut rng).len(), 3);
        let all = enumerate_actions(&state_with(3), 3, 100, &mut rng);
        assert_eq!(all, vec![RepairAction::from_indices(3, &[0, 1, 2])]);
        let five = enumerate_actions(&state_with(5), 2, 100, &mut rng);
        assert_eq!(five.len(), 10);
        assert_eq!(five[0], RepairAction::from_indices(5, &[0, 1]));
        assert_eq!(five[9], RepairAction::from_indices(5, &[3, 4]));
        // More crews than damage: excess units retire.
        assert_eq!(enumerate_actions(&state_with(2), 5, 100, &mut rng).len(), 1);
    }

    #[test]
    fn capped_actions_are_distinct_and_valid() {
        let mut rng = stream(1, &[]);
        let acts = enumerate_actions(&state_with(12), 3, 40, &mut rng);
        assert_eq!(acts.len(), 40);
        let set: BTreeSet<_> = acts.iter().collect();
        assert_eq!(set.len(), 40);
        assert!(acts.iter().all(|a| a.weight() == 3));
        assert!(acts
            .windows(2)
            .all(|w| { w[0].indices().collect::<Vec<_>>() < w[1].indices().collect::<Vec<_>>() }));
    }

    #[test]
    fn table_means() {
        let m = RepairModel::default();
        assert_eq!(
            m.expected_days(ComponentKind::Tank, DamageState::Complete, 0.0),
            Ok(155.0)
        );
        assert_eq!(
            m.expected_days(ComponentKind::Well, DamageState::Minor, 0.0),
            Ok(0.8)
        );
        assert_eq!(
            m.expected_days(ComponentKind::BoosterPump, DamageState::Extensive, 0.0),
            Ok(13.5)
        );
        assert_eq!(
            m.expected_days(ComponentKind::PipeSegment, DamageState::Complete, 2.0),
            Ok(2.0)
        );
        assert!(m
            .expected_days(ComponentKind::Well, DamageState::None, 0.0)
            .is_err());
        let mut partial = RepairModel::default();
        partial.facility_means.remove(&ComponentKind::Tank);
        assert!(partial
            .expected_days(ComponentKind::Tank, DamageState::Minor, 0.0)
            .is_err());
    }

    #[test]
    fn pipe_repair_mean_is_breaks_times_days() {
        let m = RepairModel::default();
        let mut rng = stream(4, &[]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                sample_repair_time(
                    &m,
                    ComponentKind::PipeSegment,
                    DamageState::Complete,
                    2.0,
                    &mut rng,
                )
                .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.02, "{mean}");
    }

    fn single_well_network() -> WaterNetwork {
        WaterNetwork::from_json(
            r#"{"nodes": [{"id": 0}, {"id": 1}],
            "components": [
                {"id": "W", "kind": "Well", "site": [0, 0], "attached_node": 0},
                {"id": "T", "kind": "Tank", "site": [1, 0], "attached_node": 1},
                {"id": "P", "kind": "PipeSegment", "site": [0.5, 0], "pipe_length_km": 1.0, "pipe_K": 1.0}
            ],
            "edges": [{"from": 0, "to": 1, "pipe": "P"}],
            "demand_regions": [{"node": 0, "population": 21}, {"node": 1, "population": 48800}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_repair_reward() {
        let net = single_well_network();
        let sim = RecoverySim::new(&net, RepairModel::default(), 1);
        let mut scenario = DamageScenario::intact(&net);
        scenario.components[0] = ComponentDamage {
            state: DamageState::Complete,
            intensity: 0.5,
            expected_breaks: 0.0,
        };
        let s0 = sim.initial_state(&scenario);
        assert_eq!(sim.served_population(&s0), 0);
        let a = RepairAction::from_indices(1, &[0]);
        let out = sim.simulate_transition_with(&s0, &a, |_| Ok(26.0)).unwrap();
        assert_eq!(out.completion_time, 26.0);
        assert_eq!(out.completed, vec![0]);
        assert!(is_terminal(&out.next_state));
        assert_relative_eq!(out.reward, 48_821.0 / 26.0, max_relative = 1e-15);

        // Seeded draw: the reward is the full population over the drawn time.
        let mut rng = stream(77, &[]);
        let out = sim.simulate_transition(&s0, &a, &mut rng).unwrap();
        let expected_t = sample_repair_time(
            &RepairModel::default(),
            ComponentKind::Well,
            DamageState::Complete,
            0.0,
            &mut stream(77, &[]),
        )
        .unwrap();
        assert_eq!(out.completion_time, expected_t);
        assert_relative_eq!(out.reward, 48_821.0 / expected_t, max_relative = 1e-15);
    }

    #[test]
    fn min_and_subtract() {
        let net = single_well_network();
        let sim = RecoverySim::new(&net, RepairModel::default(), 2);
        let mut s = RecoveryState {
            damaged: vec![
                damaged(0, DamageState::Moderate),
                damaged(1, DamageState::Moderate),
            ],
            elapsed_days: 1.0,
        };
        s.damaged[0].residual_days = Some(3.0);
        s.damaged[1].residual_days = Some(7.0);
        let a = RepairAction::from_indices(2, &[0, 1]);
        let out = sim
            .simulate_transition_with(&s, &a, |_| panic!("no fresh draws expected"))
            .unwrap();
        assert_eq!(out.completion_time, 3.0);
        assert_eq!(out.completed, vec![0]);
        assert_eq!(out.next_state.damaged.len(), 1);
        assert_eq!(out.next_state.damaged[0].residual_days, Some(4.0));
        assert_eq!(out.next_state.elapsed_days, 4.0);
        // Tank still down: only the well's node is served.
        assert_eq!(out.served_population, 21);
    }

    #[test]
    fn ties_complete_together_and_unassigned_keep_residuals() {
        let net = single_well_network();
        let sim = RecoverySim::new(&net, RepairModel::default(), 2);
        let mut s = RecoveryState {
            damaged: vec![
                damaged(0, DamageState::Minor),
                damaged(1, DamageState::Minor),
                damaged(2, DamageState::Complete),
            ],
            elapsed_days: 0.0,
        };
        s.damaged[2].residual_days = Some(0.5);
        let a = RepairAction::from_indices(3, &[0, 1]);
        let out = sim.simulate_transition_with(&s, &a, |_| Ok(2.0)).unwrap();
        assert_eq!(out.completed, vec![0, 1]);
        assert_eq!(out.next_state.damaged.len(), 1);
        assert_eq!(out.next_state.damaged[0].residual_days, Some(0.5));
    }

    #[test]
    fn invalid_actions() {
        let net = single_well_network();
        let sim = RecoverySim::new(&net, RepairModel::default(), 1);
        let s = state_with(2);
        let mut rng = stream(0, &[]);
        assert_eq!(
            sim.simulate_transition(&s, &RepairAction::from_indices(3, &[0]), &mut rng),
            Err(SimError::ActionLength {
                expected: 2,
                got: 3
            })
        );
        assert_eq!(
            sim.simulate_transition(&s, &RepairAction::from_indices(2, &[0, 1]), &mut rng),
            Err(SimError::ActionWeight {
                expected: 1,
                got: 2
            })
        );
        let done = RecoveryState {
            damaged: vec![],
            elapsed_days: 3.0,
        };
        assert!(is_terminal(&done));
        assert!(!is_terminal(&s));
    }

    #[test]
    fn transitions_replay_with_seed() {
        let net = WaterNetwork::gilroy_default();
        let sim = RecoverySim::new(&net, RepairModel::default(), 3);
        let s = RecoveryState {
            damaged: (0..6).map(|i| damaged(i, DamageState::Extensive)).collect(),
            elapsed_days: 0.0,
        };
        let a = RepairAction::from_indices(6, &[1, 3, 5]);
        let x = sim
            .simulate_transition(&s, &a, &mut stream(8, &[]))
            .unwrap();
        let y = sim
            .simulate_transition(&s, &a, &mut stream(8, &[]))
            .unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn completion_order_follows_rate_shares() {
        // Three fresh repairs: first completion is component i with
        // probability lambda_i / sum(lambda).
        let net = single_well_network();
        let sim = RecoverySim::new(&net, RepairModel::default(), 3);
        let s = RecoveryState {
            damaged: vec![
                damaged(0, DamageState::Moderate), // well, mean 1.5
                damaged(1, DamageState::Minor),    // tank, mean 1.2
                DamagedComponent {
                    component: 2,
                    state: DamageState::Complete,
                    expected_breaks: 2.0,
                    residual_days: None,
                },
            ],
            elapsed_days: 0.0,
        };
        let a = RepairAction::from_indices(3, &[0, 1, 2]);
        let rates = [1.0 / 1.5, 1.0 / 1.2, 1.0 / 2.0];
        let total: f64 = rates.iter().sum();
        let n = 60_000;
        let mut first = [0usize; 3];
        let mut mean_t = 0.0;
        let mut rng = stream(31, &[]);
        for _ in 0..n {
            let out = sim.simulate_transition(&s, &a, &mut rng).unwrap();
            first[out.completed[0]] += 1;
            mean_t += out.completion_time;
        }
        for i in 0..3 {
            let p = rates[i] / total;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((first[i] as f64 - n as f64 * p).abs() < 4.0 * sd);
        }
        assert!((mean_t / n as f64 - 1.0 / total).abs() / (1.0 / total) < 0.02);
    }

    #[test]
    fn residual_work_is_conserved() {
        let net = WaterNetwork::gilroy_default();
        let sim = RecoverySim::new(&net, RepairModel::default(), 3);
        let mut s = RecoveryState {
            damaged: (0..5).map(|i| damaged(i, DamageState::Moderate)).collect(),
            elapsed_days: 2.0,
        };
        s.damaged[4].residual_days = Some(0.7);
        let a = RepairAction::from_indices(5, &[0, 2, 4]);
        let mut rng = stream(3, &[]);
        let mut drawn = BTreeMap::new();
        let out = sim
            .simulate_transition_with(&s, &a, |d| {
                let t = sample_repair_time(
                    &sim.repair,
                    net.component(d.component).kind,
                    d.state,
                    0.0,
                    &mut rng,
                )?;
                drawn.insert(d.component, t);
                Ok(t)
            })
            .unwrap();
        let start: f64 = [0, 2]
            .iter()
            .map(|c| drawn[c])
            .chain(std::iter::once(0.7))
            .sum();
        let remaining: f64 = out
            .next_state
            .damaged
            .iter()
            .filter(|d| [0, 2, 4].contains(&d.component))
            .map(|d| d.residual_days.unwrap())
            .sum();
        assert_relative_eq!(
            start - remaining,
            out.completion_time * 3.0,
            max_relative = 1e-12
        );
    }
}
