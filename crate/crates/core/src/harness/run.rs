use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig, NamedPlanner};
use super::curve::{auc, mean_and_se, mean_curve, RecoveryCurve};
use super::HarnessError;
use crate::hazard::{sample_scenario, DamageScenario};
use crate::planner::{
    ocba_rollout, par_map, uniform_rollout, BasePolicy, PlannerConfig, PlannerError, PlannerKind,
    Policy, SampleStreams,
};
use crate::rng::{derive_seed, stream, tag};
use crate::sim::{
    enumerate_actions, is_terminal, sample_repair_time, RecoverySim, RecoveryState, RepairAction,
    RepairModel,
};

/// One planner decision and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub scenario_id: usize,
    pub stage: usize,
    /// Day at which the decision was taken.
    pub elapsed_days: f64,
    /// Candidate actions evaluated; absent for the base policy.
    pub n: Option<usize>,
    pub simq_calls: u64,
    pub rounds: usize,
    pub assigned: Vec<String>,
    pub completed: Vec<String>,
    pub served_population: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRun {
    pub curve: RecoveryCurve,
    pub stages: Vec<StageRecord>,
}

/// A sampled initial damage scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCase {
    pub scenario_id: usize,
    pub seed: u64,
    pub damage: DamageScenario,
}

pub fn scenario_seed(master_seed: u64, scenario_id: usize) -> u64 {
    derive_seed(master_seed, &[tag::SCENARIO, scenario_id as u64])
}

/// Samples scenario `scenario_id` of an experiment.
pub fn sample_case(exp: &Experiment, scenario_id: usize) -> Result<ScenarioCase, HarnessError> {
    let seed = scenario_seed(exp.config.master_seed, scenario_id);
    let damage = sample_scenario(
        &exp.network,
        &exp.hazard.event,
        &exp.hazard,
        &mut stream(seed, &[]),
    )
    .map_err(|source| HarnessError::ScenarioSampling {
        scenario_id,
        seed,
        source,
    })?;
    Ok(ScenarioCase {
        scenario_id,
        seed,
        damage,
    })
}

pub fn sample_cases(exp: &Experiment) -> Result<Vec<ScenarioCase>, HarnessError> {
    (0..exp.config.num_scenarios)
        .map(|i| sample_case(exp, i))
        .collect()
}

/// What the planner spent on one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionCost {
    pub n: Option<usize>,
    pub simq_calls: u64,
    pub rounds: usize,
}

/// Chooses the crew assignment for `state`. Rollout planners evaluate the
/// enumerated (or sampled) assignments, always including the base policy's
/// choice so that rollout can only improve on it.
pub fn select_action(
    sim: &RecoverySim<'_>,
    state: &RecoveryState,
    planner: &PlannerConfig,
    seed: u64,
    stage: usize,
) -> Result<(RepairAction, DecisionCost), PlannerError> {
    let stage_tag = stage as u64;
    let policy = BasePolicy::new(planner.base_policy_kind);
    let base = policy.act(sim, state, &mut stream(seed, &[tag::BASE, stage_tag]))?;
    if planner.kind == PlannerKind::Base {
        let cost = DecisionCost {
            n: None,
            simq_calls: 0,
            rounds: 0,
        };
        return Ok((base, cost));
    }

    let mut candidates = enumerate_actions(
        state,
        sim.resources,
        planner.action_cap,
        &mut stream(seed, &[tag::CANDIDATES, stage_tag]),
    );
    if !candidates.contains(&base) {
        match candidates.last_mut() {
            Some(last) => *last = base,
            None => candidates.push(base),
        }
    }
    let streams = SampleStreams::new(derive_seed(seed, &[tag::PLANNER]), stage_tag);
    let decision = match planner.kind {
        PlannerKind::Tea => uniform_rollout(
            sim,
            state,
            &candidates,
            &policy,
            &planner.rollout(),
            streams,
        )?,
        _ => ocba_rollout(
            sim,
            state,
            &candidates,
            &policy,
            planner.horizon(),
            planner.gamma,
            &planner.ocba_for(candidates.len())?,
            streams,
        )?,
    };
    let cost = DecisionCost {
        n: Some(candidates.len()),
        simq_calls: decision.simq_calls,
        rounds: decision.rounds,
    };
    Ok((decision.action, cost))
}

/// Runs one scenario to full recovery under one planner.
///
/// The true duration of each repair is drawn from a stream keyed by the
/// scenario seed and the component, so every planner faces the same repair
/// times for the same component.
pub fn run_recovery(
    sim: &RecoverySim<'_>,
    scenario: &DamageScenario,
    scenario_id: usize,
    planner: &NamedPlanner,
    seed: u64,
) -> Result<RecoveryRun, PlannerError> {
    let mut state = sim.initial_state(scenario);
    let mut points = vec![(0.0, sim.served_population(&state))];
    let mut stages = Vec::new();
    let id = |i: usize| sim.network.component(i).id.clone();
    while !is_terminal(&state) {
        let stage = stages.len();
        let (action, cost) = select_action(sim, &state, &planner.planner, seed, stage)?;
        let assigned = action
            .indices()
            .map(|i| id(state.damaged[i].component))
            .collect();
        let out = sim.simulate_transition_with(&state, &action, |d| {
            let kind = sim.network.component(d.component).kind;
            let mut rng = stream(seed, &[tag::EXECUTE, d.component as u64]);
            sample_repair_time(&sim.repair, kind, d.state, d.expected_breaks, &mut rng)
        })?;
        stages.push(StageRecord {
            scenario_id,
            stage,
            elapsed_days: state.elapsed_days,
            n: cost.n,
            simq_calls: cost.simq_calls,
            rounds: cost.rounds,
            assigned,
            completed: out.completed.iter().map(|&c| id(c)).collect(),
            served_population: out.served_population,
        });
        points.push((out.next_state.elapsed_days, out.served_population));
        state = out.next_state;
    }
    Ok(RecoveryRun {
        curve: RecoveryCurve {
            scenario_id,
            planner: planner.name.clone(),
            points,
        },
        stages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub scenario_id: usize,
    pub seed: u64,
    pub num_damaged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult {
    pub name: String,
    pub config: PlannerConfig,
    pub curves: Vec<RecoveryCurve>,
    pub stages: Vec<StageRecord>,
    /// Per-scenario AUC over the batch horizon, in scenario order.
    pub aucs: Vec<f64>,
    pub auc_mean: f64,
    pub auc_se: f64,
    pub simq_total: u64,
    pub mean_curve: Vec<(f64, f64)>,
}

/// All planners on one common scenario set with a fixed crew count.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub config: ExperimentConfig,
    pub resources: usize,
    pub horizon_days: f64,
    pub total_population: u64,
    pub scenarios: Vec<ScenarioInfo>,
    pub planners: Vec<PlannerResult>,
}

impl BatchResult {
    pub fn planner(&self, name: &str) -> Option<&PlannerResult> {
        self.planners.iter().find(|p| p.name == name)
    }

    /// Mean and standard error of the per-scenario AUC difference `a - b`.
    pub fn paired_auc_difference(&self, a: &str, b: &str) -> Option<(f64, f64)> {
        let (a, b) = (self.planner(a)?, self.planner(b)?);
        let diffs: Vec<f64> = a.aucs.iter().zip(&b.aucs).map(|(x, y)| x - y).collect();
        Some(mean_and_se(&diffs))
    }
}

/// Runs every configured planner on the same scenarios with `resources` crews.
pub fn run_batch(exp: &Experiment, resources: usize) -> Result<BatchResult, HarnessError> {
    let cases = sample_cases(exp)?;
    let sim = RecoverySim::new(
        &exp.network,
        RepairModel::hazus(exp.hazard.pipe.days_per_break),
        resources,
    );
    let planners = &exp.config.planners;
    let jobs: Vec<(usize, usize)> = (0..planners.len())
        .flat_map(|p| (0..cases.len()).map(move |c| (p, c)))
        .collect();
    let runs = par_map(jobs.clone(), |(p, c)| {
        let case = &cases[c];
        run_recovery(
            &sim,
            &case.damage,
            case.scenario_id,
            &planners[p],
            case.seed,
        )
    });

    let mut per_planner: Vec<Vec<RecoveryRun>> = vec![Vec::new(); planners.len()];
    for ((p, c), run) in jobs.into_iter().zip(runs) {
        let run = run.map_err(|source| HarnessError::Scenario {
            scenario_id: cases[c].scenario_id,
            seed: cases[c].seed,
            planner: planners[p].name.clone(),
            source,
        })?;
        per_planner[p].push(run);
    }

    let horizon_days = exp.config.horizon_days.unwrap_or_else(|| {
        per_planner
            .iter()
            .flatten()
            .map(|r| r.curve.final_day())
            .fold(0.0, f64::max)
    });
    let step = exp.config.grid_step_days;
    let results = planners
        .iter()
        .zip(per_planner)
        .map(|(named, runs)| {
            let curves: Vec<RecoveryCurve> = runs.iter().map(|r| r.curve.clone()).collect();
            let aucs: Vec<f64> = curves.iter().map(|c| auc(c, horizon_days)).collect();
            let (auc_mean, auc_se) = mean_and_se(&aucs);
            let stages: Vec<StageRecord> = runs.into_iter().flat_map(|r| r.stages).collect();
            PlannerResult {
                name: named.name.clone(),
                config: named.planner.clone(),
                mean_curve: mean_curve(&curves, step, horizon_days),
                simq_total: stages.iter().map(|s| s.simq_calls).sum(),
                curves,
                stages,
                aucs,
                auc_mean,
                auc_se,
            }
        })
        .collect();

    Ok(BatchResult {
        config: exp.config.clone(),
        resources,
        horizon_days,
        total_population: exp.network.total_population(),
        scenarios: cases
            .iter()
            .map(|c| ScenarioInfo {
                scenario_id: c.scenario_id,
                seed: c.seed,
                num_damaged: c.damage.num_damaged(),
            })
            .collect(),
        planners: results,
    })
}

/// One batch per configured crew count.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<BatchResult>, HarnessError> {
    exp.config
        .resources
        .iter()
        .map(|&m| run_batch(exp, m))
        .collect()
}
