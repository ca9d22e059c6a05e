//! Rollout with total equal allocation or OCBA.

use serde::{Deserialize, Serialize};

use super::config::{OcbaConfig, RolloutConfig};
use super::ocba::{best_index, ocba_allocate, QEstimate};
use super::{par_map, PlannerError, Policy, SimModel};
use crate::rng::{stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Simulate the action, then follow the policy for `h - 1` more epochs.
    Steps(usize),
    /// Follow the policy until a terminal state.
    Complete,
}

/// Per-sample stream derivation: `(seed, stage, action, sample)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleStreams {
    pub seed: u64,
    pub stage: u64,
}

impl SampleStreams {
    pub fn new(seed: u64, stage: u64) -> Self {
        Self { seed, stage }
    }

    pub fn rng(&self, action_index: usize, sample_index: u64) -> StreamRng {
        stream(self.seed, &[self.stage, action_index as u64, sample_index])
    }
}

/// One discounted return of taking `action` and then following `policy`.
pub fn sim_q<M, P, R>(
    model: &M,
    state: &M::State,
    action: &M::Action,
    policy: &P,
    horizon: Horizon,
    gamma: f64,
    rng: &mut R,
) -> Result<f64, PlannerError>
where
    M: SimModel,
    P: Policy<M>,
    R: rand::Rng + ?Sized,
{
    let (mut s, mut total) = model.step(state, action, rng).map_err(PlannerError::sim)?;
    let extra = match horizon {
        Horizon::Steps(h) => h.saturating_sub(1),
        Horizon::Complete => usize::MAX,
    };
    let mut discount = 1.0;
    for _ in 0..extra {
        if model.is_terminal(&s) {
            break;
        }
        discount *= gamma;
        let a = policy.act(model, &s, rng).map_err(PlannerError::sim)?;
        let (next, r) = model.step(&s, &a, rng).map_err(PlannerError::sim)?;
        total += discount * r;
        s = next;
    }
    Ok(total)
}

/// Outcome of one rollout stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutDecision<A> {
    pub index: usize,
    pub action: A,
    pub estimates: Vec<QEstimate>,
    pub simq_calls: u64,
    /// OCBA allocation rounds after the warm-up.
    pub rounds: usize,
}

/// Runs the `(action, sample)` jobs and folds their returns into `estimates`
/// in job order, so results do not depend on scheduling.
#[allow(clippy::too_many_arguments)]
fn sample_jobs<M, P>(
    model: &M,
    state: &M::State,
    candidates: &[M::Action],
    policy: &P,
    horizon: Horizon,
    gamma: f64,
    streams: SampleStreams,
    jobs: Vec<(usize, u64)>,
    estimates: &mut [QEstimate],
) -> Result<u64, PlannerError>
where
    M: SimModel,
    P: Policy<M>,
{
    let results = par_map(jobs.clone(), |(i, j)| {
        let mut rng = streams.rng(i, j);
        sim_q(
            model,
            state,
            &candidates[i],
            policy,
            horizon,
            gamma,
            &mut rng,
        )
    });
    let mut calls = 0;
    for ((i, _), r) in jobs.into_iter().zip(results) {
        estimates[i].push(r?);
        calls += 1;
    }
    Ok(calls)
}

fn decide<A: Clone>(
    candidates: &[A],
    estimates: Vec<QEstimate>,
    simq_calls: u64,
    rounds: usize,
) -> RolloutDecision<A> {
    let index = best_index(&estimates);
    RolloutDecision {
        index,
        action: candidates[index].clone(),
        estimates,
        simq_calls,
        rounds,
    }
}

/// Uniform rollout: `alpha` SimQ samples per candidate, then argmax of means.
pub fn uniform_rollout<M, P>(
    model: &M,
    state: &M::State,
    candidates: &[M::Action],
    policy: &P,
    config: &RolloutConfig,
    streams: SampleStreams,
) -> Result<RolloutDecision<M::Action>, PlannerError>
where
    M: SimModel,
    P: Policy<M>,
{
    if candidates.is_empty() {
        return Err(PlannerError::NoCandidates);
    }
    let mut estimates: Vec<QEstimate> = (0..candidates.len()).map(QEstimate::new).collect();
    let jobs = (0..candidates.len())
        .flat_map(|i| (0..config.alpha as u64).map(move |j| (i, j)))
        .collect();
    let calls = sample_jobs(
        model,
        state,
        candidates,
        policy,
        config.horizon,
        config.gamma,
        streams,
        jobs,
        &mut estimates,
    )?;
    Ok(decide(candidates, estimates, calls, 0))
}

/// OCBA rollout: `n0` warm-up samples per candidate, then rounds of
/// `max(1, round(delta_fraction * n))` samples allocated by [`ocba_allocate`]
/// until exactly `ocba.budget` SimQ calls have been made.
#[allow(clippy::too_many_arguments)]
pub fn ocba_rollout<M, P>(
    model: &M,
    state: &M::State,
    candidates: &[M::Action],
    policy: &P,
    horizon: Horizon,
    gamma: f64,
    ocba: &OcbaConfig,
    streams: SampleStreams,
) -> Result<RolloutDecision<M::Action>, PlannerError>
where
    M: SimModel,
    P: Policy<M>,
{
    let n = candidates.len();
    if n == 0 {
        return Err(PlannerError::NoCandidates);
    }
    let minimum = (n * ocba.n0) as u64;
    if ocba.budget < minimum {
        return Err(PlannerError::InfeasibleBudget {
            budget: ocba.budget,
            minimum,
        });
    }
    let mut estimates: Vec<QEstimate> = (0..n).map(QEstimate::new).collect();
    let warmup = (0..n)
        .flat_map(|i| (0..ocba.n0 as u64).map(move |j| (i, j)))
        .collect();
    let mut spent = sample_jobs(
        model,
        state,
        candidates,
        policy,
        horizon,
        gamma,
        streams,
        warmup,
        &mut estimates,
    )?;
    if n == 1 {
        return Ok(decide(candidates, estimates, spent, 0));
    }

    let mut rounds = 0;
    while spent < ocba.budget {
        let delta = ocba.increment(n).min(ocba.budget - spent);
        let extra = ocba_allocate(&estimates, delta, ocba)?;
        let jobs: Vec<(usize, u64)> = extra
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| {
                let start = estimates[i].count;
                (start..start + k).map(move |j| (i, j))
            })
            .collect();
        spent += sample_jobs(
            model,
            state,
            candidates,
            policy,
            horizon,
            gamma,
            streams,
            jobs,
            &mut estimates,
        )?;
        rounds += 1;
    }
    Ok(decide(candidates, estimates, spent, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::convert::Infallible;
    use std::sync::atomic::{AtomicU64, Ordering};

    /// Two-armed toy: action `a` pays `mean[a] + U(-spread, spread)` and ends
    /// the episode. Counts every step.
    struct Arms {
        mean: Vec<f64>,
        spread: f64,
        steps: AtomicU64,
    }

    impl SimModel for Arms {
        type State = u8;
        type Action = usize;
        type Error = Infallible;

        fn is_terminal(&self, s: &u8) -> bool {
            *s == 1
        }

        fn step<R: Rng + ?Sized>(
            &self,
            _s: &u8,
            a: &usize,
            rng: &mut R,
        ) -> Result<(u8, f64), Infallible> {
            self.steps.fetch_add(1, Ordering::Relaxed);
            let noise = rng.random_range(-self.spread..=self.spread);
            Ok((1, self.mean[*a] + noise))
        }
    }

    struct Fixed;
    impl Policy<Arms> for Fixed {
        fn act<R: Rng + ?Sized>(&self, _: &Arms, _: &u8, _: &mut R) -> Result<usize, Infallible> {
            Ok(0)
        }
    }

    /// Chain that never terminates, reward 1 per step.
    struct Chain;
    impl SimModel for Chain {
        type State = u32;
        type Action = ();
        type Error = Infallible;
        fn is_terminal(&self, _: &u32) -> bool {
            false
        }
        fn step<R: Rng + ?Sized>(
            &self,
            s: &u32,
            _: &(),
            _: &mut R,
        ) -> Result<(u32, f64), Infallible> {
            Ok((s + 1, 1.0))
        }
    }
    struct Unit;
    impl Policy<Chain> for Unit {
        fn act<R: Rng + ?Sized>(&self, _: &Chain, _: &u32, _: &mut R) -> Result<(), Infallible> {
            Ok(())
        }
    }

    fn arms(mean: Vec<f64>, spread: f64) -> Arms {
        Arms {
            mean,
            spread,
            steps: AtomicU64::new(0),
        }
    }

    #[test]
    fn sim_q_discounts_and_truncates() {
        let mut rng = stream(0, &[]);
        let q = |h| {
            sim_q(
                &Chain,
                &0,
                &(),
                &Unit,
                Horizon::Steps(h),
                0.9,
                &mut stream(0, &[]),
            )
            .unwrap()
        };
        assert_eq!(q(1), 1.0);
        assert!((q(3) - (1.0 + 0.9 + 0.81)).abs() < 1e-15);
        // Terminal after the first step: any horizon equals h = 1.
        let m = arms(vec![2.0], 0.0);
        for h in [1, 2, 10] {
            let v = sim_q(&m, &0, &0, &Fixed, Horizon::Steps(h), 0.99, &mut rng).unwrap();
            assert_eq!(v, 2.0);
        }
    }

    #[test]
    fn uniform_counts_and_dominance() {
        let m = arms(vec![1.0, 5.0, 2.0], 0.5);
        let cfg = RolloutConfig {
            horizon: Horizon::Steps(1),
            alpha: 7,
            gamma: 0.99,
            action_cap: 10,
        };
        let d =
            uniform_rollout(&m, &0, &[0, 1, 2], &Fixed, &cfg, SampleStreams::new(1, 0)).unwrap();
        assert_eq!(d.index, 1);
        assert_eq!(d.simq_calls, 21);
        assert_eq!(m.steps.load(Ordering::Relaxed), 21);
        assert!(d.estimates.iter().all(|e| e.count == 7));
    }

    #[test]
    fn uniform_single_candidate_still_samples() {
        let m = arms(vec![1.0], 0.0);
        let cfg = RolloutConfig {
            horizon: Horizon::Steps(3),
            alpha: 4,
            gamma: 0.99,
            action_cap: 10,
        };
        let d = uniform_rollout(&m, &0, &[0], &Fixed, &cfg, SampleStreams::new(1, 0)).unwrap();
        assert_eq!((d.index, d.simq_calls), (0, 4));
    }

    #[test]
    fn ties_pick_lowest_index() {
        let m = arms(vec![3.0, 3.0, 3.0], 0.0);
        let cfg = RolloutConfig {
            horizon: Horizon::Steps(1),
            alpha: 2,
            gamma: 0.99,
            action_cap: 10,
        };
        let d =
            uniform_rollout(&m, &0, &[0, 1, 2], &Fixed, &cfg, SampleStreams::new(3, 0)).unwrap();
        assert_eq!(d.index, 0);
    }

    #[test]
    fn ocba_spends_exactly_the_budget() {
        for (n, budget) in [(2usize, 10u64), (5, 25), (5, 26), (8, 173), (13, 500)] {
            let m = arms((0..n).map(|i| i as f64 * 0.3).collect(), 1.0);
            let cands: Vec<usize> = (0..n).collect();
            let cfg = OcbaConfig::with_budget(budget);
            let d = ocba_rollout(
                &m,
                &0,
                &cands,
                &Fixed,
                Horizon::Steps(1),
                0.99,
                &cfg,
                SampleStreams::new(9, 2),
            )
            .unwrap();
            assert_eq!(d.simq_calls, budget);
            assert_eq!(m.steps.load(Ordering::Relaxed), budget);
            assert_eq!(d.estimates.iter().map(|e| e.count).sum::<u64>(), budget);
        }
    }

    #[test]
    fn ocba_single_candidate_stops_after_warmup() {
        let m = arms(vec![1.0], 0.1);
        let cfg = OcbaConfig::with_budget(500);
        let d = ocba_rollout(
            &m,
            &0,
            &[0],
            &Fixed,
            Horizon::Steps(1),
            0.99,
            &cfg,
            SampleStreams::new(9, 2),
        )
        .unwrap();
        assert_eq!((d.index, d.simq_calls, d.rounds), (0, 5, 0));
    }

    #[test]
    fn ocba_rejects_small_budget() {
        let m = arms(vec![1.0, 2.0, 3.0], 0.1);
        let cfg = OcbaConfig::with_budget(14);
        let err = ocba_rollout(
            &m,
            &0,
            &[0, 1, 2],
            &Fixed,
            Horizon::Steps(1),
            0.99,
            &cfg,
            SampleStreams::new(9, 2),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PlannerError::InfeasibleBudget {
                budget: 14,
                minimum: 15
            }
        ));
        assert!(err.to_string().contains("15"));
    }

    #[test]
    fn ocba_and_tea_agree_on_dominant_action() {
        // Every return of action 2 exceeds every return of the others.
        let m = arms(vec![0.0, 1.0, 10.0, 2.0], 0.4);
        let cands = [0, 1, 2, 3];
        let tea = RolloutConfig {
            horizon: Horizon::Steps(1),
            alpha: 25,
            gamma: 0.99,
            action_cap: 10,
        };
        let a = uniform_rollout(&m, &0, &cands, &Fixed, &tea, SampleStreams::new(4, 0)).unwrap();
        let o = ocba_rollout(
            &m,
            &0,
            &cands,
            &Fixed,
            Horizon::Steps(1),
            0.99,
            &OcbaConfig::with_budget(100),
            SampleStreams::new(4, 0),
        )
        .unwrap();
        assert_eq!(a.index, 2);
        assert_eq!(o.index, 2);
    }

    #[test]
    fn ocba_focuses_on_contenders() {
        let m = arms(vec![0.0, 5.0, 5.2, -3.0], 1.0);
        let d = ocba_rollout(
            &m,
            &0,
            &[0, 1, 2, 3],
            &Fixed,
            Horizon::Steps(1),
            0.99,
            &OcbaConfig::with_budget(400),
            SampleStreams::new(5, 0),
        )
        .unwrap();
        let c: Vec<u64> = d.estimates.iter().map(|e| e.count).collect();
        assert!(c[1] + c[2] > 300, "{c:?}");
    }
}
