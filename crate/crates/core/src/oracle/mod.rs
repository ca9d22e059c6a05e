//! Exact tabular MDP machinery, used as a correctness oracle for the planner.
//!
//! Rewards sit inside the discount, matching the backup
//! `V(s) = max_a gamma * sum_s' P(s'|s,a) [V(s') + R(s,a,s')]`. Under this
//! convention the expected SimQ return equals `Q(s,a,h) / gamma`, so the two
//! rank actions identically.

pub mod check;
pub mod exact;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{Policy, SimModel};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("state {0} has no actions")]
    NoActions(usize),
    #[error("probabilities of ({state}, {action}) sum to {sum}")]
    Probabilities {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("({state}, {action}) leads to unknown state {next}")]
    UnknownState {
        state: usize,
        action: usize,
        next: usize,
    },
    #[error("reward {reward} at ({state}, {action}) exceeds r_max {r_max}")]
    RewardBound {
        state: usize,
        action: usize,
        reward: f64,
        r_max: f64,
    },
    #[error("gamma must lie in (0, 1), got {0}")]
    Gamma(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("policy covers {got} states, MDP has {expected}")]
    PolicyLength { expected: usize, got: usize },
    #[error("policy picks action {action} in state {state}, which has only {available}")]
    PolicyAction {
        state: usize,
        action: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Finite MDP with explicit transition lists: `transitions[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub transitions: Vec<Vec<Vec<Outcome>>>,
    pub r_max: f64,
}

impl TabularMdp {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.transitions[s].len()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        for (s, actions) in self.transitions.iter().enumerate() {
            if actions.is_empty() {
                return Err(OracleError::NoActions(s));
            }
            for (a, outcomes) in actions.iter().enumerate() {
                let mut sum = 0.0;
                for o in outcomes {
                    if o.next >= self.num_states {
                        return Err(OracleError::UnknownState {
                            state: s,
                            action: a,
                            next: o.next,
                        });
                    }
                    if o.reward.abs() > self.r_max {
                        return Err(OracleError::RewardBound {
                            state: s,
                            action: a,
                            reward: o.reward,
                            r_max: self.r_max,
                        });
                    }
                    if o.prob < 0.0 {
                        return Err(OracleError::Probabilities {
                            state: s,
                            action: a,
                            sum: o.prob,
                        });
                    }
                    sum += o.prob;
                }
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(OracleError::Probabilities {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        if self.transitions.len() != self.num_states {
            return Err(OracleError::NoActions(self.transitions.len()));
        }
        Ok(())
    }

    fn check_policy(&self, policy: &[usize]) -> Result<(), OracleError> {
        if policy.len() != self.num_states {
            return Err(OracleError::PolicyLength {
                expected: self.num_states,
                got: policy.len(),
            });
        }
        for (s, &a) in policy.iter().enumerate() {
            if a >= self.num_actions(s) {
                return Err(OracleError::PolicyAction {
                    state: s,
                    action: a,
                    available: self.num_actions(s),
                });
            }
        }
        Ok(())
    }

    /// `gamma * E[V(s') + R]` for one state-action pair.
    fn backup(&self, s: usize, a: usize, v: &[f64], gamma: f64) -> f64 {
        gamma
            * self.transitions[s][a]
                .iter()
                .map(|o| o.prob * (v[o.next] + o.reward))
                .sum::<f64>()
    }
}

fn check_gamma_tol(gamma: f64, tol: f64) -> Result<(), OracleError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(OracleError::Gamma(gamma));
    }
    if !(tol > 0.0) {
        return Err(OracleError::Tolerance(tol));
    }
    Ok(())
}

/// One Bellman optimality backup.
pub fn bellman_backup(mdp: &TabularMdp, v: &[f64], gamma: f64) -> Vec<f64> {
    (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| mdp.backup(s, a, v, gamma))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Sup-norm of `T V - V`.
pub fn bellman_residual(mdp: &TabularMdp, v: &[f64], gamma: f64) -> f64 {
    bellman_backup(mdp, v, gamma)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Value iteration from `V = 0` until successive iterates differ by at most
/// `tol`. Also returns the sup-norm change of every sweep.
pub fn value_iteration_trace(
    mdp: &TabularMdp,
    gamma: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
    mdp.validate()?;
    check_gamma_tol(gamma, tol)?;
    let mut v = vec![0.0; mdp.num_states];
    let mut deltas = Vec::new();
    loop {
        let next = bellman_backup(mdp, &v, gamma);
        let delta = sup_diff(&next, &v);
        deltas.push(delta);
        v = next;
        if delta <= tol {
            return Ok((v, deltas));
        }
    }
}

pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> Result<Vec<f64>, OracleError> {
    value_iteration_trace(mdp, gamma, tol).map(|(v, _)| v)
}

/// `Q(s,a) = gamma * sum P(s'|s,a) [V(s') + R(s,a,s')]`.
pub fn q_from_value(mdp: &TabularMdp, v: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| mdp.backup(s, a, v, gamma))
                .collect()
        })
        .collect()
}

/// Value of a fixed deterministic policy, by fixed-point iteration.
pub fn policy_value(
    mdp: &TabularMdp,
    policy: &[usize],
    gamma: f64,
    tol: f64,
) -> Result<Vec<f64>, OracleError> {
    mdp.validate()?;
    mdp.check_policy(policy)?;
    check_gamma_tol(gamma, tol)?;
    let mut v = vec![0.0; mdp.num_states];
    loop {
        let next: Vec<f64> = (0..mdp.num_states)
            .map(|s| mdp.backup(s, policy[s], &v, gamma))
            .collect();
        let delta = sup_diff(&next, &v);
        v = next;
        if delta <= tol {
            return Ok(v);
        }
    }
}

/// Argmax per row, lowest index on ties.
pub fn greedy_policy(q: &[Vec<f64>]) -> Vec<usize> {
    q.iter()
        .map(|row| {
            let mut best = 0;
            for (a, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// h-horizon Q of `policy`: take `a`, then follow the policy for `h - 1`
/// more epochs, in the same discount convention as [`q_from_value`].
pub fn truncated_q(
    mdp: &TabularMdp,
    policy: &[usize],
    gamma: f64,
    h: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    mdp.validate()?;
    mdp.check_policy(policy)?;
    check_gamma_tol(gamma, 0.5)?;
    let mut v = vec![0.0; mdp.num_states];
    for _ in 1..h {
        v = (0..mdp.num_states)
            .map(|s| mdp.backup(s, policy[s], &v, gamma))
            .collect();
    }
    Ok(q_from_value(mdp, &v, gamma))
}

/// A tabular MDP driven through the simulation interface.
#[derive(Debug, Clone)]
pub struct TabularSim<'a> {
    pub mdp: &'a TabularMdp,
}

impl SimModel for TabularSim<'_> {
    type State = usize;
    type Action = usize;
    type Error = std::convert::Infallible;

    fn is_terminal(&self, _state: &usize) -> bool {
        false
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &usize,
        action: &usize,
        rng: &mut R,
    ) -> Result<(usize, f64), Self::Error> {
        let outcomes = &self.mdp.transitions[*state][*action];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for o in outcomes {
            acc += o.prob;
            if u < acc {
                return Ok((o.next, o.reward));
            }
        }
        let last = outcomes.last().expect("validated MDP");
        Ok((last.next, last.reward))
    }
}

/// Deterministic tabular policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy(pub Vec<usize>);

impl<'a> Policy<TabularSim<'a>> for TabularPolicy {
    fn act<R: Rng + ?Sized>(
        &self,
        _model: &TabularSim<'a>,
        state: &usize,
        _rng: &mut R,
    ) -> Result<usize, std::convert::Infallible> {
        Ok(self.0[*state])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn det(next: usize, reward: f64) -> Vec<Outcome> {
        vec![Outcome {
            next,
            prob: 1.0,
            reward,
        }]
    }

    fn self_loop() -> TabularMdp {
        TabularMdp {
            num_states: 1,
            transitions: vec![vec![det(0, 1.0)]],
            r_max: 1.0,
        }
    }

    /// s0 -> s1 pays 1, s1 -> s0 pays 2; one action each.
    fn two_cycle() -> TabularMdp {
        TabularMdp {
            num_states: 2,
            transitions: vec![vec![det(1, 1.0)], vec![det(0, 2.0)]],
            r_max: 2.0,
        }
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mut m = two_cycle();
        for s in &mut m.transitions {
            s[0][0].reward = 0.0;
        }
        assert_eq!(value_iteration(&m, 0.9, 1e-12).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            policy_value(&m, &[0, 0], 0.9, 1e-12).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn self_loop_fixed_point() {
        // V = gamma (1 + V)  =>  V = gamma / (1 - gamma) = 99.
        let v = value_iteration(&self_loop(), 0.99, 1e-10).unwrap();
        assert!((v[0] - 99.0).abs() <= 1e-10 * 0.99 / 0.01);
    }

    #[test]
    fn two_state_chain_matches_linear_solve() {
        let g: f64 = 0.99;
        // V0 = g(1 + V1), V1 = g(2 + V0), solved by substitution.
        let v0 = (g + 2.0 * g * g) / (1.0 - g * g);
        let v1 = g * (2.0 + v0);
        let tol = 1e-10;
        let v = value_iteration(&two_cycle(), g, tol).unwrap();
        let bound = tol * g / (1.0 - g);
        assert!((v[0] - v0).abs() <= bound && (v[1] - v1).abs() <= bound);
        let p = policy_value(&two_cycle(), &[0, 0], g, tol).unwrap();
        assert!((p[0] - v0).abs() <= bound && (p[1] - v1).abs() <= bound);
    }

    #[test]
    fn q_cases() {
        let m = TabularMdp {
            num_states: 2,
            transitions: vec![vec![det(1, 3.0), det(0, -1.0)], vec![det(1, 0.5)]],
            r_max: 3.0,
        };
        let q = q_from_value(&m, &[0.0, 0.0], 0.9);
        assert_relative_eq!(q[0][0], 2.7);
        assert_relative_eq!(q[0][1], -0.9);
        assert_relative_eq!(q[1][0], 0.45);
        // Hand case with V = (1, 2): Q(0,0) = 0.9 (2 + 3), Q(0,1) = 0.9 (1 - 1).
        let q = q_from_value(&m, &[1.0, 2.0], 0.9);
        assert_relative_eq!(q[0][0], 4.5);
        assert_relative_eq!(q[0][1], 0.0);
        let v = value_iteration(&m, 0.9, 1e-12).unwrap();
        let q = q_from_value(&m, &v, 0.9);
        for s in 0..2 {
            let best = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((best - v[s]).abs() <= 1e-11);
        }
    }

    #[test]
    fn single_action_policy_value_equals_optimum() {
        let v = value_iteration(&two_cycle(), 0.95, 1e-12).unwrap();
        let p = policy_value(&two_cycle(), &[0, 0], 0.95, 1e-12).unwrap();
        for s in 0..2 {
            assert!((v[s] - p[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_ties_and_maxima() {
        assert_eq!(
            greedy_policy(&[vec![1.0, 3.0, 2.0], vec![0.0, -1.0]]),
            vec![1, 0]
        );
        assert_eq!(greedy_policy(&[vec![2.0, 2.0, 2.0]]), vec![0]);
    }

    #[test]
    fn contraction_rate() {
        let m = exact::RationalMdp::random(&mut crate::rng::stream(3, &[]), 6, 3).to_tabular();
        let (_, deltas) = value_iteration_trace(&m, 0.9, 1e-10).unwrap();
        for w in deltas.windows(2) {
            assert!(w[1] <= 0.9 * w[0] + 1e-12);
        }
    }

    #[test]
    fn truncation_horizon_one_is_immediate_reward() {
        let m = two_cycle();
        let q = truncated_q(&m, &[0, 0], 0.9, 1).unwrap();
        assert_relative_eq!(q[0][0], 0.9);
        assert_relative_eq!(q[1][0], 1.8);
        let q = truncated_q(&m, &[0, 0], 0.9, 2).unwrap();
        assert_relative_eq!(q[0][0], 0.9 * (1.0 + 0.9 * 2.0));
    }

    #[test]
    fn validation() {
        let mut m = two_cycle();
        m.transitions[0][0][0].prob = 0.7;
        assert!(matches!(
            m.validate(),
            Err(OracleError::Probabilities { .. })
        ));
        let mut m = two_cycle();
        m.transitions[1][0][0].next = 5;
        assert!(value_iteration(&m, 0.9, 1e-6).is_err());
        assert!(value_iteration(&two_cycle(), 1.0, 1e-6).is_err());
        assert!(policy_value(&two_cycle(), &[0], 0.9, 1e-6).is_err());
    }

    #[test]
    fn fixture_format() {
        let text = r#"{"num_states": 1, "r_max": 1.0,
            "transitions": [[[{"next": 0, "prob": 1.0, "reward": 1.0}]]]}"#;
        assert_eq!(TabularMdp::from_json(text).unwrap(), self_loop());
    }
}
