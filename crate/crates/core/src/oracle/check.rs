//! Oracle checks shared by the `oracle-check` subcommand and the test suite.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use super::exact::{greedy_exact, RationalMdp};
use super::{bellman_residual, truncated_q, value_iteration, TabularPolicy, TabularSim};
use crate::planner::{uniform_rollout, Horizon, RolloutConfig, SampleStreams};
use crate::rng::stream;

pub const MAX_STATES: usize = 8;
pub const MAX_ACTIONS: usize = 4;
pub const GAMMA_NUM: i64 = 99;
pub const GAMMA_DEN: i64 = 100;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const TRUNCATION_HORIZONS: [usize; 4] = [1, 5, 10, 25];
pub const AGREEMENT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(serialize_with = "secs")]
    pub elapsed: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

fn gamma_exact() -> BigRational {
    BigRational::new(BigInt::from(GAMMA_NUM), BigInt::from(GAMMA_DEN))
}

fn gamma() -> f64 {
    GAMMA_NUM as f64 / GAMMA_DEN as f64
}

fn random_policy<R: Rng + ?Sized>(m: &RationalMdp, rng: &mut R) -> Vec<usize> {
    m.transitions
        .iter()
        .map(|a| rng.random_range(0..a.len()))
        .collect()
}

/// Value iteration converges to a Bellman residual of at most 1e-8, and the
/// greedy policy w.r.t. `Q^pi` never does worse than `pi` (exact arithmetic).
pub fn bellman_and_improvement(seed: u64, instances: usize) -> CheckReport {
    let start = Instant::now();
    let g = gamma_exact();
    let mut worst_residual: f64 = 0.0;
    let mut violations = 0usize;
    let mut states = 0usize;
    for k in 0..instances {
        let mut rng = stream(seed, &[k as u64]);
        let m = RationalMdp::random(&mut rng, MAX_STATES, MAX_ACTIONS);
        let t = m.to_tabular();
        let v = value_iteration(&t, gamma(), RESIDUAL_TOL).expect("valid instance");
        worst_residual = worst_residual.max(bellman_residual(&t, &v, gamma()));

        let pi = random_policy(&m, &mut rng);
        let v_pi = m.policy_value(&pi, &g);
        let improved = greedy_exact(&m.q_values(&v_pi, &g));
        let v_new = m.policy_value(&improved, &g);
        violations += v_new.iter().zip(&v_pi).filter(|(a, b)| a < b).count();
        states += m.num_states;
    }
    CheckReport {
        name: "bellman residual and policy improvement".into(),
        passed: worst_residual <= RESIDUAL_TOL && violations == 0,
        detail: format!(
            "{instances} MDPs, {states} states: max residual {worst_residual:.3e}, \
             {violations} improvement violations"
        ),
        elapsed: start.elapsed(),
    }
}

/// `|Q_pi - Q_pi^h| <= gamma^h R_max / (1 - gamma)` for every `(s, a)`.
pub fn truncation_bound(seed: u64, instances: usize) -> CheckReport {
    let start = Instant::now();
    let g = gamma_exact();
    let mut violations = 0usize;
    let mut checked = 0usize;
    let mut tightest: f64 = 0.0;
    for k in 0..instances {
        let mut rng = stream(seed, &[k as u64]);
        let m = RationalMdp::random(&mut rng, MAX_STATES, MAX_ACTIONS);
        let t = m.to_tabular();
        let pi = random_policy(&m, &mut rng);
        let q_inf = m.q_values(&m.policy_value(&pi, &g), &g);
        for h in TRUNCATION_HORIZONS {
            let q_h = truncated_q(&t, &pi, gamma(), h).expect("valid instance");
            let bound = gamma().powi(h as i32) * t.r_max / (1.0 - gamma());
            for (row_inf, row_h) in q_inf.iter().zip(&q_h) {
                for (qi, qh) in row_inf.iter().zip(row_h) {
                    let err = (qi.to_f64().expect("finite") - qh).abs();
                    checked += 1;
                    if err > bound {
                        violations += 1;
                    } else if bound > 0.0 {
                        tightest = tightest.max(err / bound);
                    }
                }
            }
        }
    }
    CheckReport {
        name: "truncation error bound".into(),
        passed: violations == 0,
        detail: format!(
            "{checked} (s, a, h) triples: {violations} violations, max error/bound {tightest:.3}"
        ),
        elapsed: start.elapsed(),
    }
}

/// Uniform rollout with `alpha` samples and horizon `h` picks an exact
/// argmax of `Q_pi(s, a, h)`. Only states with at least two actions count.
pub fn rollout_agreement(seed: u64, instances: usize, alpha: usize, h: usize) -> CheckReport {
    let start = Instant::now();
    let mut agree = 0usize;
    let mut total = 0usize;
    for k in 0..instances {
        let mut rng = stream(seed, &[k as u64]);
        let m = RationalMdp::random(&mut rng, MAX_STATES, MAX_ACTIONS);
        let t = m.to_tabular();
        let pi = random_policy(&m, &mut rng);
        let q_h = truncated_q(&t, &pi, gamma(), h).expect("valid instance");
        let sim = TabularSim { mdp: &t };
        let policy = TabularPolicy(pi);
        let config = RolloutConfig {
            horizon: Horizon::Steps(h),
            alpha,
            gamma: gamma(),
            action_cap: MAX_ACTIONS,
        };
        #[allow(clippy::needless_range_loop)]
        for s in 0..t.num_states {
            let n = t.num_actions(s);
            if n < 2 {
                continue;
            }
            let candidates: Vec<usize> = (0..n).collect();
            let streams = SampleStreams::new(seed ^ 0x5eed, (k * MAX_STATES + s) as u64);
            let d = uniform_rollout(&sim, &s, &candidates, &policy, &config, streams)
                .expect("tabular rollout cannot fail");
            let best = q_h[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            total += 1;
            // Exact ties make every tied action a correct choice.
            if q_h[s][d.index] >= best - 1e-12 {
                agree += 1;
            }
        }
    }
    let rate = if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    };
    CheckReport {
        name: "rollout agrees with exact argmax".into(),
        passed: rate >= AGREEMENT_THRESHOLD,
        detail: format!(
            "{agree}/{total} multi-action states ({:.1}%), alpha {alpha}, h {h}",
            100.0 * rate
        ),
        elapsed: start.elapsed(),
    }
}

/// The full suite at its default sizes.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    vec![
        bellman_and_improvement(seed, 100),
        truncation_bound(seed.wrapping_add(1), 100),
        rollout_agreement(seed.wrapping_add(2), 20, 10_000, 5),
    ]
}
