//! Random MDPs with rational data and exact policy evaluation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::index;
use rand::Rng;

use super::{Outcome, TabularMdp};

#[derive(Debug, Clone)]
pub struct RationalOutcome {
    pub next: usize,
    pub prob: BigRational,
    pub reward: BigRational,
}

/// MDP whose probabilities and rewards are exact rationals.
#[derive(Debug, Clone)]
pub struct RationalMdp {
    pub num_states: usize,
    pub transitions: Vec<Vec<Vec<RationalOutcome>>>,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl RationalMdp {
    /// Random MDP with 1..=`max_states` states and 1..=`max_actions` actions
    /// per state. Probabilities are integer weights normalized exactly;
    /// rewards are multiples of 1/10 in [-1, 1].
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_actions: usize) -> Self {
        let num_states = rng.random_range(1..=max_states);
        let transitions = (0..num_states)
            .map(|_| {
                let actions = rng.random_range(1..=max_actions);
                (0..actions)
                    .map(|_| {
                        let k = rng.random_range(1..=num_states);
                        let nexts = index::sample(rng, num_states, k).into_vec();
                        let weights: Vec<i64> =
                            nexts.iter().map(|_| rng.random_range(1..=9)).collect();
                        let total: i64 = weights.iter().sum();
                        nexts
                            .into_iter()
                            .zip(weights)
                            .map(|(next, w)| RationalOutcome {
                                next,
                                prob: ratio(w, total),
                                reward: ratio(rng.random_range(-10..=10), 10),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            num_states,
            transitions,
        }
    }

    pub fn r_max(&self) -> f64 {
        self.transitions
            .iter()
            .flatten()
            .flatten()
            .map(|o| o.reward.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn to_tabular(&self) -> TabularMdp {
        let transitions = self
            .transitions
            .iter()
            .map(|actions| {
                actions
                    .iter()
                    .map(|outs| {
                        outs.iter()
                            .map(|o| Outcome {
                                next: o.next,
                                prob: o.prob.to_f64().expect("finite"),
                                reward: o.reward.to_f64().expect("finite"),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TabularMdp {
            num_states: self.num_states,
            transitions,
            r_max: self.r_max(),
        }
    }

    fn backup(&self, s: usize, a: usize, v: &[BigRational], gamma: &BigRational) -> BigRational {
        let inner = self.transitions[s][a]
            .iter()
            .fold(BigRational::zero(), |acc, o| {
                acc + &o.prob * (&v[o.next] + &o.reward)
            });
        gamma * inner
    }

    /// Exact `V^pi`: solves `(I - gamma P_pi) V = gamma r_pi`.
    pub fn policy_value(&self, policy: &[usize], gamma: &BigRational) -> Vec<BigRational> {
        let n = self.num_states;
        let mut a = vec![vec![BigRational::zero(); n + 1]; n];
        for s in 0..n {
            a[s][s] = BigRational::one();
            let mut rhs = BigRational::zero();
            for o in &self.transitions[s][policy[s]] {
                a[s][o.next] -= gamma * &o.prob;
                rhs += &o.prob * &o.reward;
            }
            a[s][n] = gamma * rhs;
        }
        solve_augmented(a)
    }

    pub fn q_values(&self, v: &[BigRational], gamma: &BigRational) -> Vec<Vec<BigRational>> {
        (0..self.num_states)
            .map(|s| {
                (0..self.transitions[s].len())
                    .map(|a| self.backup(s, a, v, gamma))
                    .collect()
            })
            .collect()
    }
}

/// Argmax per row over exact values, lowest index on ties.
pub fn greedy_exact(q: &[Vec<BigRational>]) -> Vec<usize> {
    q.iter()
        .map(|row| {
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Gauss-Jordan elimination on an `n x (n+1)` augmented matrix.
fn solve_augmented(mut a: Vec<Vec<BigRational>>) -> Vec<BigRational> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("I - gamma P is non-singular");
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                #[allow(clippy::needless_range_loop)]
                for c in col..=n {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::policy_value;
    use crate::rng::stream;

    #[test]
    fn exact_matches_iterative_evaluation() {
        let mut rng = stream(12, &[]);
        let gamma = ratio(9, 10);
        for _ in 0..10 {
            let m = RationalMdp::random(&mut rng, 6, 3);
            let pi: Vec<usize> = m.transitions.iter().map(|a| a.len() - 1).collect();
            let exact = m.policy_value(&pi, &gamma);
            let approx = policy_value(&m.to_tabular(), &pi, 0.9, 1e-13).unwrap();
            for (e, a) in exact.iter().zip(&approx) {
                assert!((e.to_f64().unwrap() - a).abs() < 1e-10);
            }
        }
    }
}
