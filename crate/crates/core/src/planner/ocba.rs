//! Optimal computing budget allocation over candidate actions.

use serde::{Deserialize, Serialize};

use super::config::OcbaConfig;
use super::PlannerError;
use crate::hazard::normal_cdf;

/// Running mean and variance of the SimQ returns of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub action_index: usize,
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl QEstimate {
    pub fn new(action_index: usize) -> Self {
        Self {
            action_index,
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Sample variance; zero until two samples exist.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

/// Index of the highest mean, lowest index on ties.
pub(crate) fn best_index(estimates: &[QEstimate]) -> usize {
    let mut best = 0;
    for (i, e) in estimates.iter().enumerate().skip(1) {
        if e.mean > estimates[best].mean {
            best = i;
        }
    }
    best
}

/// Asymptotically optimal allocation ratios (unnormalized).
fn target_ratios(estimates: &[QEstimate], cfg: &OcbaConfig) -> Vec<f64> {
    let b = best_index(estimates);
    let var: Vec<f64> = estimates
        .iter()
        .map(|e| e.variance().max(cfg.epsilon_var))
        .collect();
    let mut ratios: Vec<f64> = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if i == b {
                0.0
            } else {
                let gap = (estimates[b].mean - e.mean).max(cfg.epsilon_delta);
                var[i] / (gap * gap)
            }
        })
        .collect();
    let sum: f64 = ratios
        .iter()
        .zip(&var)
        .enumerate()
        .filter(|(i, _)| *i != b)
        .map(|(_, (r, v))| r * r / v)
        .sum();
    ratios[b] = var[b].sqrt() * sum.sqrt();
    ratios
}

/// Splits `increment` additional samples across the candidates.
///
/// Targets follow the closed-form ratios for the new total; candidates
/// already above their target keep their samples and are excluded, and the
/// real-valued shares are rounded by largest remainder so the result sums to
/// exactly `increment`.
pub fn ocba_allocate(
    estimates: &[QEstimate],
    increment: u64,
    cfg: &OcbaConfig,
) -> Result<Vec<u64>, PlannerError> {
    let k = estimates.len();
    if k < 2 {
        return Err(PlannerError::TooFewAlternatives(k));
    }
    let ratios = target_ratios(estimates, cfg);
    let counts: Vec<f64> = estimates.iter().map(|e| e.count as f64).collect();
    let total = counts.iter().sum::<f64>() + increment as f64;

    let mut active = vec![true; k];
    let mut targets = vec![0.0; k];
    loop {
        let fixed: f64 = (0..k).filter(|&i| !active[i]).map(|i| counts[i]).sum();
        let ratio_sum: f64 = (0..k).filter(|&i| active[i]).map(|i| ratios[i]).sum();
        let scale = (total - fixed) / ratio_sum;
        let mut changed = false;
        for i in 0..k {
            if active[i] {
                targets[i] = ratios[i] * scale;
                if targets[i] < counts[i] {
                    active[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let extra: Vec<f64> = (0..k)
        .map(|i| {
            if active[i] {
                (targets[i] - counts[i]).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut alloc: Vec<u64> = extra.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = alloc.iter().sum();
    let mut remaining = increment.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let fa = extra[a] - extra[a].floor();
        let fb = extra[b] - extra[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    // Floating error can leave the floors one short or over; both loops
    // restore exact conservation.
    let mut cursor = order.iter().cycle();
    while remaining > 0 {
        let &i = cursor.next().expect("non-empty");
        alloc[i] += 1;
        remaining -= 1;
    }
    let mut over = alloc.iter().sum::<u64>().saturating_sub(increment);
    for &i in order.iter().rev() {
        while over > 0 && alloc[i] > 0 {
            alloc[i] -= 1;
            over -= 1;
        }
    }
    Ok(alloc)
}

/// Bonferroni-style lower bound on the probability of correct selection.
pub fn approx_pcs(estimates: &[QEstimate]) -> f64 {
    if estimates.len() < 2 {
        return 1.0;
    }
    let b = best_index(estimates);
    let best = &estimates[b];
    let best_term = best.variance() / best.count.max(1) as f64;
    estimates
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != b)
        .map(|(_, e)| {
            let gap = best.mean - e.mean;
            let sd = (best_term + e.variance() / e.count.max(1) as f64).sqrt();
            if sd > 0.0 {
                normal_cdf(gap / sd)
            } else if gap > 0.0 {
                1.0
            } else {
                0.5
            }
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn est(i: usize, count: u64, mean: f64, var: f64) -> QEstimate {
        QEstimate {
            action_index: i,
            count,
            mean,
            m2: var * (count - 1) as f64,
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [3.0, 1.5, 9.25, -2.0, 4.0];
        let mut q = QEstimate::new(0);
        xs.iter().for_each(|&x| q.push(x));
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert_relative_eq!(q.mean, mean, max_relative = 1e-14);
        assert_relative_eq!(q.variance(), var, max_relative = 1e-14);
    }

    #[test]
    fn two_alternatives_equal_variance_split_evenly() {
        let cfg = OcbaConfig::with_budget(0);
        let e = [est(0, 5, 10.0, 4.0), est(1, 5, 8.0, 4.0)];
        assert_eq!(ocba_allocate(&e, 10, &cfg).unwrap(), vec![5, 5]);
    }

    #[test]
    fn two_alternatives_follow_sd_ratio() {
        // N_b : N_2 = sigma_b : sigma_2 = 1 : 3
        let cfg = OcbaConfig::with_budget(0);
        let e = [est(0, 5, 10.0, 1.0), est(1, 5, 8.0, 9.0)];
        assert_eq!(ocba_allocate(&e, 30, &cfg).unwrap(), vec![5, 25]);
    }

    #[test]
    fn hopeless_alternative_gets_nothing() {
        let cfg = OcbaConfig::with_budget(0);
        let e = [
            est(0, 5, 10.0, 1.0),
            est(1, 5, 9.8, 1.0),
            est(2, 5, -1e6, 1e-6),
        ];
        let inc = ocba_allocate(&e, 20, &cfg).unwrap();
        assert_eq!(inc[2], 0);
        assert_eq!(inc.iter().sum::<u64>(), 20);
    }

    #[test]
    fn identical_means_and_zero_variance_are_clamped() {
        let cfg = OcbaConfig::with_budget(0);
        let e = [
            est(0, 5, 1.0, 0.0),
            est(1, 5, 1.0, 0.0),
            est(2, 5, 1.0, 0.0),
        ];
        let inc = ocba_allocate(&e, 7, &cfg).unwrap();
        assert_eq!(inc.iter().sum::<u64>(), 7);
    }

    #[test]
    fn needs_two_alternatives() {
        let cfg = OcbaConfig::with_budget(0);
        assert!(matches!(
            ocba_allocate(&[est(0, 5, 1.0, 1.0)], 3, &cfg),
            Err(PlannerError::TooFewAlternatives(1))
        ));
    }

    #[test]
    fn pcs_cases() {
        let e = [est(0, 10, 1.0, 1.0), est(1, 10, 1.0, 1.0)];
        assert_relative_eq!(approx_pcs(&e), 0.5, epsilon = 1e-15);
        let e = [est(0, 10, 1e9, 1.0), est(1, 10, 0.0, 1.0)];
        assert_relative_eq!(approx_pcs(&e), 1.0, epsilon = 1e-15);
        let e = [
            est(0, 10, 3.0, 1.0),
            est(1, 10, 2.0, 1.0),
            est(2, 10, 1.0, 1.0),
        ];
        // Phi(1/sqrt(0.2)) * Phi(2/sqrt(0.2)), evaluated at 30 digits.
        assert_relative_eq!(
            approx_pcs(&e),
            0.987_322_517_626_830_8,
            max_relative = 1e-12
        );
    }
}
