use serde::{Deserialize, Serialize};

/// Served population after each completed repair step, starting at day 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub scenario_id: usize,
    pub planner: String,
    /// `(elapsed_days, served_population)`.
    pub points: Vec<(f64, u64)>,
}

impl RecoveryCurve {
    /// Service level at `day`, holding each point until the next.
    pub fn served_at(&self, day: f64) -> u64 {
        step_value(&self.points, day)
    }

    pub fn final_day(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    /// Strictly increasing days and non-decreasing service.
    pub fn is_monotone(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1)
    }
}

fn step_value<T: Copy + Default>(points: &[(f64, T)], day: f64) -> T {
    match points.partition_point(|p| p.0 <= day) {
        0 => T::default(),
        i => points[i - 1].1,
    }
}

/// Integral of a step curve over `[0, horizon_days]`, holding the last value.
/// A non-positive horizon gives 0.
pub fn auc_points(points: &[(f64, f64)], horizon_days: f64) -> f64 {
    let mut total = 0.0;
    for (i, &(t, v)) in points.iter().enumerate() {
        if t >= horizon_days {
            break;
        }
        let end = points
            .get(i + 1)
            .map_or(horizon_days, |p| p.0.min(horizon_days));
        total += v * (end - t.max(0.0));
    }
    total
}

/// Person-days of service over `[0, horizon_days]`.
pub fn auc(curve: &RecoveryCurve, horizon_days: f64) -> f64 {
    let points: Vec<(f64, f64)> = curve.points.iter().map(|&(t, p)| (t, p as f64)).collect();
    auc_points(&points, horizon_days)
}

/// Uniform grid `0, step, 2 step, ...` covering `[0, horizon_days]`.
pub fn day_grid(step: f64, horizon_days: f64) -> Vec<f64> {
    let n = (horizon_days / step).ceil().max(0.0) as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Pointwise mean of step-interpolated curves on a uniform day grid.
pub fn mean_curve(curves: &[RecoveryCurve], step: f64, horizon_days: f64) -> Vec<(f64, f64)> {
    day_grid(step, horizon_days)
        .into_iter()
        .map(|d| {
            let sum: f64 = curves.iter().map(|c| c.served_at(d) as f64).sum();
            (d, sum / curves.len().max(1) as f64)
        })
        .collect()
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
