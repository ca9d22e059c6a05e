use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{BatchResult, ScenarioInfo, StageRecord};
use super::HarnessError;
use crate::planner::PlannerConfig;

pub const CURVES_FILE: &str = "curves.csv";
pub const MEAN_CURVES_FILE: &str = "mean_curves.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Serialize)]
struct CurveRow<'a> {
    scenario_id: usize,
    planner: &'a str,
    elapsed_days: f64,
    served_population: u64,
}

#[derive(Serialize)]
struct MeanRow<'a> {
    planner: &'a str,
    day: f64,
    mean_served: f64,
}

#[derive(Serialize)]
struct PlannerSummary<'a> {
    name: &'a str,
    planner: &'a PlannerConfig,
    auc_mean: f64,
    auc_se: f64,
    auc: &'a [f64],
    simq_total: u64,
    stages: &'a [StageRecord],
}

#[derive(Serialize)]
struct Summary<'a> {
    master_seed: u64,
    resources: usize,
    num_scenarios: usize,
    horizon_days: f64,
    grid_step_days: f64,
    total_population: u64,
    config: &'a ExperimentConfig,
    scenarios: &'a [ScenarioInfo],
    planners: Vec<PlannerSummary<'a>>,
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the curves CSV, the mean-curve CSV and the JSON summary into
/// `out_dir`, creating it if needed. Returns the written paths.
pub fn emit_outputs(result: &BatchResult, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let curves = out_dir.join(CURVES_FILE);
    write_csv(
        &curves,
        result.planners.iter().flat_map(|p| {
            p.curves.iter().flat_map(move |c| {
                c.points.iter().map(move |&(t, v)| CurveRow {
                    scenario_id: c.scenario_id,
                    planner: &p.name,
                    elapsed_days: t,
                    served_population: v,
                })
            })
        }),
    )?;

    let means = out_dir.join(MEAN_CURVES_FILE);
    write_csv(
        &means,
        result.planners.iter().flat_map(|p| {
            p.mean_curve.iter().map(move |&(day, mean_served)| MeanRow {
                planner: &p.name,
                day,
                mean_served,
            })
        }),
    )?;

    let summary = Summary {
        master_seed: result.config.master_seed,
        resources: result.resources,
        num_scenarios: result.scenarios.len(),
        horizon_days: result.horizon_days,
        grid_step_days: result.config.grid_step_days,
        total_population: result.total_population,
        config: &result.config,
        scenarios: &result.scenarios,
        planners: result
            .planners
            .iter()
            .map(|p| PlannerSummary {
                name: &p.name,
                planner: &p.config,
                auc_mean: p.auc_mean,
                auc_se: p.auc_se,
                auc: &p.aucs,
                simq_total: p.simq_total,
                stages: &p.stages,
            })
            .collect(),
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    fs::write(&summary_path, text + "\n").map_err(|source| HarnessError::Write {
        path: summary_path.clone(),
        source,
    })?;
    Ok(vec![curves, means, summary_path])
}

/// Subdirectory used for the batch with `resources` crews.
pub fn batch_dir(out_dir: &Path, resources: usize) -> PathBuf {
    out_dir.join(format!("m{resources}"))
}

pub fn emit_experiment(
    results: &[BatchResult],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut paths = Vec::new();
    for r in results {
        paths.extend(emit_outputs(r, &batch_dir(out_dir, r.resources))?);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Experiment;
    use crate::harness::curve::auc_points;
    use crate::harness::run::run_batch;

    #[test]
    fn one_scenario_batch_writes_three_files() {
        let mut exp = Experiment::builtin();
        exp.config.num_scenarios = 1;
        exp.config.select_planners(&["base".into()]).unwrap();
        let r = run_batch(&exp, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_outputs(&r, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let curves = fs::read_to_string(&paths[0]).unwrap();
        assert!(curves.starts_with("scenario_id,planner,elapsed_days,served_population\n"));
        let means = fs::read_to_string(&paths[1]).unwrap();
        assert!(means.starts_with("planner,day,mean_served\n"));
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&paths[2]).unwrap()).unwrap();
        assert_eq!(summary["master_seed"], 0);
        assert_eq!(summary["planners"][0]["name"], "base");

        // AUC recomputed from the CSV matches the summary.
        let mut rdr = csv::Reader::from_path(&paths[0]).unwrap();
        let pts: Vec<(f64, f64)> = rdr
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[2].parse().unwrap(), r[3].parse().unwrap())
            })
            .collect();
        let horizon = summary["horizon_days"].as_f64().unwrap();
        let expected = summary["planners"][0]["auc"][0].as_f64().unwrap();
        approx::assert_relative_eq!(auc_points(&pts, horizon), expected, max_relative = 1e-12);
    }
}
