//! WebAssembly bindings for the browser demo.
//!
//! Every export returns a JSON string; the plain functions below do the work
//! so they can be tested natively.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use quake_recovery::harness::{
    auc, preset, run_recovery, sample_case, Experiment, ExperimentConfig, NamedPlanner,
};
use quake_recovery::hazard::{DamageState, SeismicEvent};
use quake_recovery::{ComponentKind, HazardConfig, RecoverySim, RepairModel, WaterNetwork};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct FragilityPlot {
    kind: ComponentKind,
    pga: Vec<f64>,
    /// Exceedance probability per damage state, aligned with `pga`.
    exceedance: Vec<(DamageState, Vec<f64>)>,
}

fn parse_kind(kind: &str) -> Result<ComponentKind, String> {
    match kind {
        "Well" => Ok(ComponentKind::Well),
        "BoosterPump" => Ok(ComponentKind::BoosterPump),
        "Tank" => Ok(ComponentKind::Tank),
        _ => Err(format!("no fragility curves for `{kind}`")),
    }
}

/// Exceedance curves of the default fragility set for one facility kind.
pub fn fragility_curves(kind: &str, max_pga: f64, points: usize) -> Result<String, String> {
    let kind = parse_kind(kind)?;
    if !(max_pga > 0.0) || points < 2 {
        return Err("need max_pga > 0 and at least 2 points".into());
    }
    let hazard = HazardConfig::default_scenario();
    let row = hazard.fragility.row(kind).map_err(|e| e.to_string())?;
    let pga: Vec<f64> = (0..points)
        .map(|i| max_pga * i as f64 / (points - 1) as f64)
        .collect();
    let exceedance = DamageState::DAMAGED
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, pga.iter().map(|&x| row.exceedance(x)[k]).collect()))
        .collect();
    let plot = FragilityPlot {
        kind,
        pga,
        exceedance,
    };
    Ok(serde_json::to_string(&plot).expect("serializable"))
}

fn experiment(seed: u64, magnitude: f64, epicenter: [f64; 2]) -> Result<Experiment, String> {
    let mut hazard = HazardConfig::default_scenario();
    hazard.event = SeismicEvent {
        magnitude,
        epicenter,
    };
    let config = ExperimentConfig {
        num_scenarios: 1,
        master_seed: seed,
        ..ExperimentConfig::default()
    };
    Experiment::new(config, WaterNetwork::gilroy_default(), hazard).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MapNode {
    id: u32,
    site: [f64; 2],
    population: u64,
}

#[derive(Serialize)]
struct MapComponent {
    id: String,
    kind: ComponentKind,
    site: [f64; 2],
    state: DamageState,
    intensity: f64,
    /// Endpoints, for pipes.
    nodes: Option<(u32, u32)>,
}

#[derive(Serialize)]
struct ScenarioMap {
    nodes: Vec<MapNode>,
    components: Vec<MapComponent>,
    num_damaged: usize,
    served_population: u64,
    total_population: u64,
}

/// One sampled damage scenario laid out for drawing.
pub fn scenario_map(seed: u64, magnitude: f64, epicenter: [f64; 2]) -> Result<String, String> {
    let exp = experiment(seed, magnitude, epicenter)?;
    let case = sample_case(&exp, 0).map_err(|e| e.to_string())?;
    let net = &exp.network;
    let sim = RecoverySim::new(net, RepairModel::default(), 1);
    let mut endpoints = vec![None; net.components().len()];
    for (a, b, p) in net.edges() {
        endpoints[p] = Some((a, b));
    }
    let population = |node: u32| {
        net.demand_regions()
            .iter()
            .filter(|r| r.0 == node)
            .map(|r| r.1)
            .sum()
    };
    let map = ScenarioMap {
        nodes: net
            .node_ids()
            .iter()
            .filter_map(|&id| {
                net.node_site(id).map(|site| MapNode {
                    id,
                    site,
                    population: population(id),
                })
            })
            .collect(),
        components: net
            .components()
            .iter()
            .zip(&case.damage.components)
            .zip(endpoints)
            .map(|((c, d), nodes)| MapComponent {
                id: c.id.clone(),
                kind: c.kind,
                site: c.site,
                state: d.state,
                intensity: d.intensity,
                nodes,
            })
            .collect(),
        num_damaged: case.damage.num_damaged(),
        served_population: sim.served_population(&sim.initial_state(&case.damage)),
        total_population: net.total_population(),
    };
    Ok(serde_json::to_string(&map).expect("serializable"))
}

#[derive(Serialize)]
struct CurveSeries {
    planner: String,
    points: Vec<(f64, u64)>,
    auc: f64,
    simq_calls: u64,
}

#[derive(Serialize)]
struct CurvePlot {
    horizon_days: f64,
    total_population: u64,
    series: Vec<CurveSeries>,
}

/// Recovery curves of one scenario under comma-separated planner presets.
pub fn recovery_curves(
    seed: u64,
    magnitude: f64,
    epicenter: [f64; 2],
    resources: usize,
    planners: &str,
) -> Result<String, String> {
    if resources == 0 {
        return Err("need at least one crew".into());
    }
    let exp = experiment(seed, magnitude, epicenter)?;
    let case = sample_case(&exp, 0).map_err(|e| e.to_string())?;
    let sim = RecoverySim::new(
        &exp.network,
        RepairModel::hazus(exp.hazard.pipe.days_per_break),
        resources,
    );
    let mut runs = Vec::new();
    for name in planners.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let cfg = preset(name).ok_or_else(|| format!("unknown planner `{name}`"))?;
        let named = NamedPlanner::new(name, cfg);
        let run =
            run_recovery(&sim, &case.damage, 0, &named, case.seed).map_err(|e| e.to_string())?;
        runs.push(run);
    }
    let horizon_days = runs.iter().map(|r| r.curve.final_day()).fold(0.0, f64::max);
    let series = runs
        .into_iter()
        .map(|r| CurveSeries {
            auc: auc(&r.curve, horizon_days),
            simq_calls: r.stages.iter().map(|s| s.simq_calls).sum(),
            planner: r.curve.planner,
            points: r.curve.points,
        })
        .collect();
    let plot = CurvePlot {
        horizon_days,
        total_population: exp.network.total_population(),
        series,
    };
    Ok(serde_json::to_string(&plot).expect("serializable"))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fragilityCurves)]
pub fn fragility_curves_js(kind: &str, max_pga: f64, points: usize) -> Result<String, JsError> {
    js(fragility_curves(kind, max_pga, points))
}

#[wasm_bindgen(js_name = scenarioMap)]
pub fn scenario_map_js(seed: u32, magnitude: f64, ex: f64, ey: f64) -> Result<String, JsError> {
    js(scenario_map(seed.into(), magnitude, [ex, ey]))
}

#[wasm_bindgen(js_name = recoveryCurves)]
pub fn recovery_curves_js(
    seed: u32,
    magnitude: f64,
    ex: f64,
    ey: f64,
    resources: usize,
    planners: &str,
) -> Result<String, JsError> {
    js(recovery_curves(
        seed.into(),
        magnitude,
        [ex, ey],
        resources,
        planners,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const EPI: [f64; 2] = [-5.8, -5.8];

    #[test]
    fn fragility_output_is_monotone() {
        let v: Value = serde_json::from_str(&fragility_curves("Tank", 2.0, 21).unwrap()).unwrap();
        assert_eq!(v["pga"].as_array().unwrap().len(), 21);
        let curves = v["exceedance"].as_array().unwrap();
        assert_eq!(curves.len(), 4);
        for c in curves {
            let ys: Vec<f64> = c[1]
                .as_array()
                .unwrap()
                .iter()
                .map(|y| y.as_f64().unwrap())
                .collect();
            assert!(ys.windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(fragility_curves("PipeSegment", 1.0, 5).is_err());
        assert!(fragility_curves("Tank", 1.0, 1).is_err());
    }

    #[test]
    fn scenario_map_lists_everything() {
        let v: Value = serde_json::from_str(&scenario_map(3, 6.9, EPI).unwrap()).unwrap();
        assert_eq!(v["components"].as_array().unwrap().len(), 57);
        assert_eq!(v["nodes"].as_array().unwrap().len(), 42);
        assert_eq!(v["total_population"], 48821);
        assert!(v["served_population"].as_u64().unwrap() <= 48821);
        assert!(scenario_map(3, 12.0, EPI).is_err());
    }

    #[test]
    fn curves_for_three_planners() {
        let v: Value =
            serde_json::from_str(&recovery_curves(5, 6.9, EPI, 3, "base, tea,ocba1").unwrap())
                .unwrap();
        let series = v["series"].as_array().unwrap();
        assert_eq!(series.len(), 3);
        for s in series {
            let last = s["points"].as_array().unwrap().last().unwrap().clone();
            assert_eq!(last[1], 48821);
        }
        assert_eq!(series[0]["simq_calls"], 0);
        assert!(recovery_curves(5, 6.9, EPI, 3, "nope").is_err());
        assert!(recovery_curves(5, 6.9, EPI, 0, "base").is_err());
    }
}
