use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use super::HarnessError;
use crate::hazard::HazardConfig;
use crate::network::WaterNetwork;
use crate::planner::PlannerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPlanner {
    pub name: String,
    pub planner: PlannerConfig,
}

impl NamedPlanner {
    pub fn new(name: &str, planner: PlannerConfig) -> Self {
        Self {
            name: name.to_string(),
            planner,
        }
    }
}

/// Built-in planner presets.
///
/// The plain names are desk-scale (budgets a tenth of the full-scale ones);
/// `-full` variants use the full per-stage budgets. `ocba-lean` spends 10% of
/// the desk TEA budget (`B = 2n`, which forces `n0 = 2`).
pub fn preset(name: &str) -> Option<PlannerConfig> {
    let cfg = match name {
        "base" => PlannerConfig::base(),
        "tea" => PlannerConfig::tea(20),
        "ocba1" => PlannerConfig::ocba(5.0, 500.0),
        "ocba2" => PlannerConfig::ocba(5.0, 1000.0),
        "ocba3" => PlannerConfig::ocba(5.0, 2000.0),
        "ocba-lean" => PlannerConfig {
            n0: 2,
            ..PlannerConfig::ocba(2.0, 0.0)
        },
        "tea-full" => PlannerConfig::tea(200),
        "ocba1-full" => PlannerConfig::ocba(5.0, 5000.0),
        "ocba2-full" => PlannerConfig::ocba(5.0, 10000.0),
        "ocba3-full" => PlannerConfig::ocba(5.0, 20000.0),
        _ => return None,
    };
    Some(cfg)
}

pub const PRESET_NAMES: [&str; 10] = [
    "base",
    "tea",
    "ocba1",
    "ocba2",
    "ocba3",
    "ocba-lean",
    "tea-full",
    "ocba1-full",
    "ocba2-full",
    "ocba3-full",
];

fn default_planners() -> Vec<NamedPlanner> {
    ["base", "tea", "ocba1", "ocba2", "ocba3"]
        .iter()
        .map(|n| NamedPlanner::new(n, preset(n).expect("known preset")))
        .collect()
}

/// Entries are either `{"name", "planner"}` objects or bare preset names.
fn planner_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NamedPlanner>, D::Error> {
    Vec::<serde_json::Value>::deserialize(d)?
        .into_iter()
        .map(|entry| match entry {
            serde_json::Value::String(name) => preset(&name)
                .map(|cfg| NamedPlanner::new(&name, cfg))
                .ok_or_else(|| {
                    D::Error::custom(format!(
                        "unknown planner preset `{name}` (presets: {})",
                        PRESET_NAMES.join(", ")
                    ))
                }),
            other => NamedPlanner::deserialize(other).map_err(D::Error::custom),
        })
        .collect()
}

fn default_scenarios() -> usize {
    100
}

fn default_resources() -> Vec<usize> {
    vec![3, 5]
}

fn default_grid() -> f64 {
    0.25
}

/// One experiment: a network, a hazard, planners and a scenario count.
/// Paths are relative to the configuration file; absent paths select the
/// shipped defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub hazard: Option<PathBuf>,
    #[serde(default = "default_planners", deserialize_with = "planner_list")]
    pub planners: Vec<NamedPlanner>,
    #[serde(default = "default_scenarios")]
    pub num_scenarios: usize,
    #[serde(default = "default_resources")]
    pub resources: Vec<usize>,
    /// Observation window for AUC; defaults to the latest full-recovery day.
    #[serde(default)]
    pub horizon_days: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_step_days: f64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.num_scenarios == 0 {
            return bad("num_scenarios must be at least 1".into());
        }
        if self.planners.is_empty() {
            return bad("at least one planner is required".into());
        }
        if self.resources.is_empty() || self.resources.contains(&0) {
            return bad("resources must list positive crew counts".into());
        }
        if let Some(h) = self.horizon_days {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("horizon_days must be positive, got {h}"));
            }
        }
        if !(self.grid_step_days > 0.0 && self.grid_step_days.is_finite()) {
            return bad(format!(
                "grid_step_days must be positive, got {}",
                self.grid_step_days
            ));
        }
        let mut seen = BTreeSet::new();
        for p in &self.planners {
            if !seen.insert(p.name.as_str()) {
                return bad(format!("duplicate planner name `{}`", p.name));
            }
            if p.name.is_empty() || p.name.contains(',') {
                return bad(format!("invalid planner name `{}`", p.name));
            }
            p.planner
                .validate()
                .map_err(|source| HarnessError::Planner {
                    name: p.name.clone(),
                    source,
                })?;
        }
        Ok(())
    }

    /// Keeps the named planners, in the given order. Names missing from the
    /// configuration fall back to the built-in presets.
    pub fn select_planners(&mut self, names: &[String]) -> Result<(), HarnessError> {
        let mut chosen = Vec::with_capacity(names.len());
        for name in names {
            let found = self.planners.iter().find(|p| &p.name == name).cloned();
            match found.or_else(|| preset(name).map(|cfg| NamedPlanner::new(name, cfg))) {
                Some(p) => chosen.push(p),
                None => {
                    return Err(HarnessError::Config(format!(
                        "unknown planner `{name}` (presets: {})",
                        PRESET_NAMES.join(", ")
                    )))
                }
            }
        }
        self.planners = chosen;
        Ok(())
    }
}

/// A validated configuration with its network and hazard loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub network: WaterNetwork,
    pub hazard: HazardConfig,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })
}

impl Experiment {
    pub fn new(
        config: ExperimentConfig,
        network: WaterNetwork,
        hazard: HazardConfig,
    ) -> Result<Self, HarnessError> {
        config.validate()?;
        hazard.validate()?;
        Ok(Self {
            config,
            network,
            hazard,
        })
    }

    /// Defaults everywhere: shipped network and hazard, desk presets.
    pub fn builtin() -> Self {
        Self::new(
            ExperimentConfig::default(),
            WaterNetwork::gilroy_default(),
            HazardConfig::default_scenario(),
        )
        .expect("defaults are valid")
    }

    /// Parses a configuration file without loading what it references.
    pub fn read_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        serde_json::from_str(&read(path)?).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads the network and hazard referenced by `config`, resolving
    /// relative paths against `base_dir`.
    pub fn load(config: ExperimentConfig, base_dir: &Path) -> Result<Self, HarnessError> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        let network = match &config.network {
            Some(p) => {
                let p = resolve(p);
                WaterNetwork::from_json(&read(&p)?)
                    .map_err(|source| HarnessError::NetworkFile { path: p, source })?
            }
            None => WaterNetwork::gilroy_default(),
        };
        let hazard = match &config.hazard {
            Some(p) => {
                let p = resolve(p);
                HazardConfig::from_json(&read(&p)?)
                    .map_err(|source| HarnessError::HazardFile { path: p, source })?
            }
            None => HazardConfig::default_scenario(),
        };
        Self::new(config, network, hazard)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let config = Self::read_config(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::load(config, base)
    }
}
