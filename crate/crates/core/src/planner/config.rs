use serde::{Deserialize, Serialize};

use super::policy::BasePolicyKind;
use super::rollout::Horizon;
use super::PlannerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub horizon: Horizon,
    /// SimQ samples per candidate action.
    pub alpha: usize,
    pub gamma: f64,
    pub action_cap: usize,
}

/// Per-stage simulation budget `B = round(per_action * n + constant)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRule {
    pub per_action: f64,
    #[serde(default)]
    pub constant: f64,
}

impl BudgetRule {
    pub fn budget(&self, n: usize) -> u64 {
        (self.per_action * n as f64 + self.constant)
            .round()
            .max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcbaConfig {
    /// Total SimQ calls for this stage.
    pub budget: u64,
    pub n0: usize,
    pub delta_fraction: f64,
    pub epsilon_delta: f64,
    pub epsilon_var: f64,
}

impl OcbaConfig {
    pub fn with_budget(budget: u64) -> Self {
        Self {
            budget,
            n0: default_n0(),
            delta_fraction: default_delta_fraction(),
            epsilon_delta: default_eps(),
            epsilon_var: default_eps(),
        }
    }

    /// Samples added per allocation round for `n` alternatives.
    pub fn increment(&self, n: usize) -> u64 {
        ((self.delta_fraction * n as f64).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Base,
    Tea,
    Ocba,
}

/// Planner settings as they appear in experiment configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    #[serde(default = "default_h")]
    pub h: usize,
    /// Run every SimQ trajectory to full recovery instead of `h` epochs.
    #[serde(default)]
    pub complete: bool,
    #[serde(default = "default_alpha")]
    pub alpha: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetRule>,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_delta_fraction")]
    pub delta_fraction: f64,
    #[serde(default = "default_eps")]
    pub epsilon_delta: f64,
    #[serde(default = "default_eps")]
    pub epsilon_var: f64,
    #[serde(default = "default_cap")]
    pub action_cap: usize,
    #[serde(default)]
    pub base_policy_kind: BasePolicyKind,
}

fn default_h() -> usize {
    10
}
fn default_alpha() -> usize {
    200
}
fn default_gamma() -> f64 {
    0.99
}
fn default_n0() -> usize {
    5
}
fn default_delta_fraction() -> f64 {
    0.15
}
fn default_eps() -> f64 {
    1e-9
}
fn default_cap() -> usize {
    64
}

impl PlannerConfig {
    fn with_kind(kind: PlannerKind) -> Self {
        Self {
            kind,
            h: default_h(),
            complete: false,
            alpha: default_alpha(),
            gamma: default_gamma(),
            budget: None,
            n0: default_n0(),
            delta_fraction: default_delta_fraction(),
            epsilon_delta: default_eps(),
            epsilon_var: default_eps(),
            action_cap: default_cap(),
            base_policy_kind: BasePolicyKind::default(),
        }
    }

    pub fn base() -> Self {
        Self::with_kind(PlannerKind::Base)
    }

    pub fn tea(alpha: usize) -> Self {
        Self {
            alpha,
            ..Self::with_kind(PlannerKind::Tea)
        }
    }

    /// OCBA rollout with `B = per_action * n + constant`.
    pub fn ocba(per_action: f64, constant: f64) -> Self {
        Self {
            budget: Some(BudgetRule {
                per_action,
                constant,
            }),
            ..Self::with_kind(PlannerKind::Ocba)
        }
    }

    pub fn horizon(&self) -> Horizon {
        if self.complete {
            Horizon::Complete
        } else {
            Horizon::Steps(self.h)
        }
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            horizon: self.horizon(),
            alpha: self.alpha,
            gamma: self.gamma,
            action_cap: self.action_cap,
        }
    }

    /// OCBA settings for a stage with `n` candidate actions.
    pub fn ocba_for(&self, n: usize) -> Result<OcbaConfig, PlannerError> {
        let rule = self
            .budget
            .ok_or_else(|| PlannerError::Config("OCBA planner needs a budget `B`".into()))?;
        Ok(OcbaConfig {
            budget: rule.budget(n),
            n0: self.n0,
            delta_fraction: self.delta_fraction,
            epsilon_delta: self.epsilon_delta,
            epsilon_var: self.epsilon_var,
        })
    }

    /// SimQ calls a stage with `n` candidates must consume.
    pub fn expected_simq_calls(&self, n: usize) -> u64 {
        match self.kind {
            PlannerKind::Base => 0,
            PlannerKind::Tea => (n * self.alpha) as u64,
            PlannerKind::Ocba if n == 1 => self.n0 as u64,
            PlannerKind::Ocba => self.budget.map(|b| b.budget(n)).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.h == 0 {
            return bad("h must be at least 1");
        }
        if self.action_cap == 0 {
            return bad("action_cap must be at least 1");
        }
        match self.kind {
            PlannerKind::Base => {}
            PlannerKind::Tea if self.alpha == 0 => return bad("alpha must be at least 1"),
            PlannerKind::Tea => {}
            PlannerKind::Ocba => {
                let Some(rule) = self.budget else {
                    return bad("OCBA planner needs a budget `B`");
                };
                if self.n0 < 2 {
                    return bad("n0 must be at least 2");
                }
                if !(self.delta_fraction > 0.0) {
                    return bad("delta_fraction must be positive");
                }
                if !(self.epsilon_delta > 0.0 && self.epsilon_var > 0.0) {
                    return bad("epsilon clamps must be positive");
                }
                if rule.per_action < 0.0 || rule.constant < 0.0 {
                    return bad("budget terms must be non-negative");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_planner_block() {
        let cfg: PlannerConfig = serde_json::from_str(
            r#"{"kind": "ocba", "h": 8, "B": {"per_action": 5, "constant": 5000}, "n0": 5,
                "delta_fraction": 0.15, "action_cap": 32, "base_policy_kind": "population_greedy"}"#,
        )
        .unwrap();
        assert_eq!(cfg.kind, PlannerKind::Ocba);
        assert_eq!(cfg.ocba_for(40).unwrap().budget, 5200);
        assert_eq!(cfg.gamma, 0.99);
        assert_eq!(cfg.base_policy_kind, BasePolicyKind::PopulationGreedy);
        cfg.validate().unwrap();
    }

    #[test]
    fn increment_is_fifteen_percent_with_floor() {
        let c = OcbaConfig::with_budget(100);
        assert_eq!(c.increment(1), 1);
        assert_eq!(c.increment(10), 2);
        assert_eq!(c.increment(64), 10);
    }

    #[test]
    fn rejects_bad_settings() {
        let mut c = PlannerConfig::tea(20);
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = PlannerConfig::ocba(5.0, 0.0);
        c.n0 = 1;
        assert!(c.validate().is_err());
        let mut c = PlannerConfig::ocba(5.0, 0.0);
        c.budget = None;
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<PlannerConfig>(r#"{"kind": "tea", "alhpa": 3}"#).is_err());
    }
}
