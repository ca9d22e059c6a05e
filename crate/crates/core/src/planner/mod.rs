//! Per-stage repair planning: base heuristics, the truncated-rollout Q
//! estimator, uniform (TEA) rollout and OCBA-allocated rollout.
//!
//! The rollout machinery is generic over [`SimModel`], so the same code runs
//! against the water-network simulator and against small tabular MDPs.

mod config;
mod ocba;
mod policy;
mod rollout;

pub use config::{BudgetRule, OcbaConfig, PlannerConfig, PlannerKind, RolloutConfig};
pub use ocba::{approx_pcs, ocba_allocate, QEstimate};
pub use policy::{base_policy, BasePolicy, BasePolicyKind};
pub use rollout::{ocba_rollout, sim_q, uniform_rollout, Horizon, RolloutDecision, SampleStreams};

use rand::Rng;
use thiserror::Error;

use crate::sim::SimError;

/// A simulation-based MDP: a stochastic transition/reward generator.
pub trait SimModel: Sync {
    type State: Clone + Send + Sync;
    type Action: Clone + Send + Sync;
    type Error: std::error::Error + Send + Sync + 'static;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Samples `(next_state, reward)`.
    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut R,
    ) -> Result<(Self::State, f64), Self::Error>;
}

/// A (possibly randomized) stationary policy.
pub trait Policy<M: SimModel>: Sync {
    fn act<R: Rng + ?Sized>(
        &self,
        model: &M,
        state: &M::State,
        rng: &mut R,
    ) -> Result<M::Action, M::Error>;
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("per-stage budget {budget} is below the minimum feasible n*n0 = {minimum}")]
    InfeasibleBudget { budget: u64, minimum: u64 },
    #[error("OCBA needs at least 2 alternatives, got {0}")]
    TooFewAlternatives(usize),
    #[error("no candidate actions")]
    NoCandidates,
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error("simulation failed: {0}")]
    Sim(Box<dyn std::error::Error + Send + Sync>),
}

impl From<SimError> for PlannerError {
    fn from(e: SimError) -> Self {
        PlannerError::Sim(Box::new(e))
    }
}

impl PlannerError {
    pub(crate) fn sim<E: std::error::Error + Send + Sync + 'static>(e: E) -> Self {
        PlannerError::Sim(Box::new(e))
    }

    /// Errors caused by configuration rather than by a failed simulation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            PlannerError::InfeasibleBudget { .. } | PlannerError::Config(_)
        )
    }
}

/// Maps `f` over `jobs`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn par_map<J, T, F>(jobs: Vec<J>, f: F) -> Vec<T>
where
    J: Send,
    T: Send,
    F: Fn(J) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}
