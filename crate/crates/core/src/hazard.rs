//! Ground-motion sampling, fragility curves and initial damage scenarios.
//!
//! Facilities (wells, pumps, tanks) are damaged through lognormal fragility
//! curves on PGA. Pipes fail or survive according to the upper bound of the
//! expected failure probability under a Poisson repair-rate model on PGV.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::network::{ComponentKind, WaterNetwork};

pub const HAZARD_DEFAULT_JSON: &str = include_str!("../data/hazard_default.json");

/// Breaks per km per (cm/s) of PGV for K = 1.
pub const REPAIR_RATE_PER_PGV: f64 = 0.00187;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub enum DamageState {
    #[default]
    None,
    Minor,
    Moderate,
    Extensive,
    Complete,
}

impl DamageState {
    pub const ALL: [DamageState; 5] = [
        DamageState::None,
        DamageState::Minor,
        DamageState::Moderate,
        DamageState::Extensive,
        DamageState::Complete,
    ];
    /// States with a fragility curve, in increasing severity.
    pub const DAMAGED: [DamageState; 4] = [
        DamageState::Minor,
        DamageState::Moderate,
        DamageState::Extensive,
        DamageState::Complete,
    ];

    pub fn is_damaged(self) -> bool {
        self != DamageState::None
    }

    fn from_rank(rank: usize) -> Self {
        Self::ALL[rank]
    }
}

impl fmt::Display for DamageState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error)]
pub enum HazardError {
    #[error("hazard config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("magnitude {0} outside (4, 9)")]
    Magnitude(f64),
    #[error("invalid attenuation parameters: {0}")]
    Gmpe(String),
    #[error("invalid fragility for {kind}: {reason}")]
    Fragility { kind: ComponentKind, reason: String },
    #[error("fragility medians must strictly increase with severity")]
    NonMonotoneFragility,
    #[error("no fragility curves for {0}")]
    MissingFragility(ComponentKind),
    #[error("intensity must be positive, got {0}")]
    Intensity(f64),
    #[error("pipe failure inputs must be non-negative (K={k}, L={length_km}, PGV={pgv})")]
    NegativePipeInput { k: f64, length_km: f64, pgv: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeismicEvent {
    pub magnitude: f64,
    /// km, same local grid as the network.
    pub epicenter: [f64; 2],
}

impl SeismicEvent {
    pub fn validate(&self) -> Result<(), HazardError> {
        if self.magnitude > 4.0 && self.magnitude < 9.0 {
            Ok(())
        } else {
            Err(HazardError::Magnitude(self.magnitude))
        }
    }

    pub fn distance_to(&self, site: [f64; 2]) -> f64 {
        (site[0] - self.epicenter[0]).hypot(site[1] - self.epicenter[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImKind {
    /// Peak ground acceleration, g.
    #[serde(rename = "PGA")]
    Pga,
    /// Peak ground velocity, cm/s.
    #[serde(rename = "PGV")]
    Pgv,
}

/// Log-linear attenuation: ln IM = a0 + a1 Mw - a2 ln(R + c) + sigma_ln z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmpeParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub c: f64,
    pub sigma_ln: f64,
    pub im_kind: ImKind,
}

impl GmpeParams {
    pub fn validate(&self) -> Result<(), HazardError> {
        if !(self.sigma_ln >= 0.0) {
            return Err(HazardError::Gmpe(format!("sigma_ln = {}", self.sigma_ln)));
        }
        if !(self.a2 > 0.0) {
            return Err(HazardError::Gmpe(format!("a2 = {} must be > 0", self.a2)));
        }
        if !(self.c >= 0.0) {
            return Err(HazardError::Gmpe(format!("c = {} must be >= 0", self.c)));
        }
        Ok(())
    }

    /// Mean of ln IM at distance `r` km.
    pub fn ln_median(&self, magnitude: f64, r: f64) -> f64 {
        self.a0 + self.a1 * magnitude - self.a2 * (r + self.c).ln()
    }
}

pub fn median_intensity(event: &SeismicEvent, site: [f64; 2], params: &GmpeParams) -> f64 {
    params
        .ln_median(event.magnitude, event.distance_to(site))
        .exp()
}

/// One intensity draw at `site`.
pub fn compute_intensity<R: Rng + ?Sized>(
    event: &SeismicEvent,
    site: [f64; 2],
    params: &GmpeParams,
    rng: &mut R,
) -> f64 {
    let z: f64 = if params.sigma_ln > 0.0 {
        rng.sample(StandardNormal)
    } else {
        0.0
    };
    (params.ln_median(event.magnitude, event.distance_to(site)) + params.sigma_ln * z).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragilityCurve {
    pub median: f64,
    pub beta: f64,
}

impl FragilityCurve {
    pub fn exceedance(&self, im: f64) -> f64 {
        normal_cdf((im / self.median).ln() / self.beta)
    }
}

/// Fragility curves for one facility kind, Minor through Complete.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragilityRow(pub [FragilityCurve; 4]);

impl FragilityRow {
    pub fn validate(&self, kind: ComponentKind) -> Result<(), HazardError> {
        let bad = |reason: String| HazardError::Fragility { kind, reason };
        for (state, curve) in DamageState::DAMAGED.iter().zip(&self.0) {
            if !(curve.beta > 0.0) || !(curve.median > 0.0) {
                return Err(bad(format!(
                    "{state}: median {} beta {} must be positive",
                    curve.median, curve.beta
                )));
            }
        }
        if self.0.windows(2).any(|w| !(w[0].median < w[1].median)) {
            return Err(bad("medians must strictly increase with severity".into()));
        }
        Ok(())
    }

    /// P(state >= ds) for ds = Minor..Complete.
    pub fn exceedance(&self, im: f64) -> [f64; 4] {
        let mut p = self.0.map(|c| c.exceedance(im));
        // Crossing curves can violate ordering when betas differ.
        for i in 1..4 {
            p[i] = p[i].min(p[i - 1]);
        }
        p
    }

    /// Probability of each state None..Complete at intensity `im`.
    pub fn state_probabilities(&self, im: f64) -> [f64; 5] {
        let ex = self.exceedance(im);
        [
            1.0 - ex[0],
            ex[0] - ex[1],
            ex[1] - ex[2],
            ex[2] - ex[3],
            ex[3],
        ]
    }
}

/// Fragility rows for every facility kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<ComponentKind, BTreeMap<DamageState, FragilityCurve>>")]
#[serde(into = "BTreeMap<ComponentKind, BTreeMap<DamageState, FragilityCurve>>")]
pub struct FragilitySet {
    rows: BTreeMap<ComponentKind, FragilityRow>,
}

impl FragilitySet {
    pub fn row(&self, kind: ComponentKind) -> Result<&FragilityRow, HazardError> {
        self.rows
            .get(&kind)
            .ok_or(HazardError::MissingFragility(kind))
    }
}

impl TryFrom<BTreeMap<ComponentKind, BTreeMap<DamageState, FragilityCurve>>> for FragilitySet {
    type Error = HazardError;

    fn try_from(
        raw: BTreeMap<ComponentKind, BTreeMap<DamageState, FragilityCurve>>,
    ) -> Result<Self, Self::Error> {
        let mut rows = BTreeMap::new();
        for (kind, states) in raw {
            if kind.is_pipe() {
                return Err(HazardError::Fragility {
                    kind,
                    reason: "pipes use the repair-rate model, not fragility curves".into(),
                });
            }
            let mut curves = [FragilityCurve {
                median: 0.0,
                beta: 0.0,
            }; 4];
            for (slot, state) in curves.iter_mut().zip(DamageState::DAMAGED) {
                *slot = *states.get(&state).ok_or_else(|| HazardError::Fragility {
                    kind,
                    reason: format!("missing {state} curve"),
                })?;
            }
            let row = FragilityRow(curves);
            row.validate(kind)?;
            rows.insert(kind, row);
        }
        Ok(Self { rows })
    }
}

impl From<FragilitySet> for BTreeMap<ComponentKind, BTreeMap<DamageState, FragilityCurve>> {
    fn from(set: FragilitySet) -> Self {
        set.rows
            .into_iter()
            .map(|(kind, row)| (kind, DamageState::DAMAGED.into_iter().zip(row.0).collect()))
            .collect()
    }
}

/// Draws a facility damage state at the given PGA.
pub fn sample_facility_damage<R: Rng + ?Sized>(
    row: &FragilityRow,
    pga: f64,
    rng: &mut R,
) -> Result<DamageState, HazardError> {
    if !(pga > 0.0) {
        return Err(HazardError::Intensity(pga));
    }
    if row.0.windows(2).any(|w| !(w[0].median < w[1].median)) {
        return Err(HazardError::NonMonotoneFragility);
    }
    let ex = row.exceedance(pga);
    let u: f64 = rng.random();
    let rank = ex.iter().filter(|&&p| u < p).count();
    Ok(DamageState::from_rank(rank))
}

/// Repair rate C (breaks/km) for coefficient `k` at `pgv` cm/s.
pub fn repair_rate(k: f64, pgv: f64) -> f64 {
    k * REPAIR_RATE_PER_PGV * pgv
}

/// Upper bound on a pipe's failure probability: 1 - exp(-C L).
pub fn pipe_failure_prob_ub(k: f64, length_km: f64, pgv: f64) -> Result<f64, HazardError> {
    if k < 0.0 || length_km < 0.0 || pgv < 0.0 || k.is_nan() || length_km.is_nan() || pgv.is_nan() {
        return Err(HazardError::NegativePipeInput { k, length_km, pgv });
    }
    let breaks = repair_rate(k, pgv) * length_km;
    Ok(-(-breaks).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeHazardConfig {
    /// K used for pipes whose network entry gives none.
    #[serde(rename = "K", default = "default_k")]
    pub k: f64,
    /// Mean repair days per expected break.
    #[serde(default = "default_days_per_break")]
    pub days_per_break: f64,
}

fn default_k() -> f64 {
    1.0
}

fn default_days_per_break() -> f64 {
    1.0
}

impl Default for PipeHazardConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            days_per_break: default_days_per_break(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub event: SeismicEvent,
    pub gmpe_pga: GmpeParams,
    pub gmpe_pgv: GmpeParams,
    pub fragility: FragilitySet,
    #[serde(default)]
    pub pipe: PipeHazardConfig,
}

impl HazardConfig {
    pub fn from_json(text: &str) -> Result<Self, HazardError> {
        let cfg: HazardConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shipped HAZUS-style defaults with the Mw 6.9 scenario event.
    pub fn default_scenario() -> Self {
        Self::from_json(HAZARD_DEFAULT_JSON).expect("shipped hazard document is valid")
    }

    pub fn validate(&self) -> Result<(), HazardError> {
        self.event.validate()?;
        for (params, kind) in [(&self.gmpe_pga, ImKind::Pga), (&self.gmpe_pgv, ImKind::Pgv)] {
            params.validate()?;
            if params.im_kind != kind {
                return Err(HazardError::Gmpe(format!(
                    "expected {kind:?} parameters, got {:?}",
                    params.im_kind
                )));
            }
        }
        if !(self.pipe.k > 0.0) || !(self.pipe.days_per_break > 0.0) {
            return Err(HazardError::Gmpe(
                "pipe K and days_per_break must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled post-event condition of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDamage {
    pub state: DamageState,
    /// PGA (g) for facilities, PGV (cm/s) for pipes.
    pub intensity: f64,
    /// Expected breaks C L along a pipe; zero for facilities.
    pub expected_breaks: f64,
}

/// Initial damage for every component, aligned with `WaterNetwork::components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageScenario {
    pub components: Vec<ComponentDamage>,
}

impl DamageScenario {
    /// All components undamaged.
    pub fn intact(network: &WaterNetwork) -> Self {
        Self {
            components: vec![
                ComponentDamage {
                    state: DamageState::None,
                    intensity: 0.0,
                    expected_breaks: 0.0,
                };
                network.components().len()
            ],
        }
    }

    pub fn damage_map(&self, network: &WaterNetwork) -> BTreeMap<String, DamageState> {
        network
            .components()
            .iter()
            .zip(&self.components)
            .map(|(c, d)| (c.id.clone(), d.state))
            .collect()
    }

    pub fn num_damaged(&self) -> usize {
        self.components
            .iter()
            .filter(|d| d.state.is_damaged())
            .count()
    }
}

/// Samples the initial damage state of every component.
pub fn sample_scenario<R: Rng + ?Sized>(
    network: &WaterNetwork,
    event: &SeismicEvent,
    config: &HazardConfig,
    rng: &mut R,
) -> Result<DamageScenario, HazardError> {
    event.validate()?;
    let mut components = Vec::with_capacity(network.components().len());
    for c in network.components() {
        let damage = if c.kind.is_pipe() {
            let pgv = compute_intensity(event, c.site, &config.gmpe_pgv, rng);
            let k = c.pipe_k.unwrap_or(config.pipe.k);
            let p_fail = pipe_failure_prob_ub(k, c.pipe_length_km, pgv)?;
            let failed = rng.random::<f64>() < p_fail;
            ComponentDamage {
                state: if failed {
                    DamageState::Complete
                } else {
                    DamageState::None
                },
                intensity: pgv,
                expected_breaks: repair_rate(k, pgv) * c.pipe_length_km,
            }
        } else {
            let pga = compute_intensity(event, c.site, &config.gmpe_pga, rng);
            let row = config.fragility.row(c.kind)?;
            ComponentDamage {
                state: sample_facility_damage(row, pga, rng)?,
                intensity: pga,
                expected_breaks: 0.0,
            }
        };
        components.push(damage);
    }
    Ok(DamageScenario { components })
}
