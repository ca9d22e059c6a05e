//! Water network topology, component inventory and population served.
//!
//! Serviceability is graph reachability: a demand region has water when its
//! node can be reached from at least one operational well through operational
//! pipes, without passing a node whose booster pump or tank is out of service.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hazard::DamageState;

/// Shipped default document (plausible reconstruction, not GIS data).
pub const GILROY_DEFAULT_JSON: &str = include_str!("../data/gilroy_default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    Well,
    BoosterPump,
    Tank,
    PipeSegment,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        ComponentKind::Well,
        ComponentKind::BoosterPump,
        ComponentKind::Tank,
        ComponentKind::PipeSegment,
    ];

    pub fn is_pipe(self) -> bool {
        self == ComponentKind::PipeSegment
    }

    /// Non-pipe components other than wells block traversal through their node.
    fn is_transit(self) -> bool {
        matches!(self, ComponentKind::BoosterPump | ComponentKind::Tank)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComponentKind::Well => "Well",
            ComponentKind::BoosterPump => "BoosterPump",
            ComponentKind::Tank => "Tank",
            ComponentKind::PipeSegment => "PipeSegment",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    /// Local grid coordinate in km.
    pub site: [f64; 2],
    #[serde(default)]
    pub attached_node: Option<u32>,
    #[serde(default)]
    pub pipe_length_km: f64,
    /// ALA coefficient. A pipe without one takes the hazard configuration default.
    #[serde(default, rename = "pipe_K")]
    pub pipe_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u32,
    #[serde(default)]
    pub site: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: u32,
    pub to: u32,
    /// Id of the PipeSegment realizing this edge.
    pub pipe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRegionSpec {
    pub node: u32,
    pub population: i64,
}

/// Serialized network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub components: Vec<Component>,
    pub edges: Vec<EdgeSpec>,
    pub demand_regions: Vec<DemandRegionSpec>,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("network has no components")]
    Empty,
    #[error("duplicate component id `{0}`")]
    DuplicateComponent(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("{element} references missing node {node}")]
    MissingNode { element: String, node: u32 },
    #[error("edge {edge} ({from}-{to}) references missing pipe `{pipe}`")]
    MissingPipe {
        edge: usize,
        from: u32,
        to: u32,
        pipe: String,
    },
    #[error("edge {edge} references `{id}`, which is a {kind}, not a PipeSegment")]
    NotAPipe {
        edge: usize,
        id: String,
        kind: ComponentKind,
    },
    #[error("pipe `{0}` realizes more than one edge")]
    PipeReused(String),
    #[error("pipe `{0}` does not realize any edge")]
    DanglingPipe(String),
    #[error("component `{id}`: {reason}")]
    InvalidComponent { id: String, reason: String },
    #[error("demand region at node {node} has negative population {population}")]
    NegativePopulation { node: u32, population: i64 },
    #[error("undamaged network leaves demand regions at nodes {nodes:?} without water")]
    Disconnected { nodes: Vec<u32> },
    #[error("damage map has no entry for component `{0}`")]
    MissingDamage(String),
}

/// Serviceability options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceFlags {
    /// Treat Minor damage as still functional.
    #[serde(default)]
    pub minor_is_functional: bool,
}

/// Whether a component in the given damage state still functions.
pub fn is_operational(_component: &Component, damage: DamageState, flags: ServiceFlags) -> bool {
    match damage {
        DamageState::None => true,
        DamageState::Minor => flags.minor_is_functional,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    a: usize,
    b: usize,
    pipe: usize,
}

/// A validated water network.
#[derive(Debug, Clone)]
pub struct WaterNetwork {
    pub name: String,
    components: Vec<Component>,
    node_ids: Vec<u32>,
    node_sites: Vec<Option<[f64; 2]>>,
    node_index: HashMap<u32, usize>,
    component_index: HashMap<String, usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Node index of every non-pipe component.
    component_node: Vec<Option<usize>>,
    /// Pump and tank components sitting on each node.
    node_blockers: Vec<Vec<usize>>,
    wells: Vec<usize>,
    node_population: Vec<u64>,
    regions: Vec<(u32, u64)>,
    total_population: u64,
}

impl WaterNetwork {
    /// Parses and validates a JSON network document.
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDocument = serde_json::from_str(text)?;
        build_network(doc)
    }

    /// The shipped default testbed.
    pub fn gilroy_default() -> Self {
        Self::from_json(GILROY_DEFAULT_JSON).expect("shipped network document is valid")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, index: usize) -> &Component {
        &self.components[index]
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.component_index.get(id).copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    pub fn node_site(&self, node: u32) -> Option<[f64; 2]> {
        self.node_index.get(&node).and_then(|&i| self.node_sites[i])
    }

    /// Edges as (from node id, to node id, pipe component index).
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, usize)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.node_ids[e.a], self.node_ids[e.b], e.pipe))
    }

    /// (node id, population) for every demand region.
    pub fn demand_regions(&self) -> &[(u32, u64)] {
        &self.regions
    }

    pub fn total_population(&self) -> u64 {
        self.total_population
    }

    pub fn count_kind(&self, kind: ComponentKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }

    /// Centroid of all component sites.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.components.len() as f64;
        let (x, y) = self
            .components
            .iter()
            .fold((0.0, 0.0), |(x, y), c| (x + c.site[0], y + c.site[1]));
        [x / n, y / n]
    }

    /// Population served given per-component operability, indexed like
    /// [`components`](Self::components).
    pub fn served_population(&self, operational: &[bool]) -> u64 {
        self.reached_nodes(operational)
            .iter()
            .zip(&self.node_population)
            .filter(|(reached, _)| **reached)
            .map(|(_, p)| p)
            .sum()
    }

    fn reached_nodes(&self, operational: &[bool]) -> Vec<bool> {
        debug_assert_eq!(operational.len(), self.components.len());
        let n = self.node_ids.len();
        let blocked: Vec<bool> = self
            .node_blockers
            .iter()
            .map(|bs| bs.iter().any(|&c| !operational[c]))
            .collect();
        let mut seen = vec![false; n];
        let mut stack = Vec::with_capacity(n);
        for &w in &self.wells {
            if !operational[w] {
                continue;
            }
            let node = self.component_node[w].expect("wells sit on a node");
            if !blocked[node] && !seen[node] {
                seen[node] = true;
                stack.push(node);
            }
        }
        while let Some(u) = stack.pop() {
            for &(v, pipe) in &self.adjacency[u] {
                if !seen[v] && !blocked[v] && operational[pipe] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Population served under a full damage map keyed by component id.
    pub fn serviceable_population(
        &self,
        damage: &BTreeMap<String, DamageState>,
        flags: ServiceFlags,
    ) -> Result<u64, NetworkError> {
        let operational = self
            .components
            .iter()
            .map(|c| {
                damage
                    .get(&c.id)
                    .map(|&d| is_operational(c, d, flags))
                    .ok_or_else(|| NetworkError::MissingDamage(c.id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.served_population(&operational))
    }
}

/// Validates a network document.
pub fn build_network(doc: NetworkDocument) -> Result<WaterNetwork, NetworkError> {
    if doc.components.is_empty() {
        return Err(NetworkError::Empty);
    }

    let mut node_index = HashMap::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if node_index.insert(node.id, i).is_some() {
            return Err(NetworkError::DuplicateNode(node.id));
        }
    }
    let num_nodes = doc.nodes.len();

    let mut component_index = HashMap::with_capacity(doc.components.len());
    let mut component_node = Vec::with_capacity(doc.components.len());
    let mut node_blockers = vec![Vec::new(); num_nodes];
    let mut wells = Vec::new();
    for (i, c) in doc.components.iter().enumerate() {
        if component_index.insert(c.id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateComponent(c.id.clone()));
        }
        let invalid = |reason: &str| NetworkError::InvalidComponent {
            id: c.id.clone(),
            reason: reason.to_string(),
        };
        if c.kind.is_pipe() {
            if !(c.pipe_length_km > 0.0 && c.pipe_length_km.is_finite()) {
                return Err(invalid("pipe length must be positive"));
            }
            if matches!(c.pipe_k, Some(k) if !(k > 0.0 && k.is_finite())) {
                return Err(invalid("pipe K must be positive"));
            }
            component_node.push(None);
        } else {
            if c.pipe_length_km != 0.0 {
                return Err(invalid("only pipes have a length"));
            }
            if c.pipe_k.is_some() {
                return Err(invalid("only pipes have a K coefficient"));
            }
            let node = c
                .attached_node
                .ok_or_else(|| invalid("facility must sit on a node"))?;
            let idx = *node_index
                .get(&node)
                .ok_or_else(|| NetworkError::MissingNode {
                    element: format!("component `{}`", c.id),
                    node,
                })?;
            component_node.push(Some(idx));
            if c.kind.is_transit() {
                node_blockers[idx].push(i);
            }
            if c.kind == ComponentKind::Well {
                wells.push(i);
            }
        }
    }

    let mut edges = Vec::with_capacity(doc.edges.len());
    let mut adjacency = vec![Vec::new(); num_nodes];
    let mut used_pipes = HashSet::new();
    for (e, spec) in doc.edges.iter().enumerate() {
        let lookup = |node: u32| {
            node_index
                .get(&node)
                .copied()
                .ok_or_else(|| NetworkError::MissingNode {
                    element: format!("edge {e}"),
                    node,
                })
        };
        let a = lookup(spec.from)?;
        let b = lookup(spec.to)?;
        let pipe = *component_index
            .get(&spec.pipe)
            .ok_or_else(|| NetworkError::MissingPipe {
                edge: e,
                from: spec.from,
                to: spec.to,
                pipe: spec.pipe.clone(),
            })?;
        let kind = doc.components[pipe].kind;
        if !kind.is_pipe() {
            return Err(NetworkError::NotAPipe {
                edge: e,
                id: spec.pipe.clone(),
                kind,
            });
        }
        if !used_pipes.insert(pipe) {
            return Err(NetworkError::PipeReused(spec.pipe.clone()));
        }
        edges.push(Edge { a, b, pipe });
        adjacency[a].push((b, pipe));
        adjacency[b].push((a, pipe));
    }
    if let Some(c) = doc
        .components
        .iter()
        .enumerate()
        .find(|(i, c)| c.kind.is_pipe() && !used_pipes.contains(i))
    {
        return Err(NetworkError::DanglingPipe(c.1.id.clone()));
    }

    let mut node_population = vec![0u64; num_nodes];
    let mut regions = Vec::with_capacity(doc.demand_regions.len());
    for r in &doc.demand_regions {
        if r.population < 0 {
            return Err(NetworkError::NegativePopulation {
                node: r.node,
                population: r.population,
            });
        }
        let idx = *node_index
            .get(&r.node)
            .ok_or_else(|| NetworkError::MissingNode {
                element: "demand region".to_string(),
                node: r.node,
            })?;
        node_population[idx] += r.population as u64;
        regions.push((r.node, r.population as u64));
    }
    let total_population = regions.iter().map(|r| r.1).sum();

    let network = WaterNetwork {
        name: doc.name.unwrap_or_else(|| "unnamed".to_string()),
        node_ids: doc.nodes.iter().map(|n| n.id).collect(),
        node_sites: doc.nodes.iter().map(|n| n.site).collect(),
        components: doc.components,
        node_index,
        component_index,
        edges,
        adjacency,
        component_node,
        node_blockers,
        wells,
        node_population,
        regions,
        total_population,
    };

    let all_up = vec![true; network.components.len()];
    if network.served_population(&all_up) != total_population {
        let reached = network.reached_nodes(&all_up);
        let mut nodes: Vec<u32> = network
            .regions
            .iter()
            .filter(|(node, pop)| *pop > 0 && !reached[network.node_index[node]])
            .map(|(node, _)| *node)
            .collect();
        nodes.dedup();
        return Err(NetworkError::Disconnected { nodes });
    }
    Ok(network)
}
