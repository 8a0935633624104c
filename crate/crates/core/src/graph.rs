//! Layered pheromone graph that grows one depth level per search round.
//!
//! Nodes are unique per `(kind, depth)`. Edges only connect depth `d` to
//! depth `d + 1`. Every node also carries one pheromone table per selectable
//! attribute, indexed by option position in the catalog. Nothing is ever
//! removed, so ids stay valid for the whole run.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{AttrValue, LayerKind, SearchSpace};
use crate::tour::Tour;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

/// What a heuristic value is being asked for.
#[derive(Debug, Clone, Copy)]
pub enum HeuristicKey<'a> {
    Edge {
        from: LayerKind,
        to: LayerKind,
    },
    Attribute {
        kind: LayerKind,
        attribute: &'a str,
        option: &'a AttrValue,
    },
}

/// Source of the static desirability η used in selection. Values must be
/// strictly positive.
pub trait HeuristicProvider {
    fn heuristic(&self, key: HeuristicKey<'_>) -> f64;
}

/// η = 1 everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformHeuristic;

impl HeuristicProvider for UniformHeuristic {
    fn heuristic(&self, _key: HeuristicKey<'_>) -> f64 {
        1.0
    }
}

impl<F> HeuristicProvider for F
where
    F: Fn(HeuristicKey<'_>) -> f64,
{
    fn heuristic(&self, key: HeuristicKey<'_>) -> f64 {
        self(key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    pub name: String,
    pub pheromone: Vec<f64>,
    pub heuristic: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: LayerKind,
    pub depth: usize,
    pub attributes: Vec<AttributeTable>,
    pub out_edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PheromoneEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub pheromone: f64,
    pub heuristic: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("{name} = {value} is outside {bounds}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        bounds: &'static str,
    },
    #[error("node {0:?} does not exist")]
    UnknownNode(NodeId),
    #[error("edge {0:?} does not exist")]
    UnknownEdge(EdgeId),
    #[error("node {node:?} at depth {depth} cannot expand past max depth {max}")]
    DepthExceeded {
        node: NodeId,
        depth: usize,
        max: usize,
    },
    #[error("heuristic for {0} must be positive and finite, got {1}")]
    BadHeuristic(String, f64),
    #[error("tour does not match the graph: {0}")]
    TourMismatch(String),
    #[error("tour carries no accuracy to deposit")]
    Unevaluated,
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<(), GraphError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(GraphError::OutOfRange {
            name,
            value,
            bounds: "(0, 1)",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<(), GraphError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GraphError::OutOfRange {
            name,
            value,
            bounds: "(0, inf)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PheromoneGraph {
    tau0: f64,
    current_max_depth: usize,
    nodes: Vec<GraphNode>,
    edges: Vec<PheromoneEdge>,
}

impl PheromoneGraph {
    /// A graph holding only the input node, with max depth 1.
    pub fn new(space: &SearchSpace, tau0: f64) -> Result<Self, GraphError> {
        check_positive("tau0", tau0)?;
        let mut graph = Self {
            tau0,
            current_max_depth: 1,
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        graph.push_node(space, LayerKind::Input, 0, &UniformHeuristic)?;
        Ok(graph)
    }

    pub fn input_node(&self) -> NodeId {
        NodeId(0)
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn current_max_depth(&self) -> usize {
        self.current_max_depth
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PheromoneEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Result<&GraphNode, GraphError> {
        self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id))
    }

    pub fn edge(&self, id: EdgeId) -> Result<&PheromoneEdge, GraphError> {
        self.edges.get(id.0).ok_or(GraphError::UnknownEdge(id))
    }

    /// Overwrites one edge's pheromone, e.g. to seed a graph from prior runs.
    pub fn set_edge_pheromone(&mut self, id: EdgeId, value: f64) -> Result<(), GraphError> {
        check_positive("pheromone", value)?;
        self.edges
            .get_mut(id.0)
            .ok_or(GraphError::UnknownEdge(id))?
            .pheromone = value;
        Ok(())
    }

    pub fn find_node(&self, kind: LayerKind, depth: usize) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.kind == kind && n.depth == depth)
            .map(NodeId)
    }

    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.nodes
            .get(from.0)?
            .out_edges
            .iter()
            .copied()
            .find(|e| self.edges[e.0].to == to)
    }

    /// Sum of every pheromone value, edges and attribute tables alike.
    pub fn total_pheromone(&self) -> f64 {
        let edges: f64 = self.edges.iter().map(|e| e.pheromone).sum();
        let attrs: f64 = self
            .nodes
            .iter()
            .flat_map(|n| &n.attributes)
            .flat_map(|t| &t.pheromone)
            .sum();
        edges + attrs
    }

    /// Smallest pheromone value anywhere in the graph.
    pub fn min_pheromone(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.pheromone)
            .chain(
                self.nodes
                    .iter()
                    .flat_map(|n| &n.attributes)
                    .flat_map(|t| t.pheromone.iter().copied()),
            )
            .fold(f64::INFINITY, f64::min)
    }

    fn push_node(
        &mut self,
        space: &SearchSpace,
        kind: LayerKind,
        depth: usize,
        heuristic: &dyn HeuristicProvider,
    ) -> Result<NodeId, GraphError> {
        let template = space.template(kind);
        let mut attributes = Vec::with_capacity(template.attributes.len());
        for spec in &template.attributes {
            let mut etas = Vec::with_capacity(spec.options.len());
            for option in &spec.options {
                let eta = heuristic.heuristic(HeuristicKey::Attribute {
                    kind,
                    attribute: &spec.name,
                    option,
                });
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(GraphError::BadHeuristic(
                        format!("{kind}.{}={option}", spec.name),
                        eta,
                    ));
                }
                etas.push(eta);
            }
            attributes.push(AttributeTable {
                name: spec.name.clone(),
                pheromone: vec![self.tau0; spec.options.len()],
                heuristic: etas,
            });
        }
        self.nodes.push(GraphNode {
            kind,
            depth,
            attributes,
            out_edges: Vec::new(),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Makes sure every kind allowed after `from` (in the given flatten
    /// context) has a node one level deeper and an edge leading to it, then
    /// returns those edges in catalog successor order. Existing nodes and
    /// edges are reused untouched; new ones start at τ₀.
    pub fn expand_neighbours(
        &mut self,
        from: NodeId,
        flattened: bool,
        space: &SearchSpace,
        heuristic: &dyn HeuristicProvider,
    ) -> Result<Vec<(EdgeId, NodeId)>, GraphError> {
        let (kind, depth) = {
            let n = self.node(from)?;
            (n.kind, n.depth)
        };
        if depth >= self.current_max_depth {
            return Err(GraphError::DepthExceeded {
                node: from,
                depth,
                max: self.current_max_depth,
            });
        }
        let successors: Vec<LayerKind> = space.selectable_successors(kind, flattened).collect();
        let mut out = Vec::with_capacity(successors.len());
        for next in successors {
            let target = match self.find_node(next, depth + 1) {
                Some(id) => id,
                None => self.push_node(space, next, depth + 1, heuristic)?,
            };
            let edge = match self.edge_between(from, target) {
                Some(id) => id,
                None => {
                    let eta = heuristic.heuristic(HeuristicKey::Edge { from: kind, to: next });
                    if !(eta > 0.0 && eta.is_finite()) {
                        return Err(GraphError::BadHeuristic(format!("{kind}->{next}"), eta));
                    }
                    self.edges.push(PheromoneEdge {
                        from,
                        to: target,
                        pheromone: self.tau0,
                        heuristic: eta,
                    });
                    let id = EdgeId(self.edges.len() - 1);
                    self.nodes[from.0].out_edges.push(id);
                    id
                }
            };
            out.push((edge, target));
        }
        Ok(out)
    }

    pub fn increase_depth(&mut self) {
        self.current_max_depth += 1;
    }

    fn check_tour(&self, tour: &Tour) -> Result<(), GraphError> {
        let mismatch = |msg: String| Err(GraphError::TourMismatch(msg));
        if tour.nodes.first() != Some(&self.input_node()) {
            return mismatch("tour does not start at the input node".into());
        }
        if tour.edges.len() + 1 != tour.nodes.len() || tour.choices.len() != tour.nodes.len() {
            return mismatch("node, edge and choice counts disagree".into());
        }
        for (i, &edge_id) in tour.edges.iter().enumerate() {
            let edge = self.edge(edge_id)?;
            if edge.from != tour.nodes[i] || edge.to != tour.nodes[i + 1] {
                return mismatch(format!("edge {} does not join step {i}", edge_id.0));
            }
        }
        for (node_id, choices) in tour.nodes.iter().zip(&tour.choices) {
            let node = self.node(*node_id)?;
            if node.attributes.len() != choices.len() {
                return mismatch(format!("node {} attribute count", node_id.0));
            }
            for (table, &c) in node.attributes.iter().zip(choices) {
                if c >= table.pheromone.len() {
                    return mismatch(format!("option {c} of {}", table.name));
                }
            }
        }
        Ok(())
    }

    /// Local update: every edge and attribute option on `tour` moves toward τ₀,
    /// τ ← (1−ρ)·τ + ρ·τ₀, once each.
    pub fn local_update(&mut self, tour: &Tour, rho: f64, tau0: f64) -> Result<(), GraphError> {
        check_open_unit("rho", rho)?;
        check_positive("tau0", tau0)?;
        self.check_tour(tour)?;
        let step = |tau: &mut f64| *tau = (1.0 - rho) * *tau + rho * tau0;
        for e in &tour.edges {
            step(&mut self.edges[e.0].pheromone);
        }
        for (node_id, choices) in tour.nodes.iter().zip(&tour.choices) {
            let node = &mut self.nodes[node_id.0];
            for (table, &c) in node.attributes.iter_mut().zip(choices) {
                step(&mut table.pheromone[c]);
            }
        }
        Ok(())
    }

    /// Global update: τ ← (1−α)·τ + α·Δτ over the whole graph, where Δτ is
    /// the best tour's accuracy on its own edges and options and 0 elsewhere.
    pub fn global_update(&mut self, best: &Tour, alpha: f64) -> Result<(), GraphError> {
        check_open_unit("alpha", alpha)?;
        let cost = best.accuracy().ok_or(GraphError::Unevaluated)?;
        if !(0.0..=1.0).contains(&cost) {
            return Err(GraphError::OutOfRange {
                name: "best accuracy",
                value: cost,
                bounds: "[0, 1]",
            });
        }
        self.check_tour(best)?;
        let keep = 1.0 - alpha;
        let on_edge: HashSet<EdgeId> = best.edges.iter().copied().collect();
        let on_option: HashSet<(NodeId, usize, usize)> = best
            .nodes
            .iter()
            .zip(&best.choices)
            .flat_map(|(n, cs)| cs.iter().enumerate().map(move |(a, &o)| (*n, a, o)))
            .collect();
        let update = |tau: &mut f64, on_tour: bool| {
            let deposit = if on_tour { cost } else { 0.0 };
            *tau = keep * *tau + alpha * deposit;
        };
        for (i, edge) in self.edges.iter_mut().enumerate() {
            update(&mut edge.pheromone, on_edge.contains(&EdgeId(i)));
        }
        for (n, node) in self.nodes.iter_mut().enumerate() {
            for (a, table) in node.attributes.iter_mut().enumerate() {
                for (o, tau) in table.pheromone.iter_mut().enumerate() {
                    update(tau, on_option.contains(&(NodeId(n), a, o)));
                }
            }
        }
        Ok(())
    }
}
