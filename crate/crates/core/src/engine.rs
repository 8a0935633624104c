//! The ant search loop: path generation, per-ant evaluation with local
//! updates, incumbent tracking, global updates and progressive deepening.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{Evaluator, LandscapeSpec, Metrics, WeightCache};
use crate::graph::{
    check_open_unit, check_positive, GraphError, HeuristicProvider, PheromoneGraph,
    UniformHeuristic,
};
use crate::select::{aco_select, Candidate, SelectError, SelectionParams};
use crate::space::{complete_layers, ArchitectureDescriptor, Layer, LayerKind, SearchSpace};
use crate::tour::{find_best, Tour};

/// Decay, evaporation and initial pheromone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneParams {
    /// Local decay factor ρ ∈ (0, 1).
    pub rho: f64,
    /// Global evaporation α ∈ (0, 1).
    pub alpha: f64,
    /// Initial pheromone τ₀ > 0.
    pub tau0: f64,
}

impl Default for PheromoneParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            alpha: 0.1,
            tau0: 0.1,
        }
    }
}

/// Where architectures get scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorBinding {
    /// Built-in synthetic landscape.
    Synthetic,
    /// Worker process speaking the NDJSON protocol on its standard streams.
    Exec(String),
    /// Worker listening on a TCP address.
    Tcp(String),
}

impl FromStr for EvaluatorBinding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "synthetic" {
            return Ok(Self::Synthetic);
        }
        match s.split_once(':') {
            Some(("exec", cmd)) if !cmd.trim().is_empty() => Ok(Self::Exec(cmd.to_string())),
            Some(("tcp", addr)) if !addr.trim().is_empty() => Ok(Self::Tcp(addr.to_string())),
            _ => Err(format!(
                "unknown evaluator {s:?}; expected synthetic, exec:<command> or tcp:<host:port>"
            )),
        }
    }
}

impl std::fmt::Display for EvaluatorBinding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Synthetic => f.write_str("synthetic"),
            Self::Exec(cmd) => write!(f, "exec:{cmd}"),
            Self::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

impl Serialize for EvaluatorBinding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EvaluatorBinding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Every knob of a run. Serialized flat so each field maps to one CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ant_count: usize,
    /// Selectable layers in the deepest round; Input and Output excluded.
    pub max_depth: usize,
    pub greediness: f64,
    pub beta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub tau0: f64,
    pub seed: u64,
    pub evaluator: EvaluatorBinding,
    pub input_shape: [u32; 3],
    /// Explicit landscape for the synthetic evaluator.
    pub landscape: Option<LandscapeSpec>,
    /// Seed for a generated landscape when `landscape` is absent.
    pub landscape_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PheromoneParams::default();
        let s = SelectionParams::default();
        Self {
            ant_count: 8,
            max_depth: 3,
            greediness: s.greediness,
            beta: s.beta,
            rho: p.rho,
            alpha: p.alpha,
            tau0: p.tau0,
            seed: 0,
            evaluator: EvaluatorBinding::Synthetic,
            input_shape: [28, 28, 1],
            landscape: None,
            landscape_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} = {value} must be {bound}")]
    Bound {
        field: &'static str,
        value: String,
        bound: &'static str,
    },
    #[error("landscape target: {0}")]
    Landscape(String),
}

impl RunConfig {
    pub fn selection(&self) -> SelectionParams {
        SelectionParams {
            greediness: self.greediness,
            beta: self.beta,
        }
    }

    pub fn pheromone(&self) -> PheromoneParams {
        PheromoneParams {
            rho: self.rho,
            alpha: self.alpha,
            tau0: self.tau0,
        }
    }

    pub fn validate(&self, space: &SearchSpace) -> Result<(), ConfigError> {
        let bound = |field, value: String, bound| {
            Err(ConfigError::Bound {
                field,
                value,
                bound,
            })
        };
        if self.ant_count < 1 {
            return bound("ant_count", self.ant_count.to_string(), ">= 1");
        }
        if self.max_depth < 1 {
            return bound("max_depth", self.max_depth.to_string(), ">= 1");
        }
        if !(0.0..=1.0).contains(&self.greediness) {
            return bound("greediness", self.greediness.to_string(), "in [0, 1]");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bound("beta", self.beta.to_string(), ">= 0");
        }
        if check_open_unit("rho", self.rho).is_err() {
            return bound("rho", self.rho.to_string(), "in (0, 1)");
        }
        if check_open_unit("alpha", self.alpha).is_err() {
            return bound("alpha", self.alpha.to_string(), "in (0, 1)");
        }
        if check_positive("tau0", self.tau0).is_err() {
            return bound("tau0", self.tau0.to_string(), "> 0");
        }
        if self.input_shape.contains(&0) {
            return bound("input_shape", format!("{:?}", self.input_shape), "positive");
        }
        if let Some(l) = &self.landscape {
            l.target
                .validate(space)
                .map_err(|e| ConfigError::Landscape(e.to_string()))?;
            if !(l.discount > 0.0 && l.discount <= 1.0) {
                return bound("landscape.discount", l.discount.to_string(), "in (0, 1]");
            }
            if l.noise_sigma.is_nan() || l.noise_sigma < 0.0 {
                return bound("landscape.noise_sigma", l.noise_sigma.to_string(), ">= 0");
            }
        }
        Ok(())
    }

    /// The landscape the synthetic evaluator should use.
    pub fn resolve_landscape(&self, space: &SearchSpace) -> LandscapeSpec {
        self.landscape.clone().unwrap_or_else(|| {
            LandscapeSpec::generate(space, self.input_shape, self.max_depth, self.landscape_seed)
        })
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error("generated an invalid architecture: {0}")]
    InvalidArchitecture(#[from] crate::space::ValidationError),
    #[error("observer failed: {0}")]
    Observer(String),
}

/// Walks one ant from the input node to the graph's current max depth.
///
/// At each step the graph is expanded around the current node, the next
/// node is picked with [`aco_select`] over edge (τ, η), then each attribute
/// of that node is picked in catalog order over its option table.
/// Single-option attributes are taken without a draw. The walk is finally
/// completed with the minimal Flatten/Output suffix.
pub fn generate_path<R: rand::Rng + ?Sized>(
    graph: &mut PheromoneGraph,
    space: &SearchSpace,
    params: &SelectionParams,
    heuristic: &dyn HeuristicProvider,
    input_shape: [u32; 3],
    rng: &mut R,
    trace_id: u64,
) -> Result<Tour, EngineError> {
    let mut current = graph.input_node();
    let mut tour = Tour {
        nodes: vec![current],
        edges: Vec::new(),
        choices: vec![Vec::new()],
        descriptor: ArchitectureDescriptor::new(input_shape, vec![Layer::bare(LayerKind::Input)]),
        metrics: None,
        trace_id,
    };
    let mut flattened = false;
    for _ in 0..graph.current_max_depth() {
        let neighbours = graph.expand_neighbours(current, flattened, space, heuristic)?;
        if neighbours.is_empty() {
            break;
        }
        let candidates = neighbours
            .iter()
            .map(|(e, _)| graph.edge(*e).map(|e| Candidate::new(e.pheromone, e.heuristic)))
            .collect::<Result<Vec<_>, _>>()?;
        let (edge, next) = neighbours[aco_select(&candidates, params, rng)?];

        let node = graph.node(next)?;
        let mut picks = Vec::with_capacity(node.attributes.len());
        for table in &node.attributes {
            if table.pheromone.len() == 1 {
                picks.push(0);
                continue;
            }
            let options: Vec<Candidate> = table
                .pheromone
                .iter()
                .zip(&table.heuristic)
                .map(|(&t, &h)| Candidate::new(t, h))
                .collect();
            picks.push(aco_select(&options, params, rng)?);
        }
        let kind = node.kind;
        tour.descriptor
            .layers
            .push(space.template(kind).layer_from_choices(&picks));
        tour.nodes.push(next);
        tour.edges.push(edge);
        tour.choices.push(picks);
        flattened |= kind == LayerKind::Flatten;
        current = next;
    }
    let tour = complete_path(tour, space);
    tour.descriptor.validate(space)?;
    Ok(tour)
}

/// Appends the minimal legal suffix to the tour's architecture. The added
/// layers are not pheromone decisions, so nodes/edges are untouched.
pub fn complete_path(mut tour: Tour, space: &SearchSpace) -> Tour {
    complete_layers(&mut tour.descriptor.layers, space);
    tour
}

/// One evaluated ant, as reported to observers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntRecord {
    pub round: usize,
    pub ant_index: usize,
    pub depth: usize,
    pub score: f64,
    pub architecture: String,
    pub wall_ms: u64,
}

/// Hooks invoked by the search loop. Both default to no-ops.
pub trait SearchObserver {
    fn on_ant(&mut self, _record: &AntRecord) -> Result<(), String> {
        Ok(())
    }

    fn on_round(&mut self, _state: &SearchState) -> Result<(), String> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl SearchObserver for NoObserver {}

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to continue a run: the checkpoint payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchState {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Rounds finished so far; the next round runs at depth `round + 1`.
    pub round: usize,
    pub evaluations: u64,
    pub graph: PheromoneGraph,
    pub incumbent: Option<Tour>,
    /// Incumbent accuracy after each finished round.
    pub best_history: Vec<f64>,
    pub weight_cache: WeightCache,
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint is not valid JSON: {0}")]
    Parse(String),
    #[error(
        "checkpoint schema version {found} does not match supported version {expected}; \
         re-run the search with this build or convert the file with the matching release"
    )]
    SchemaMismatch { found: u64, expected: u32 },
    #[error("checkpoint content is inconsistent: {0}")]
    Inconsistent(String),
}

impl SearchState {
    pub fn new(config: RunConfig, space: &SearchSpace) -> Result<Self, EngineError> {
        config.validate(space)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            graph: PheromoneGraph::new(space, config.tau0)?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            round: 0,
            evaluations: 0,
            incumbent: None,
            best_history: Vec::new(),
            weight_cache: WeightCache::new(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.config.max_depth
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CheckpointError::Parse("missing schema_version".into()))?;
        if found != SCHEMA_VERSION as u64 {
            return Err(CheckpointError::SchemaMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let state: Self =
            serde_json::from_value(value).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        if state.graph.current_max_depth() != state.round + 1 {
            return Err(CheckpointError::Inconsistent(format!(
                "graph depth {} after {} rounds",
                state.graph.current_max_depth(),
                state.round
            )));
        }
        if state.best_history.len() != state.round {
            return Err(CheckpointError::Inconsistent("best_history length".into()));
        }
        Ok(state)
    }
}

/// Result of a finished search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Tour,
    pub graph: PheromoneGraph,
    pub evaluations: u64,
}

fn stopwatch() -> impl FnOnce() -> u64 {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let start = std::time::Instant::now();
        move || start.elapsed().as_millis() as u64
    }
    #[cfg(target_arch = "wasm32")]
    {
        || 0
    }
}

/// A search run that can be advanced one round at a time.
pub struct Engine<'s> {
    space: &'s SearchSpace,
    heuristic: Box<dyn HeuristicProvider + 's>,
    state: SearchState,
}

impl<'s> Engine<'s> {
    pub fn new(config: RunConfig, space: &'s SearchSpace) -> Result<Self, EngineError> {
        Ok(Self::resume(SearchState::new(config, space)?, space))
    }

    /// Continues from a checkpoint. The rng, graph and cache pick up exactly
    /// where they were saved.
    pub fn resume(state: SearchState, space: &'s SearchSpace) -> Self {
        Self {
            space,
            heuristic: Box::new(UniformHeuristic),
            state,
        }
    }

    pub fn with_heuristic(mut self, heuristic: impl HeuristicProvider + 's) -> Self {
        self.heuristic = Box::new(heuristic);
        self
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn into_state(self) -> SearchState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }

    /// Walks, evaluates and local-updates `ant_count` ants in sequence.
    /// A failed evaluation scores 0 and the round continues.
    pub fn generate_ants<E: Evaluator + ?Sized>(
        &mut self,
        evaluator: &mut E,
        observer: &mut dyn SearchObserver,
    ) -> Result<Vec<Tour>, EngineError> {
        let config = self.state.config.clone();
        let selection = config.selection();
        let round = self.state.round + 1;
        let mut ants = Vec::with_capacity(config.ant_count);
        for ant_index in 0..config.ant_count {
            let mut tour = generate_path(
                &mut self.state.graph,
                self.space,
                &selection,
                self.heuristic.as_ref(),
                config.input_shape,
                &mut self.state.rng,
                self.state.evaluations,
            )?;
            let hint = self.state.weight_cache.reuse_hint(&tour.descriptor);
            let elapsed = stopwatch();
            let outcome = evaluator.evaluate(&tour.descriptor, &hint);
            let wall_ms = elapsed();
            self.state.evaluations += 1;
            let metrics = match outcome {
                Ok(eval) if (0.0..=1.0).contains(&eval.metrics.accuracy) => {
                    let mut metrics = eval.metrics;
                    metrics.reused_prefix_len = metrics.reused_prefix_len.min(hint.prefix_len);
                    self.state
                        .weight_cache
                        .record(&tour.descriptor, metrics.accuracy, eval.stored);
                    metrics
                }
                Ok(eval) => {
                    log::warn!("accuracy {} out of range; scoring 0", eval.metrics.accuracy);
                    Metrics::failed(format!("accuracy {} outside [0, 1]", eval.metrics.accuracy))
                }
                Err(e) => {
                    log::warn!("evaluation failed: {e}");
                    Metrics::failed(e.to_string())
                }
            };
            let record = AntRecord {
                round,
                ant_index,
                depth: tour.depth(),
                score: metrics.accuracy,
                architecture: tour.descriptor.prefix_key(tour.descriptor.len()),
                wall_ms,
            };
            tour.metrics = Some(metrics);
            self.state
                .graph
                .local_update(&tour, config.rho, config.tau0)?;
            observer.on_ant(&record).map_err(EngineError::Observer)?;
            ants.push(tour);
        }
        Ok(ants)
    }

    /// One full round: ants, incumbent update, global update, deepening.
    /// Does nothing once the run is finished.
    pub fn run_round<E: Evaluator + ?Sized>(
        &mut self,
        evaluator: &mut E,
        observer: &mut dyn SearchObserver,
    ) -> Result<(), EngineError> {
        if self.is_finished() {
            return Ok(());
        }
        let ants = self.generate_ants(evaluator, observer)?;
        let best = &ants[find_best(&ants).expect("ant_count >= 1 and all evaluated")];
        let improves = match &self.state.incumbent {
            None => true,
            Some(inc) => best.accuracy() > inc.accuracy(),
        };
        if improves {
            self.state.incumbent = Some(best.clone());
        }
        let incumbent = self.state.incumbent.as_ref().expect("set above");
        self.state.graph.global_update(incumbent, self.state.config.alpha)?;
        self.state.best_history.push(incumbent.accuracy().unwrap_or(0.0));
        self.state.graph.increase_depth();
        self.state.round += 1;
        observer.on_round(&self.state).map_err(EngineError::Observer)?;
        Ok(())
    }

    /// Runs the remaining rounds and returns the global best.
    pub fn run<E: Evaluator + ?Sized>(
        mut self,
        evaluator: &mut E,
        observer: &mut dyn SearchObserver,
    ) -> Result<SearchOutcome, EngineError> {
        while !self.is_finished() {
            self.run_round(evaluator, observer)?;
        }
        Ok(self.outcome())
    }

    pub fn outcome(&self) -> SearchOutcome {
        SearchOutcome {
            best: self
                .state
                .incumbent
                .clone()
                .expect("a finished run has an incumbent"),
            graph: self.state.graph.clone(),
            evaluations: self.state.evaluations,
        }
    }
}

/// Runs a full search from scratch.
pub fn search<E: Evaluator + ?Sized>(
    config: RunConfig,
    space: &SearchSpace,
    evaluator: &mut E,
    observer: &mut dyn SearchObserver,
) -> Result<SearchOutcome, EngineError> {
    Engine::new(config, space)?.run(evaluator, observer)
}
