//! Browser bindings for the demo page. Every export takes and returns JSON
//! strings; the plain-Rust functions underneath are what the tests call.

use antnas_core::engine::{
    generate_path, AntRecord, EvaluatorBinding, RunConfig, SearchObserver, SearchState,
};
use antnas_core::evaluation::{Metrics, SyntheticEvaluator};
use antnas_core::graph::{EdgeId, NodeId, PheromoneGraph, UniformHeuristic};
use antnas_core::select::{aco_select, argmax, wheel_probabilities, Candidate};
use antnas_core::space::default_space;
use antnas_core::{search, SelectionParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

pub const MAX_DRAWS: usize = 1_000_000;
pub const MAX_STEPS: usize = 500;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    pub pheromone: Vec<f64>,
    /// Defaults to 1 for every candidate.
    #[serde(default)]
    pub heuristic: Option<Vec<f64>>,
    pub greediness: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize, PartialEq)]
pub struct SelectionReport {
    pub empirical: Vec<f64>,
    /// q₀ on the argmax plus (1 − q₀) times the roulette share.
    pub theoretical: Vec<f64>,
    pub argmax: usize,
}

pub fn selection_report(req: &SelectionRequest) -> Result<SelectionReport, String> {
    if req.draws == 0 || req.draws > MAX_DRAWS {
        return Err(format!("draws must be in 1..={MAX_DRAWS}"));
    }
    let heuristic = req
        .heuristic
        .clone()
        .unwrap_or_else(|| vec![1.0; req.pheromone.len()]);
    if heuristic.len() != req.pheromone.len() {
        return Err("pheromone and heuristic lengths differ".into());
    }
    let cands: Vec<Candidate> = req
        .pheromone
        .iter()
        .zip(&heuristic)
        .map(|(t, h)| Candidate::new(*t, *h))
        .collect();
    let params = SelectionParams {
        greediness: req.greediness,
        beta: req.beta,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut counts = vec![0usize; cands.len()];
    for _ in 0..req.draws {
        counts[aco_select(&cands, &params, &mut rng).map_err(|e| e.to_string())?] += 1;
    }
    let best = argmax(&cands, req.beta);
    let theoretical = wheel_probabilities(&cands, req.beta)
        .into_iter()
        .enumerate()
        .map(|(i, p)| (1.0 - req.greediness) * p + if i == best { req.greediness } else { 0.0 })
        .collect();
    Ok(SelectionReport {
        empirical: counts.iter().map(|&c| c as f64 / req.draws as f64).collect(),
        theoretical,
        argmax: best,
    })
}

#[derive(Debug, Serialize)]
pub struct AntSummary {
    pub ant: usize,
    pub score: f64,
    pub architecture: String,
}

#[derive(Debug, Serialize)]
pub struct RoundSnapshot {
    pub round: usize,
    pub best_score: f64,
    pub best_architecture: String,
    /// Graph nodes on the incumbent's path, Input first.
    pub best_nodes: Vec<NodeId>,
    pub ants: Vec<AntSummary>,
    pub graph: PheromoneGraph,
}

#[derive(Debug, Serialize)]
pub struct SearchReport {
    pub target: String,
    pub rounds: Vec<RoundSnapshot>,
}

#[derive(Default)]
struct Recorder {
    ants: Vec<AntSummary>,
    rounds: Vec<RoundSnapshot>,
}

impl SearchObserver for Recorder {
    fn on_ant(&mut self, record: &AntRecord) -> Result<(), String> {
        self.ants.push(AntSummary {
            ant: record.ant_index,
            score: record.score,
            architecture: record.architecture.clone(),
        });
        Ok(())
    }

    fn on_round(&mut self, state: &SearchState) -> Result<(), String> {
        let best = state.incumbent.as_ref().ok_or("round ended without incumbent")?;
        self.rounds.push(RoundSnapshot {
            round: state.round,
            best_score: best.accuracy().unwrap_or(0.0),
            best_architecture: best.descriptor.prefix_key(best.descriptor.len()),
            best_nodes: best.nodes.clone(),
            ants: std::mem::take(&mut self.ants),
            graph: state.graph.clone(),
        });
        Ok(())
    }
}

/// Largest run the page will start; keeps the tab responsive.
pub const MAX_EVALUATIONS: usize = 2_000;

pub fn search_report(config: RunConfig) -> Result<SearchReport, String> {
    if config.ant_count.saturating_mul(config.max_depth) > MAX_EVALUATIONS {
        return Err(format!("ant_count × max_depth must not exceed {MAX_EVALUATIONS}"));
    }
    if config.evaluator != EvaluatorBinding::Synthetic {
        return Err("the browser demo only runs the synthetic evaluator".into());
    }
    let space = default_space();
    let landscape = config.resolve_landscape(&space);
    let target = landscape.target.prefix_key(landscape.target.len());
    let mut recorder = Recorder::default();
    search(config, &space, &mut SyntheticEvaluator::new(landscape), &mut recorder)
        .map_err(|e| e.to_string())?;
    Ok(SearchReport {
        target,
        rounds: recorder.rounds,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    pub start: f64,
    pub rho: f64,
    pub alpha: f64,
    pub tau0: f64,
    /// Score of the best tour deposited by the global update.
    pub best_score: f64,
    pub steps: usize,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Curves {
    /// Repeated local updates of one edge starting at `start`.
    pub local: Vec<f64>,
    /// Repeated global updates of an edge on the best tour.
    pub global_on: Vec<f64>,
    /// The same for an edge off the best tour.
    pub global_off: Vec<f64>,
}

/// Iterates the engine's own update rules on a real graph.
pub fn update_curves(req: &CurveRequest) -> Result<Curves, String> {
    if req.steps > MAX_STEPS {
        return Err(format!("steps must not exceed {MAX_STEPS}"));
    }
    if !(0.0..=1.0).contains(&req.best_score) {
        return Err("best_score must be in [0, 1]".into());
    }
    let space = default_space();
    let mut g = PheromoneGraph::new(&space, req.tau0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let greedy = SelectionParams {
        greediness: 1.0,
        beta: 1.0,
    };
    let mut tour = generate_path(&mut g, &space, &greedy, &UniformHeuristic, [28, 28, 1], &mut rng, 0)
        .map_err(|e| e.to_string())?;
    tour.metrics = Some(Metrics::scored(req.best_score));
    let on = tour.edges[0];
    let off = (0..g.edge_count())
        .map(EdgeId)
        .find(|e| !tour.edges.contains(e))
        .ok_or("graph has a single edge")?;
    let err = |e: antnas_core::graph::GraphError| e.to_string();
    let pheromone = |g: &PheromoneGraph, e| g.edge(e).map(|e| e.pheromone).unwrap_or(f64::NAN);

    let mut local_graph = g.clone();
    local_graph.set_edge_pheromone(on, req.start).map_err(err)?;
    let mut local = vec![req.start];
    for _ in 0..req.steps {
        local_graph.local_update(&tour, req.rho, req.tau0).map_err(err)?;
        local.push(pheromone(&local_graph, on));
    }

    g.set_edge_pheromone(on, req.start).map_err(err)?;
    g.set_edge_pheromone(off, req.start).map_err(err)?;
    let (mut global_on, mut global_off) = (vec![req.start], vec![req.start]);
    for _ in 0..req.steps {
        g.global_update(&tour, req.alpha).map_err(err)?;
        global_on.push(pheromone(&g, on));
        global_off.push(pheromone(&g, off));
    }
    Ok(Curves {
        local,
        global_on,
        global_off,
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| e.to_string())
}

/// Empirical vs. expected selection frequencies for a candidate list.
#[wasm_bindgen(js_name = selectionFrequencies)]
pub fn selection_frequencies(request_json: &str) -> Result<String, JsValue> {
    to_js(parse(request_json).and_then(|r| selection_report(&r)))
}

/// Runs a synthetic search and returns one graph snapshot per round.
#[wasm_bindgen(js_name = runSearch)]
pub fn run_search(config_json: &str) -> Result<String, JsValue> {
    to_js(parse(config_json).and_then(search_report))
}

/// Local and global update trajectories for one edge.
#[wasm_bindgen(js_name = updateCurves)]
pub fn update_curves_js(request_json: &str) -> Result<String, JsValue> {
    to_js(parse(request_json).and_then(|r| update_curves(&r)))
}
