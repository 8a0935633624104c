//! Fitness boundary, weight-reuse bookkeeping, and the synthetic landscape
//! used to exercise the search without training networks.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ArchitectureDescriptor, Layer, LayerKind, SearchSpace};

/// Outcome of evaluating one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Validation accuracy in [0, 1]. Failed evaluations score 0.
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    /// Time the evaluator reports spending.
    pub wall_ms: u64,
    /// Leading layers initialised from cached weights.
    pub reused_prefix_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Metrics {
    pub fn scored(accuracy: f64) -> Self {
        Self {
            accuracy,
            loss: None,
            wall_ms: 0,
            reused_prefix_len: 0,
            failure: None,
        }
    }

    pub fn failed(reason: impl Into<String>) -> Self {
        Self {
            failure: Some(reason.into()),
            ..Self::scored(0.0)
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }
}

/// Opaque reference to stored weights. Only the evaluator that produced it
/// knows what it points at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightHandle(pub String);

/// Which cached weights an evaluation may start from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReuseHint {
    pub prefix_len: usize,
    pub handle: Option<WeightHandle>,
}

/// What an evaluator hands back on success.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    /// Handle under which the evaluator stored this model's weights.
    pub stored: Option<WeightHandle>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluator reported {code}: {message}")]
    Reported { code: String, message: String },
    #[error("evaluation timed out after {0} ms")]
    Timeout(u64),
    #[error("evaluator session is dead: {0}")]
    SessionDead(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

/// Anything that can score an architecture.
///
/// Implementations must never report accuracy outside [0, 1]; the engine
/// treats such a result as a failed evaluation.
pub trait Evaluator {
    fn evaluate(
        &mut self,
        descriptor: &ArchitectureDescriptor,
        hint: &ReuseHint,
    ) -> Result<Evaluation, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(
        &mut self,
        descriptor: &ArchitectureDescriptor,
        hint: &ReuseHint,
    ) -> Result<Evaluation, EvalError> {
        (**self).evaluate(descriptor, hint)
    }
}

/// Length of the longest shared leading run of layers, compared by their
/// canonical tokens.
pub fn longest_common_prefix(a: &ArchitectureDescriptor, b: &ArchitectureDescriptor) -> usize {
    a.layer_tokens()
        .zip(b.layer_tokens())
        .take_while(|(x, y)| x == y)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub score: f64,
    pub handle: Option<WeightHandle>,
}

/// Best-scoring weights per canonical path prefix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightCache {
    entries: BTreeMap<String, CacheEntry>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    /// Registers every prefix of `descriptor`; a prefix keeps whichever
    /// model scored highest (the first one on ties).
    pub fn record(
        &mut self,
        descriptor: &ArchitectureDescriptor,
        score: f64,
        handle: Option<WeightHandle>,
    ) {
        for len in 1..=descriptor.len() {
            let key = descriptor.prefix_key(len);
            match self.entries.get(&key) {
                Some(existing) if existing.score >= score => {}
                _ => {
                    self.entries.insert(
                        key,
                        CacheEntry {
                            score,
                            handle: handle.clone(),
                        },
                    );
                }
            }
        }
    }

    /// Longest cached prefix of `descriptor` and its handle.
    pub fn reuse_hint(&self, descriptor: &ArchitectureDescriptor) -> ReuseHint {
        (1..=descriptor.len())
            .rev()
            .find_map(|len| {
                self.entries.get(&descriptor.prefix_key(len)).map(|e| ReuseHint {
                    prefix_len: len,
                    handle: e.handle.clone(),
                })
            })
            .unwrap_or_default()
    }
}

/// Score floor for an architecture sharing nothing with the target.
pub const BASELINE_SCORE: f64 = 0.1;
/// Share of the similarity term governed by depth agreement.
pub const DEPTH_BONUS_WEIGHT: f64 = 0.25;

/// A synthetic fitness landscape centred on a hidden target architecture.
///
/// score = 0.1 + 0.9 · sim · (0.75 + 0.25 · depth_fit), where `sim` is the
/// depth-discounted mean per-layer match over the body layers (between Input
/// and Output) and `depth_fit` is min/max of the two body lengths. A layer
/// match is 0 on a kind mismatch, otherwise 0.5 plus 0.5 times the fraction of
/// matching attributes (1 for attribute-free kinds). With noise on, a
/// Gaussian perturbation seeded by the descriptor is added and the result
/// clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub target: ArchitectureDescriptor,
    /// Weight ratio between consecutive body positions, in (0, 1].
    pub discount: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub const DEFAULT_DISCOUNT: f64 = 0.7;

impl LandscapeSpec {
    /// Landscape whose target is a uniform random walk of exactly `depth`
    /// selectable layers.
    pub fn generate(space: &SearchSpace, input_shape: [u32; 3], depth: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            target: space.sample_walk(input_shape, depth, &mut rng),
            discount: DEFAULT_DISCOUNT,
            noise_sigma: 0.0,
            seed,
        }
    }

    /// Noise-free score.
    pub fn clean_score(&self, d: &ArchitectureDescriptor) -> f64 {
        let body = |x: &ArchitectureDescriptor| -> Vec<Layer> {
            x.layers
                .iter()
                .filter(|l| !matches!(l.kind, LayerKind::Input | LayerKind::Output))
                .cloned()
                .collect()
        };
        let ours = body(d);
        let target = body(&self.target);
        let span = ours.len().max(target.len());
        if span == 0 {
            return 1.0;
        }
        let mut weight = 1.0;
        let mut total = 0.0;
        let mut matched = 0.0;
        for i in 0..span {
            total += weight;
            if let (Some(a), Some(b)) = (ours.get(i), target.get(i)) {
                matched += weight * layer_match(a, b);
            }
            weight *= self.discount;
        }
        let sim = matched / total;
        let depth_fit = ours.len().min(target.len()) as f64 / span as f64;
        let shaped = sim * ((1.0 - DEPTH_BONUS_WEIGHT) + DEPTH_BONUS_WEIGHT * depth_fit);
        BASELINE_SCORE + (1.0 - BASELINE_SCORE) * shaped
    }

    pub fn score(&self, d: &ArchitectureDescriptor) -> f64 {
        let clean = self.clean_score(d);
        if self.noise_sigma <= 0.0 {
            return clean;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(d.prefix_key(d.len()).as_bytes()));
        (clean + self.noise_sigma * standard_normal(&mut rng)).clamp(0.0, 1.0)
    }
}

fn layer_match(a: &Layer, b: &Layer) -> f64 {
    if a.kind != b.kind {
        return 0.0;
    }
    if b.attributes.is_empty() {
        return 1.0;
    }
    let same = b
        .attributes
        .iter()
        .filter(|(k, v)| a.attributes.get(*k) == Some(v))
        .count();
    0.5 + 0.5 * same as f64 / b.attributes.len() as f64
}

// Stable across platforms and releases, unlike std's DefaultHasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Pure, reentrant evaluator backed by a [`LandscapeSpec`]. Reports the full
/// reuse hint as reused and stores weights under the canonical string.
#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    pub landscape: LandscapeSpec,
}

impl SyntheticEvaluator {
    pub fn new(landscape: LandscapeSpec) -> Self {
        Self { landscape }
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(
        &mut self,
        descriptor: &ArchitectureDescriptor,
        hint: &ReuseHint,
    ) -> Result<Evaluation, EvalError> {
        Ok(Evaluation {
            metrics: Metrics {
                reused_prefix_len: hint.prefix_len.min(descriptor.len()),
                ..Metrics::scored(self.landscape.score(descriptor))
            },
            stored: Some(WeightHandle(descriptor.prefix_key(descriptor.len()))),
        })
    }
}

/// Maximum number of walks [`brute_force_best`] will enumerate.
pub const ENUMERATION_GUARD: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumerating depth {depth} needs {count} walks, above the {guard} guard")]
    TooLarge { depth: usize, count: u128, guard: u128 },
    #[error("depth must be at least 1")]
    ZeroDepth,
}

/// Number of distinct selection walks of exactly `len` layers, counting
/// attribute variants. Output is never selected.
pub fn count_walks(space: &SearchSpace, len: usize) -> u128 {
    // state: (kind, flattened) -> number of walks ending there
    let mut frontier: BTreeMap<(LayerKind, bool), u128> = BTreeMap::new();
    frontier.insert((LayerKind::Input, false), 1);
    for _ in 0..len {
        let mut next = BTreeMap::new();
        for ((kind, flat), n) in frontier {
            for succ in space.selectable_successors(kind, flat) {
                let variants = space.template(succ).variant_count() as u128;
                *next
                    .entry((succ, flat || succ == LayerKind::Flatten))
                    .or_insert(0) += n * variants;
            }
        }
        frontier = next;
    }
    frontier.values().sum()
}

/// Every walk of exactly `len` selected layers, uncompleted.
pub fn enumerate_walks(space: &SearchSpace, len: usize) -> Vec<Vec<Layer>> {
    let mut out = Vec::new();
    let mut prefix = vec![Layer::bare(LayerKind::Input)];
    extend_walks(space, len, false, &mut prefix, &mut out);
    out
}

fn extend_walks(
    space: &SearchSpace,
    remaining: usize,
    flattened: bool,
    prefix: &mut Vec<Layer>,
    out: &mut Vec<Vec<Layer>>,
) {
    if remaining == 0 {
        out.push(prefix.clone());
        return;
    }
    let last = prefix.last().expect("prefix holds Input").kind;
    let successors: Vec<LayerKind> = space.selectable_successors(last, flattened).collect();
    for kind in successors {
        let template = space.template(kind);
        for choices in option_product(&template.attributes.iter().map(|a| a.options.len()).collect::<Vec<_>>()) {
            prefix.push(template.layer_from_choices(&choices));
            extend_walks(
                space,
                remaining - 1,
                flattened || kind == LayerKind::Flatten,
                prefix,
                out,
            );
            prefix.pop();
        }
    }
}

fn option_product(sizes: &[usize]) -> Vec<Vec<usize>> {
    sizes.iter().fold(vec![vec![]], |acc, &n| {
        acc.into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect()
    })
}

/// Every distinct completed descriptor reachable with 1..=`depth` selected
/// layers, in enumeration order.
pub fn enumerate_descriptors(
    space: &SearchSpace,
    input_shape: [u32; 3],
    depth: usize,
) -> Result<Vec<ArchitectureDescriptor>, OracleError> {
    if depth == 0 {
        return Err(OracleError::ZeroDepth);
    }
    let count: u128 = (1..=depth).map(|l| count_walks(space, l)).sum();
    if count > ENUMERATION_GUARD {
        return Err(OracleError::TooLarge {
            depth,
            count,
            guard: ENUMERATION_GUARD,
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for len in 1..=depth {
        for mut layers in enumerate_walks(space, len) {
            crate::space::complete_layers(&mut layers, space);
            let d = ArchitectureDescriptor::new(input_shape, layers);
            if seen.insert(d.prefix_key(d.len())) {
                out.push(d);
            }
        }
    }
    Ok(out)
}

/// Exhaustive optimum of the noise-free landscape over every descriptor the
/// search can produce within `depth` rounds. Ties go to the lexicographically
/// smallest canonical string.
pub fn brute_force_best(
    space: &SearchSpace,
    depth: usize,
    landscape: &LandscapeSpec,
) -> Result<(ArchitectureDescriptor, f64), OracleError> {
    let candidates = enumerate_descriptors(space, landscape.target.input_shape, depth)?;
    let mut best: Option<(String, ArchitectureDescriptor, f64)> = None;
    for d in candidates {
        let score = landscape.clean_score(&d);
        let key = d.prefix_key(d.len());
        let better = match &best {
            None => true,
            Some((k, _, s)) => score > *s || (score == *s && key < *k),
        };
        if better {
            best = Some((key, d, score));
        }
    }
    let (_, d, s) = best.expect("depth >= 1 yields at least one descriptor");
    Ok((d, s))
}

/// Outcome of the random-search baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearchResult {
    pub best: ArchitectureDescriptor,
    pub best_score: f64,
    pub evaluations: usize,
}

/// Baseline: `budget` independent uniform walks, each of a depth drawn
/// uniformly from 1..=`max_depth`. Failed evaluations score 0.
pub fn random_search<E: Evaluator + ?Sized, R: Rng>(
    space: &SearchSpace,
    input_shape: [u32; 3],
    max_depth: usize,
    budget: usize,
    evaluator: &mut E,
    rng: &mut R,
) -> Option<RandomSearchResult> {
    let mut best: Option<(ArchitectureDescriptor, f64)> = None;
    for _ in 0..budget {
        let depth = rng.gen_range(1..=max_depth.max(1));
        let d = space.sample_walk(input_shape, depth, rng);
        let score = evaluator
            .evaluate(&d, &ReuseHint::default())
            .map(|e| e.metrics.accuracy)
            .unwrap_or(0.0);
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((d, score));
        }
    }
    best.map(|(best, best_score)| RandomSearchResult {
        best,
        best_score,
        evaluations: budget,
    })
}
