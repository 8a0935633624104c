//! Ant Colony System search over layered CNN architecture graphs.
//!
//! Ants walk a pheromone graph that starts as a lone input node and gains one
//! depth level per round. Each step picks the next layer and then its
//! attributes with the ACS rule (argmax with probability q₀, roulette
//! otherwise). After an ant's architecture is scored it decays the pheromone
//! it used toward τ₀; after every round the best architecture seen so far
//! deposits its accuracy while the rest of the graph evaporates.
//!
//! Scoring is pluggable through [`evaluation::Evaluator`]. The crate ships a
//! synthetic landscape with an exhaustive oracle, and a newline-delimited
//! JSON protocol ([`protocol`]) for external training workers.

pub mod binding;
pub mod engine;
pub mod evaluation;
pub mod graph;
pub mod output;
pub mod protocol;
pub mod select;
pub mod space;
pub mod sweep;
pub mod tour;

pub use engine::{search, Engine, RunConfig, SearchOutcome, SearchState};
pub use evaluation::{Evaluator, LandscapeSpec, Metrics, SyntheticEvaluator};
pub use graph::PheromoneGraph;
pub use select::{aco_select, SelectionParams};
pub use space::{default_space, ArchitectureDescriptor, LayerKind, SearchSpace};
pub use tour::Tour;
