//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::HashSet;
use std::io::Write;

use antnas_core::engine::generate_path;
use antnas_core::evaluation::Metrics;
use antnas_core::graph::{NodeId, PheromoneGraph, UniformHeuristic};
use antnas_core::space::{default_space, LayerKind};
use antnas_core::SelectionParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SHAPE: [u32; 3] = [28, 28, 1];

/// Writes straight to the process stderr so the line survives output capture.
pub fn report(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn flatten_context(kind: LayerKind, rng: &mut ChaCha8Rng) -> bool {
    match kind {
        LayerKind::Flatten | LayerKind::Dense => true,
        LayerKind::Dropout => rng.gen(),
        _ => false,
    }
}

pub fn check_laws(before: &PheromoneGraph, after: &PheromoneGraph) {
    assert!(after.node_count() >= before.node_count());
    assert!(after.edge_count() >= before.edge_count());
    for (old, new) in before.nodes().iter().zip(after.nodes()) {
        assert_eq!((old.kind, old.depth), (new.kind, new.depth));
    }
    for (old, new) in before.edges().iter().zip(after.edges()) {
        assert_eq!((old.from, old.to), (new.from, new.to));
    }
    let mut seen = HashSet::new();
    for n in after.nodes() {
        assert!(seen.insert((n.kind, n.depth)), "duplicate {:?}@{}", n.kind, n.depth);
        for t in &n.attributes {
            assert!(t.pheromone.iter().all(|p| *p > 0.0 && p.is_finite()));
        }
    }
    for e in after.edges() {
        assert!(e.pheromone > 0.0 && e.pheromone.is_finite());
        assert_eq!(after.nodes()[e.to.0].depth, after.nodes()[e.from.0].depth + 1);
    }
}

/// Applies `steps` random graph operations, checking the structural laws after each.
pub fn fuzz_graph(seed: u64, steps: usize) {
    let space = default_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = PheromoneGraph::new(&space, 0.1).unwrap();
    let params = SelectionParams::default();
    for step in 0..steps {
        let before = g.clone();
        match rng.gen_range(0..4) {
            0 => {
                let open: Vec<usize> = (0..g.node_count())
                    .filter(|&i| g.nodes()[i].depth < g.current_max_depth())
                    .collect();
                let i = open[rng.gen_range(0..open.len())];
                let flattened = flatten_context(g.nodes()[i].kind, &mut rng);
                g.expand_neighbours(NodeId(i), flattened, &space, &UniformHeuristic)
                    .unwrap();
            }
            1 => {
                if g.current_max_depth() < 6 {
                    g.increase_depth();
                }
            }
            2 => {
                let t = generate_path(&mut g, &space, &params, &UniformHeuristic, SHAPE, &mut rng, step as u64)
                    .unwrap();
                g.local_update(&t, rng.gen_range(0.01..0.99), 0.1).unwrap();
            }
            _ => {
                let mut t = generate_path(&mut g, &space, &params, &UniformHeuristic, SHAPE, &mut rng, step as u64)
                    .unwrap();
                t.metrics = Some(Metrics::scored(rng.gen()));
                g.global_update(&t, rng.gen_range(0.01..0.99)).unwrap();
            }
        }
        check_laws(&before, &g);
    }
}

