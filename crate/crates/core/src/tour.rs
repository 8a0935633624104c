use serde::{Deserialize, Serialize};

use crate::evaluation::Metrics;
use crate::graph::{EdgeId, NodeId};
use crate::space::ArchitectureDescriptor;

/// One ant's walk through the graph.
///
/// `nodes`, `edges` and `choices` describe the pheromone decisions: `nodes[0]`
/// is the input node, `edges[i]` joins `nodes[i]` to `nodes[i + 1]`, and
/// `choices[i]` holds the option index picked for each attribute of
/// `nodes[i]`. `descriptor` is the full architecture after completion, so it
/// may hold trailing layers (Flatten, Output) that were never decided by
/// pheromone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub choices: Vec<Vec<usize>>,
    pub descriptor: ArchitectureDescriptor,
    pub metrics: Option<Metrics>,
    /// Generation order within the run; doubles as the replay id.
    pub trace_id: u64,
}

impl Tour {
    pub fn accuracy(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.accuracy)
    }

    /// Number of layers chosen by pheromone, excluding Input.
    pub fn depth(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_complete(&self) -> bool {
        self.descriptor.layers.last().map(|l| l.kind) == Some(crate::space::LayerKind::Output)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FindBestError {
    #[error("no tours to compare")]
    Empty,
    #[error("tour {0} has not been evaluated")]
    Unevaluated(u64),
}

/// Index of the highest-accuracy tour; ties go to the earliest.
pub fn find_best(tours: &[Tour]) -> Result<usize, FindBestError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in tours.iter().enumerate() {
        let acc = t.accuracy().ok_or(FindBestError::Unevaluated(t.trace_id))?;
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((i, acc));
        }
    }
    best.map(|(i, _)| i).ok_or(FindBestError::Empty)
}
