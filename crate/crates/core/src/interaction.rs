//! Per-timestep Markov random field over nearby targets and the pairwise
//! overlap potential, kept in the log domain throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rect_overlap_count, PatchDims, TargetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// `p` is the number of shared pixels.
    RawCount,
    /// `p` is the shared pixel count divided by the patch area.
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionParams {
    /// Coefficient `c` in `psi = exp(-c * p)`.
    pub strength: f64,
    pub overlap_mode: OverlapMode,
    /// Targets closer than this (pixels) are joined by an edge.
    pub neighbor_radius: f64,
}

impl Default for InteractionParams {
    fn default() -> Self {
        InteractionParams {
            strength: 5000.0,
            overlap_mode: OverlapMode::RawCount,
            neighbor_radius: 64.0,
        }
    }
}

impl InteractionParams {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.strength.is_finite() && self.strength > 0.0) {
            errors.push(format!("interaction.strength must be positive, got {}", self.strength));
        }
        if !(self.neighbor_radius.is_finite() && self.neighbor_radius > 0.0) {
            errors.push(format!(
                "interaction.neighbor_radius must be positive, got {}",
                self.neighbor_radius
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Undirected neighbourhood graph over target indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrfGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl MrfGraph {
    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        MrfGraph {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge list. Pairs are normalized to `i < j`;
    /// self-edges, duplicates and out-of-range indices are rejected.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut graph = MrfGraph::empty(n);
        for (a, b) in pairs {
            if a == b || a >= n || b >= n {
                return Err(Error::config(format!("invalid MRF edge ({a}, {b}) for {n} targets")));
            }
            let e = (a.min(b), a.max(b));
            if graph.edges.contains(&e) {
                return Err(Error::config(format!("duplicate MRF edge ({a}, {b})")));
            }
            graph.push_edge(e.0, e.1);
        }
        graph.edges.sort_unstable();
        Ok(graph)
    }

    fn push_edge(&mut self, i: usize, j: usize) {
        self.edges.push((i, j));
        self.adjacency[i].push(j);
        self.adjacency[j].push(i);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

/// Joins every pair of targets whose reference centers are at most
/// `neighbor_radius` apart.
pub fn build_mrf(reference: &[TargetState], params: &InteractionParams) -> MrfGraph {
    let n = reference.len();
    let mut graph = MrfGraph::empty(n);
    let r2 = params.neighbor_radius * params.neighbor_radius;
    for i in 0..n {
        for j in i + 1..n {
            let dx = reference[i].x - reference[j].x;
            let dy = reference[i].y - reference[j].y;
            if dx * dx + dy * dy <= r2 {
                graph.push_edge(i, j);
            }
        }
    }
    graph
}

/// `ln psi(a, b) = -strength * p`. Zero exactly when the rectangles share no
/// pixel.
pub fn log_potential(a: &TargetState, b: &TargetState, dims: PatchDims, params: &InteractionParams) -> f64 {
    let count = rect_overlap_count(a, b, dims);
    if count == 0 {
        return 0.0;
    }
    let p = match params.overlap_mode {
        OverlapMode::RawCount => f64::from(count),
        OverlapMode::Fraction => f64::from(count) / dims.area() as f64,
    };
    -params.strength * p
}

/// Sum of `ln psi` between target `i` (at `state`) and each of its neighbours
/// at their poses in `targets`.
pub fn log_interaction_at(
    targets: &[TargetState],
    graph: &MrfGraph,
    i: usize,
    state: &TargetState,
    dims: PatchDims,
    params: &InteractionParams,
) -> f64 {
    graph
        .neighbors(i)
        .iter()
        .map(|&j| log_potential(state, &targets[j], dims, params))
        .sum()
}

/// Sum of `ln psi` over all edges incident to target `i`.
///
/// Panics if `i` is out of range.
pub fn local_log_interaction(
    targets: &[TargetState],
    graph: &MrfGraph,
    i: usize,
    dims: PatchDims,
    params: &InteractionParams,
) -> f64 {
    assert!(i < targets.len(), "target index {i} out of range for {} targets", targets.len());
    log_interaction_at(targets, graph, i, &targets[i], dims, params)
}
