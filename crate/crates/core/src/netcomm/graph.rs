use std::collections::HashMap;

use crate::ingest::RetweetGraph;
use crate::{Error, Result};

/// Undirected weighted graph in compressed adjacency form.
///
/// Each edge `{u, v}` with `u != v` appears in the neighbor lists of both
/// endpoints; self-loops are kept apart and count twice toward degree.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    nodes: Vec<String>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    self_loops: Vec<f64>,
}

impl UndirectedGraph {
    /// Builds a graph over `nodes` from `(u, v, w)` edges. Repeated pairs
    /// (in either orientation) are summed.
    pub fn from_edges<I>(nodes: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = nodes.len();
        let mut self_loops = vec![0.0; n];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if u == v {
                self_loops[u] += w;
            } else {
                pairs.push((u.min(v), u.max(v), w));
            }
        }
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        pairs.dedup_by(|next, kept| {
            if (next.0, next.1) == (kept.0, kept.1) {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });
        Ok(Self::from_unique_pairs(nodes, &pairs, self_loops))
    }

    /// `pairs` must be sorted, with `u < v` and no repeats.
    fn from_unique_pairs(nodes: Vec<String>, pairs: &[(usize, usize, f64)], self_loops: Vec<f64>) -> Self {
        let n = nodes.len();
        let mut degree = vec![0usize; n];
        for &(u, v, _) in pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; pairs.len() * 2];
        let mut weights = vec![0.0; pairs.len() * 2];
        // Sorted pairs make every neighbor list ascending.
        for &(u, v, w) in pairs {
            neighbors[fill[v]] = u;
            weights[fill[v]] = w;
            fill[v] += 1;
        }
        for &(u, v, w) in pairs {
            neighbors[fill[u]] = v;
            weights[fill[u]] = w;
            fill[u] += 1;
        }
        UndirectedGraph {
            nodes,
            offsets,
            neighbors,
            weights,
            self_loops,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct non-loop edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[u]..self.offsets[u + 1];
        self.neighbors[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    pub fn self_loop(&self, u: usize) -> f64 {
        self.self_loops[u]
    }

    /// Each non-loop edge once as `(u, v, w)` with `u < v`, then self-loops.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let pairs = (0..self.node_count())
            .flat_map(move |u| self.neighbors(u).filter(move |&(v, _)| v > u).map(move |(v, w)| (u, v, w)));
        let loops = self
            .self_loops
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w > 0.0)
            .map(|(u, &w)| (u, u, w));
        pairs.chain(loops)
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.neighbors(u).map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[u]
    }

    /// Total edge weight `m`, self-loops counted once.
    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Collapses nodes into communities: inter-community weight becomes an
    /// edge, intra-community weight a self-loop.
    pub(crate) fn aggregate(&self, community: &[usize], count: usize) -> UndirectedGraph {
        let mut self_loops = vec![0.0; count];
        let mut between: HashMap<(usize, usize), f64> = HashMap::new();
        for (u, v, w) in self.edges() {
            let (cu, cv) = (community[u], community[v]);
            if cu == cv {
                self_loops[cu] += w;
            } else {
                *between.entry((cu.min(cv), cu.max(cv))).or_insert(0.0) += w;
            }
        }
        let mut pairs: Vec<(usize, usize, f64)> =
            between.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        pairs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let names = (0..count).map(|c| c.to_string()).collect();
        Self::from_unique_pairs(names, &pairs, self_loops)
    }
}

/// Undirected view of a retweet graph with `w_uv = w(u->v) + w(v->u)`.
pub fn symmetrize(graph: &RetweetGraph) -> UndirectedGraph {
    let edges = graph.edges().map(|(u, v, w)| (u, v, w as f64));
    UndirectedGraph::from_edges(graph.nodes().to_vec(), edges)
        .expect("retweet graph edges are in range and positive")
}

/// Modularity of `assignment` at the given resolution:
/// `Q = sum_c e_c / m - resolution * (a_c / 2m)^2`.
pub fn modularity(graph: &UndirectedGraph, assignment: &[usize], resolution: f64) -> Result<f64> {
    if assignment.len() != graph.node_count() {
        return Err(Error::InvalidInput(format!(
            "assignment covers {} nodes, graph has {}",
            assignment.len(),
            graph.node_count()
        )));
    }
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(Error::Empty("graph has no edge weight".into()));
    }
    let count = assignment.iter().copied().max().map_or(0, |c| c + 1);
    let mut inside = vec![0.0; count];
    let mut degree = vec![0.0; count];
    for (u, v, w) in graph.edges() {
        if assignment[u] == assignment[v] {
            inside[assignment[u]] += w;
        }
    }
    for (u, &c) in assignment.iter().enumerate() {
        degree[c] += graph.degree(u);
    }
    Ok(inside
        .iter()
        .zip(&degree)
        .map(|(&e, &a)| e / m - resolution * (a / (2.0 * m)).powi(2))
        .sum())
}
