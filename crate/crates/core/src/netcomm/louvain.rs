use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{modularity, UndirectedGraph};
use crate::{Error, Result};

/// A pass must raise modularity by more than this to trigger another pass.
pub const MIN_PASS_GAIN: f64 = 1e-9;

// Smallest modularity increase counted as an improving local move.
const MOVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    pub resolution: f64,
    pub seed: u64,
    pub max_passes: usize,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        LouvainOptions {
            resolution: 1.0,
            seed: 0,
            max_passes: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityPartition {
    /// Community of each node, by node ordinal. Ids are dense and ordered
    /// by descending community size.
    pub assignment: Vec<usize>,
    pub modularity: f64,
    pub community_sizes: Vec<usize>,
    pub resolution: f64,
    pub seed: u64,
}

impl CommunityPartition {
    pub fn community_count(&self) -> usize {
        self.community_sizes.len()
    }

    /// Nodes of community `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&u| self.assignment[u] == c)
            .collect()
    }
}

/// Louvain modularity optimization: repeated local-move and aggregation
/// passes until a pass gains no more than [`MIN_PASS_GAIN`] or
/// `max_passes` is reached.
pub fn louvain(graph: &UndirectedGraph, options: LouvainOptions) -> Result<CommunityPartition> {
    let LouvainOptions {
        resolution,
        seed,
        max_passes,
    } = options;
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidInput(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::Empty("graph has no nodes".into()));
    }
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(Error::Empty("graph has no edge weight".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut quality = modularity(graph, &assignment, resolution)?;
    let mut level = graph.clone();

    for pass in 0..max_passes {
        let (local, count) = local_moves(&level, m, resolution, &mut rng);
        if count == level.node_count() {
            break;
        }
        let candidate: Vec<usize> = assignment.iter().map(|&c| local[c]).collect();
        let q = modularity(graph, &candidate, resolution)?;
        let gain = q - quality;
        log::debug!("louvain pass {pass}: {count} communities, Q = {q:.6}");
        if gain <= 0.0 {
            break;
        }
        assignment = candidate;
        quality = q;
        if gain <= MIN_PASS_GAIN {
            break;
        }
        level = level.aggregate(&local, count);
    }

    let (assignment, community_sizes) = relabel_by_size(&assignment);
    Ok(CommunityPartition {
        modularity: modularity(graph, &assignment, resolution)?,
        assignment,
        community_sizes,
        resolution,
        seed,
    })
}

/// One local-move phase. Returns the dense community of each node (ids in
/// first-appearance order) and the number of communities.
fn local_moves(
    g: &UndirectedGraph,
    m: f64,
    resolution: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, usize) {
    let n = g.node_count();
    let degree: Vec<f64> = (0..n).map(|u| g.degree(u)).collect();
    let mut community: Vec<usize> = (0..n).collect();
    let mut total = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    // Scratch: weight from the current node into each neighboring community.
    let mut link = vec![0.0; n];
    let mut seen = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let threshold = MOVE_EPS * m;
    let scale = resolution / (2.0 * m);

    loop {
        let mut moved = false;
        for &u in &order {
            let home = community[u];
            let k = degree[u];
            touched.clear();
            touched.push(home);
            seen[home] = true;
            for (v, w) in g.neighbors(u) {
                let c = community[v];
                if !seen[c] {
                    seen[c] = true;
                    touched.push(c);
                }
                link[c] += w;
            }

            total[home] -= k;
            let mut best = home;
            let mut best_gain = link[home] - total[home] * k * scale;
            for &c in &touched[1..] {
                let gain = link[c] - total[c] * k * scale;
                if gain > best_gain + threshold {
                    best = c;
                    best_gain = gain;
                }
            }
            total[best] += k;
            if best != home {
                community[u] = best;
                moved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
                seen[c] = false;
            }
        }
        if !moved {
            break;
        }
    }

    let mut dense = vec![usize::MAX; n];
    let mut count = 0;
    let labels = community
        .iter()
        .map(|&c| {
            if dense[c] == usize::MAX {
                dense[c] = count;
                count += 1;
            }
            dense[c]
        })
        .collect();
    (labels, count)
}

/// Renumbers communities by descending size, ties by first node.
fn relabel_by_size(assignment: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let count = assignment.iter().copied().max().map_or(0, |c| c + 1);
    let mut sizes = vec![0usize; count];
    let mut first = vec![usize::MAX; count];
    for (u, &c) in assignment.iter().enumerate() {
        sizes[c] += 1;
        first[c] = first[c].min(u);
    }
    let mut order: Vec<usize> = (0..count).filter(|&c| sizes[c] > 0).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
    let mut rank = vec![0usize; count];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let relabeled = assignment.iter().map(|&c| rank[c]).collect();
    let community_sizes = order.iter().map(|&c| sizes[c]).collect();
    (relabeled, community_sizes)
}
