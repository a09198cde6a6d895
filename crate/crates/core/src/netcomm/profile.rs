use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::louvain::CommunityPartition;
use crate::stats::{kde_1d, DensityCurve, DEFAULT_GRID_POINTS};
use crate::{Error, Result};

/// Score distribution summary of one community.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityProfile {
    pub community: usize,
    pub size: usize,
    pub fraction: f64,
    pub msi_scored: usize,
    pub msi_skipped: usize,
    pub iv_scored: usize,
    pub iv_skipped: usize,
    pub mean_msi: Option<f64>,
    pub mean_iv: Option<f64>,
    pub msi_histogram: Option<DensityCurve>,
    pub iv_histogram: Option<DensityCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub top_n: usize,
    pub bandwidth: f64,
    /// Range covered by the MSI density grid before padding; defaults to
    /// the range of all supplied MSI scores.
    pub msi_range: Option<(f64, f64)>,
    pub grid_points: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            top_n: 2,
            bandwidth: crate::stats::DEFAULT_BANDWIDTH,
            msi_range: None,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

/// Profiles of the `top_n` largest communities. `nodes` names the graph
/// nodes the partition was computed on; members without an MSI or IV score
/// are skipped and counted.
///
/// Every community shares one MSI grid spanning the MSI range padded by four
/// bandwidths and one IV grid spanning `[-1, 1]` padded likewise.
pub fn profile_communities(
    partition: &CommunityPartition,
    nodes: &[String],
    user_msi: &HashMap<String, f64>,
    iv_scores: &HashMap<String, f64>,
    options: ProfileOptions,
) -> Result<Vec<CommunityProfile>> {
    if nodes.len() != partition.assignment.len() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} nodes but {} node ids were given",
            partition.assignment.len(),
            nodes.len()
        )));
    }
    let h = options.bandwidth;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    let (lo, hi) = options.msi_range.unwrap_or_else(|| {
        let lo = user_msi.values().copied().fold(f64::INFINITY, f64::min);
        let hi = user_msi.values().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo <= hi { (lo, hi) } else { (-1.0, 1.0) }
    });
    if options.grid_points < 2 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput("invalid profile density grid".into()));
    }
    let msi_grid = linspace(lo - 4.0 * h, hi + 4.0 * h, options.grid_points);
    let iv_grid = linspace(-1.0 - 4.0 * h, 1.0 + 4.0 * h, options.grid_points);

    let total = nodes.len();
    let top = options.top_n.min(partition.community_count());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); top];
    for (u, &c) in partition.assignment.iter().enumerate() {
        if c < top {
            members[c].push(u);
        }
    }

    members
        .par_iter()
        .enumerate()
        .map(|(c, users)| {
            let msi: Vec<f64> = users
                .iter()
                .filter_map(|&u| user_msi.get(&nodes[u]).copied())
                .collect();
            let iv: Vec<f64> = users
                .iter()
                .filter_map(|&u| iv_scores.get(&nodes[u]).copied())
                .collect();
            Ok(CommunityProfile {
                community: c,
                size: users.len(),
                fraction: users.len() as f64 / total as f64,
                msi_scored: msi.len(),
                msi_skipped: users.len() - msi.len(),
                iv_scored: iv.len(),
                iv_skipped: users.len() - iv.len(),
                mean_msi: mean(&msi),
                mean_iv: mean(&iv),
                msi_histogram: density(&msi, h, &msi_grid)?,
                iv_histogram: density(&iv, h, &iv_grid)?,
            })
        })
        .collect()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn density(values: &[f64], h: f64, grid: &[f64]) -> Result<Option<DensityCurve>> {
    if values.is_empty() {
        return Ok(None);
    }
    kde_1d(values, h, grid).map(Some)
}
