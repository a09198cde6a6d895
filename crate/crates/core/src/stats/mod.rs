//! Unimodality testing and kernel density estimates of score distributions.

mod dip;
mod kde;

pub use dip::{
    dip_pvalue, dip_statistic, DipResult, DEFAULT_REPLICATES, MIN_REPLICATES, MIN_SAMPLE,
};
pub use kde::{
    default_grid, kde_1d, kde_2d, DensityCurve, DensityGrid, DEFAULT_BANDWIDTH,
    DEFAULT_GRID_POINTS, DEFAULT_GRID_POINTS_2D,
};
