use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 0.15;
pub const DEFAULT_GRID_POINTS: usize = 512;
pub const DEFAULT_GRID_POINTS_2D: usize = 128;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn phi(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoid-rule integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Grid location of the highest density (first on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &d) in self.density.iter().enumerate() {
            if d > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }
}

/// `density[i][j]` is the estimate at `(x_grid[i], y_grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub bandwidths: (f64, f64),
}

impl DensityGrid {
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = self
            .density
            .iter()
            .map(|row| trapezoid(&self.y_grid, row))
            .collect();
        trapezoid(&self.x_grid, &rows)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `points` evenly spaced locations from `min - 4h` to `max + 4h`.
pub fn default_grid(sample: &[f64], bandwidth: f64, points: usize) -> Result<Vec<f64>> {
    check_sample(sample)?;
    check_bandwidth(bandwidth)?;
    if points < 2 {
        return Err(Error::InvalidInput(format!(
            "density grid needs at least 2 points, got {points}"
        )));
    }
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * bandwidth;
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bandwidth;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect())
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::Empty("density sample is empty".into()));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("density sample has non-finite values".into()));
    }
    Ok(())
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bandwidth must be positive, got {h}")))
    }
}

fn check_grid(grid: &[f64], axis: &str) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidInput(format!("{axis} grid must be non-empty and finite")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(format!("{axis} grid must be ascending")));
    }
    Ok(())
}

/// Gaussian kernel density estimate of `sample` evaluated on `grid`.
pub fn kde_1d(sample: &[f64], bandwidth: f64, grid: &[f64]) -> Result<DensityCurve> {
    check_sample(sample)?;
    check_bandwidth(bandwidth)?;
    check_grid(grid, "density")?;
    let norm = sample.len() as f64 * bandwidth;
    let density = grid
        .par_iter()
        .map(|&g| sample.iter().map(|&x| phi((g - x) / bandwidth)).sum::<f64>() / norm)
        .collect();
    Ok(DensityCurve {
        grid: grid.to_vec(),
        density,
        bandwidth,
    })
}

/// Product-Gaussian kernel density estimate of the pairs `(x[i], y[i])`.
pub fn kde_2d(
    x: &[f64],
    y: &[f64],
    bandwidths: (f64, f64),
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<DensityGrid> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    check_sample(x)?;
    check_sample(y)?;
    let (hx, hy) = bandwidths;
    check_bandwidth(hx)?;
    check_bandwidth(hy)?;
    check_grid(x_grid, "x")?;
    check_grid(y_grid, "y")?;

    let norm = x.len() as f64 * (hx * hy);
    let ky: Vec<Vec<f64>> = y_grid
        .par_iter()
        .map(|&g| y.iter().map(|&v| phi((g - v) / hy)).collect())
        .collect();
    let density = x_grid
        .par_iter()
        .map(|&g| {
            let kx: Vec<f64> = x.iter().map(|&v| phi((g - v) / hx)).collect();
            ky.iter()
                .map(|col| kx.iter().zip(col).map(|(a, b)| a * b).sum::<f64>() / norm)
                .collect()
        })
        .collect();
    Ok(DensityGrid {
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        density,
        bandwidths,
    })
}
