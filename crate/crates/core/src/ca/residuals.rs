use rayon::prelude::*;

use crate::ingest::BipartiteCounts;
use crate::{Error, Result};

// Below this many rows (or columns) products run sequentially.
const PAR_MIN_LEN: usize = 4096;

/// Standardized residuals `s_ij = (p_ij - r_i c_j) / sqrt(r_i c_j)` of a
/// count matrix, held implicitly.
///
/// `S = A - sqrt(r) sqrt(c)^T` where `A` has the sparsity of `Y` with
/// entries `p_ij / sqrt(r_i c_j)`. The rank-one term is never expanded, so
/// products cost `O(nnz + rows + cols)`.
#[derive(Debug, Clone)]
pub struct StandardizedResiduals {
    n_rows: usize,
    n_cols: usize,
    row_masses: Vec<f64>,
    col_masses: Vec<f64>,
    sqrt_r: Vec<f64>,
    sqrt_c: Vec<f64>,
    grand_total: f64,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    raw_counts: Vec<u64>,
    values: Vec<f64>,
    col_offsets: Vec<usize>,
    row_indices: Vec<usize>,
    col_values: Vec<f64>,
}

/// Builds the implicit residual matrix and the row and column masses.
pub fn standardized_residuals(counts: &BipartiteCounts) -> Result<StandardizedResiduals> {
    let total = counts.grand_total() as f64;
    let row_masses: Vec<f64> = counts
        .row_sums()
        .into_iter()
        .map(|s| s as f64 / total)
        .collect();
    let col_masses: Vec<f64> = counts
        .col_sums()
        .into_iter()
        .map(|s| s as f64 / total)
        .collect();
    if row_masses.iter().chain(&col_masses).any(|&m| m <= 0.0) {
        return Err(Error::InvalidInput(
            "every row and column needs a positive mass".into(),
        ));
    }
    let sqrt_r: Vec<f64> = row_masses.iter().map(|r| r.sqrt()).collect();
    let sqrt_c: Vec<f64> = col_masses.iter().map(|c| c.sqrt()).collect();

    let (n_rows, n_cols) = (counts.n_users(), counts.n_outlets());
    let mut row_offsets = Vec::with_capacity(n_rows + 1);
    let mut col_indices = Vec::with_capacity(counts.nnz());
    let mut raw_counts = Vec::with_capacity(counts.nnz());
    let mut values = Vec::with_capacity(counts.nnz());
    row_offsets.push(0);
    for i in 0..n_rows {
        for (j, y) in counts.row(i) {
            col_indices.push(j);
            raw_counts.push(y);
            values.push(y as f64 / total / (sqrt_r[i] * sqrt_c[j]));
        }
        row_offsets.push(col_indices.len());
    }

    // Column-major copy for transpose products with a fixed summation order.
    let mut col_offsets = vec![0usize; n_cols + 1];
    for &j in &col_indices {
        col_offsets[j + 1] += 1;
    }
    for j in 0..n_cols {
        col_offsets[j + 1] += col_offsets[j];
    }
    let mut cursor = col_offsets.clone();
    let mut row_indices = vec![0usize; col_indices.len()];
    let mut col_values = vec![0.0; col_indices.len()];
    for i in 0..n_rows {
        for k in row_offsets[i]..row_offsets[i + 1] {
            let j = col_indices[k];
            row_indices[cursor[j]] = i;
            col_values[cursor[j]] = values[k];
            cursor[j] += 1;
        }
    }

    Ok(StandardizedResiduals {
        n_rows,
        n_cols,
        row_masses,
        col_masses,
        sqrt_r,
        sqrt_c,
        grand_total: total,
        row_offsets,
        col_indices,
        raw_counts,
        values,
        col_offsets,
        row_indices,
        col_values,
    })
}

impl StandardizedResiduals {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_masses(&self) -> &[f64] {
        &self.row_masses
    }

    pub fn col_masses(&self) -> &[f64] {
        &self.col_masses
    }

    pub fn sqrt_row_masses(&self) -> &[f64] {
        &self.sqrt_r
    }

    pub fn sqrt_col_masses(&self) -> &[f64] {
        &self.sqrt_c
    }

    /// Entry `s_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        let y = match self.col_indices[span.clone()].binary_search(&j) {
            Ok(k) => self.raw_counts[span.start + k],
            Err(_) => 0,
        };
        let expected = self.row_masses[i] * self.col_masses[j];
        (y as f64 / self.grand_total - expected) / expected.sqrt()
    }

    /// Dense copy, row-major. Only meant for small matrices.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// Sum of squared residuals, i.e. Pearson chi-square over the grand total.
    pub fn total_inertia(&self) -> f64 {
        // sum (a - b)^2 = sum a^2 - 2 sum ab + sum b^2, where sum ab = sum p = 1
        // and sum b^2 = sum r sum c = 1.
        let sum_sq: f64 = self.values.iter().map(|a| a * a).sum();
        (sum_sq - 1.0).max(0.0)
    }

    /// `out = S x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        let shift: f64 = self.sqrt_c.iter().zip(x).map(|(c, v)| c * v).sum();
        let row = |(i, o): (usize, &mut f64)| {
            let span = self.row_offsets[i]..self.row_offsets[i + 1];
            let dot: f64 = self.col_indices[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&j, a)| a * x[j])
                .sum();
            *o = dot - self.sqrt_r[i] * shift;
        };
        if self.n_rows >= PAR_MIN_LEN {
            out.par_iter_mut()
                .enumerate()
                .with_min_len(PAR_MIN_LEN)
                .for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }

    /// `out = S^T y`.
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.n_rows);
        assert_eq!(out.len(), self.n_cols);
        let shift: f64 = self.sqrt_r.iter().zip(y).map(|(r, v)| r * v).sum();
        let col = |(j, o): (usize, &mut f64)| {
            let span = self.col_offsets[j]..self.col_offsets[j + 1];
            let dot: f64 = self.row_indices[span.clone()]
                .iter()
                .zip(&self.col_values[span])
                .map(|(&i, a)| a * y[i])
                .sum();
            *o = dot - self.sqrt_c[j] * shift;
        };
        if self.n_cols >= PAR_MIN_LEN {
            out.par_iter_mut()
                .enumerate()
                .with_min_len(PAR_MIN_LEN)
                .for_each(col);
        } else {
            out.iter_mut().enumerate().for_each(col);
        }
    }
}
