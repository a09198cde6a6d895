use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::eigen::symmetric_eigen;
use super::residuals::StandardizedResiduals;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdOptions {
    /// Number of singular triplets to return.
    pub k: usize,
    /// Convergence threshold on `||S^T u - a v||` relative to the leading
    /// singular value.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random start block.
    pub seed: u64,
    /// Extra block columns beyond `k`.
    pub oversample: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            k: 1,
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
            oversample: 10,
        }
    }
}

/// Leading singular triplets of the standardized residuals together with
/// the masses they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaDecomposition {
    pub row_masses: Vec<f64>,
    pub col_masses: Vec<f64>,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    /// `left_vectors[l]` is the l-th left singular vector (length = rows).
    pub left_vectors: Vec<Vec<f64>>,
    /// `right_vectors[l]` is the l-th right singular vector (length = cols).
    pub right_vectors: Vec<Vec<f64>>,
    pub total_inertia: f64,
    pub k: usize,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Orthonormalizes `block` in place against `fixed` (assumed orthonormal)
/// and itself, two passes of modified Gram-Schmidt. Columns that collapse are
/// replaced by fresh random directions.
fn orthonormalize(block: &mut [Vec<f64>], fixed: &[&[f64]], rng: &mut ChaCha8Rng) {
    for l in 0..block.len() {
        let mut attempts = 0;
        loop {
            let before = norm(&block[l]);
            for _ in 0..2 {
                for f in fixed {
                    let h = dot(f, &block[l]);
                    axpy(-h, f, &mut block[l]);
                }
                for m in 0..l {
                    let (done, rest) = block.split_at_mut(l);
                    let h = dot(&done[m], &rest[0]);
                    axpy(-h, &done[m], &mut rest[0]);
                }
            }
            let after = norm(&block[l]);
            if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 1e-300 {
                block[l].iter_mut().for_each(|x| *x /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "could not extend an orthonormal basis");
            let len = block[l].len();
            block[l] = gaussian(len, rng);
        }
    }
}

/// Top-`k` singular triplets of `S` by randomized block subspace iteration
/// with Rayleigh-Ritz extraction.
///
/// The trivial direction `sqrt(c)` lies in the null space of `S` and is
/// projected out of the search space. The block has `k + oversample`
/// columns, capped by the dimension of what remains; when the cap is hit the
/// Ritz values are exact after a single sweep.
pub fn truncated_svd(s: &StandardizedResiduals, options: &SvdOptions) -> Result<CaDecomposition> {
    let (rows, cols) = (s.n_rows(), s.n_cols());
    let min_dim = rows.min(cols);
    if options.k == 0 || options.k + 1 > min_dim {
        return Err(Error::InvalidInput(format!(
            "k = {} must lie in 1..={} for a {rows}x{cols} table",
            options.k,
            min_dim.saturating_sub(1)
        )));
    }
    let k = options.k;
    let width = (k + options.oversample).min(cols - 1).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let sqrt_c = s.sqrt_col_masses();
    let sqrt_r = s.sqrt_row_masses();
    let mut v: Vec<Vec<f64>> = (0..width).map(|_| gaussian(cols, &mut rng)).collect();
    orthonormalize(&mut v, &[sqrt_c], &mut rng);

    let mut w = vec![vec![0.0; rows]; width];
    let mut z = vec![vec![0.0; cols]; width];
    let mut last_residual = f64::INFINITY;

    for iteration in 1..=options.max_iter {
        for l in 0..width {
            s.apply(&v[l], &mut w[l]);
            s.apply_transpose(&w[l], &mut z[l]);
        }
        // B = V^T S^T S V
        let b: Vec<Vec<f64>> = (0..width)
            .map(|l| (0..width).map(|m| dot(&v[l], &z[m])).collect())
            .collect();
        let b = symmetrize(b);
        let (lambda, q) = symmetric_eigen(b);
        let sigma: Vec<f64> = lambda.iter().map(|&x| x.max(0.0).sqrt()).collect();

        let combine = |basis: &[Vec<f64>], coef: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; basis[0].len()];
            for (b, &c) in basis.iter().zip(coef) {
                axpy(c, b, &mut out);
            }
            out
        };

        let scale = sigma[0].max(f64::MIN_POSITIVE);
        let mut residual: f64 = 0.0;
        for l in 0..k {
            let vl = combine(&v, &q[l]);
            let zl = combine(&z, &q[l]);
            // S^T u - sigma v with u = S v / sigma, so S^T u = z / sigma.
            let r = if sigma[l] > 0.0 {
                let mut diff = zl.iter().map(|x| x / sigma[l]).collect::<Vec<_>>();
                axpy(-sigma[l], &vl, &mut diff);
                norm(&diff)
            } else {
                norm(&zl)
            };
            residual = residual.max(r);
        }
        last_residual = residual;

        if residual <= options.tol * scale {
            let mut right: Vec<Vec<f64>> = (0..k).map(|l| combine(&v, &q[l])).collect();
            let mut left: Vec<Vec<f64>> = (0..k).map(|l| combine(&w, &q[l])).collect();
            for l in 0..k {
                orient(&mut right[l], &mut left[l]);
            }
            let mut zero_left = Vec::new();
            for (l, u) in left.iter_mut().enumerate() {
                if sigma[l] > 0.0 {
                    let n = norm(u);
                    u.iter_mut().for_each(|x| *x /= n);
                } else {
                    zero_left.push(l);
                }
            }
            // Left vectors of zero singular values are arbitrary; complete
            // them to an orthonormal set orthogonal to sqrt(r).
            if !zero_left.is_empty() {
                let (good, _) = left.split_at(k - zero_left.len());
                let mut fixed: Vec<&[f64]> = vec![sqrt_r];
                fixed.extend(good.iter().map(|g| g.as_slice()));
                let mut fresh: Vec<Vec<f64>> =
                    zero_left.iter().map(|_| gaussian(rows, &mut rng)).collect();
                orthonormalize(&mut fresh, &fixed, &mut rng);
                for (l, f) in zero_left.into_iter().zip(fresh) {
                    left[l] = f;
                }
            }
            return Ok(CaDecomposition {
                row_masses: s.row_masses().to_vec(),
                col_masses: s.col_masses().to_vec(),
                singular_values: sigma[..k].to_vec(),
                left_vectors: left,
                right_vectors: right,
                total_inertia: s.total_inertia(),
                k,
                iterations: iteration,
            });
        }

        // Next block: power step on the Ritz-rotated Z.
        v = (0..width).map(|l| combine(&z, &q[l])).collect();
        orthonormalize(&mut v, &[sqrt_c], &mut rng);
    }

    Err(Error::NoConvergence {
        iterations: options.max_iter,
        residual: last_residual,
    })
}

fn symmetrize(mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = b.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (b[i][j] + b[j][i]);
            b[i][j] = m;
            b[j][i] = m;
        }
    }
    b
}

/// Fixes the sign of a singular pair so that the right vector's entry of
/// largest magnitude (first one on ties) is positive.
fn orient(v: &mut [f64], u: &mut [f64]) {
    let mut best = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = j;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        u.iter_mut().for_each(|x| *x = -*x);
    }
}
