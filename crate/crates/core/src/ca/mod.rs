//! Correspondence analysis of the user-by-outlet count matrix and the media
//! sharing index (MSI) derived from its first dimension.
//!
//! Users are scored by their coordinate on the leading singular dimension of
//! the standardized residuals, z-normalized across users. Outlets are scored
//! by the share-weighted mean of their sharers' scores. The axis sign is
//! fixed by requiring a reference outlet to land on the positive side.

mod eigen;
mod residuals;
mod svd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use residuals::{standardized_residuals, StandardizedResiduals};
pub use svd::{truncated_svd, CaDecomposition, SvdOptions};

use crate::ingest::BipartiteCounts;
use crate::{Error, Result};

/// How raw user scores are read off the leading left singular vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Standard row coordinates, `u_i / sqrt(r_i)`.
    #[default]
    Standard,
    /// `sqrt(r_i) * u_i`, as the displayed formula in the source method reads.
    PaperLiteral,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Standard => "standard",
            Convention::PaperLiteral => "paper_literal",
        })
    }
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Convention::Standard),
            "paper_literal" => Ok(Convention::PaperLiteral),
            other => Err(format!(
                "convention must be standard or paper_literal, got {other:?}"
            )),
        }
    }
}

// Leading singular values at or below this are treated as zero.
const ZERO_SINGULAR_VALUE: f64 = 1e-12;

/// Raw (unnormalized) user scores on the first dimension.
pub fn msi_users(dec: &CaDecomposition, convention: Convention) -> Result<Vec<f64>> {
    if dec.k == 0 || dec.left_vectors.is_empty() {
        return Err(Error::InvalidInput("decomposition has no dimensions".into()));
    }
    if dec.singular_values[0] <= ZERO_SINGULAR_VALUE {
        return Err(Error::IndependentTable);
    }
    let u = &dec.left_vectors[0];
    Ok(u.iter()
        .zip(&dec.row_masses)
        .map(|(&ui, &r)| match convention {
            Convention::Standard => ui / r.sqrt(),
            Convention::PaperLiteral => ui * r.sqrt(),
        })
        .collect())
}

/// Outlet with the largest column mass, ties broken by smallest id.
pub fn default_sign_reference(counts: &BipartiteCounts) -> &str {
    let sums = counts.col_sums();
    let outlets = counts.outlets();
    let mut best = 0;
    for j in 1..outlets.len() {
        if sums[j] > sums[best] || (sums[j] == sums[best] && outlets[j] < outlets[best]) {
            best = j;
        }
    }
    &outlets[best]
}

/// Share-weighted mean of user scores per outlet.
pub fn msi_outlets(user_msi: &[f64], counts: &BipartiteCounts) -> Vec<f64> {
    assert_eq!(user_msi.len(), counts.n_users());
    let mut num = vec![0.0; counts.n_outlets()];
    let mut den = vec![0u64; counts.n_outlets()];
    for (i, j, y) in counts.entries() {
        num[j] += y as f64 * user_msi[i];
        den[j] += y;
    }
    num.iter().zip(&den).map(|(n, &d)| n / d as f64).collect()
}

/// Normalized user scores together with the outlet that fixed their sign.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMsi {
    pub scores: Vec<f64>,
    pub sign_reference: String,
}

/// Affinely maps `raw` to zero mean and unit population standard deviation,
/// then flips the global sign if the reference outlet would score negative.
pub fn normalize_and_orient(
    raw: &[f64],
    counts: &BipartiteCounts,
    sign_reference: Option<&str>,
) -> Result<UserMsi> {
    if raw.len() != counts.n_users() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} users",
            raw.len(),
            counts.n_users()
        )));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite raw score".into()));
    }
    if raw.iter().all(|&x| x == raw[0]) {
        return Err(Error::ConstantScores);
    }
    let reference = match sign_reference {
        Some(id) => {
            if counts.outlet_index(id).is_none() {
                return Err(Error::InvalidInput(format!(
                    "sign reference outlet {id:?} is not in the table"
                )));
            }
            id
        }
        None => default_sign_reference(counts),
    };

    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::ConstantScores);
    }
    let mut scores: Vec<f64> = raw.iter().map(|x| (x - mean) / sd).collect();

    let j = counts.outlet_index(reference).expect("checked above");
    let oriented = msi_outlets(&scores, counts)[j];
    if oriented < 0.0 {
        scores.iter_mut().for_each(|x| *x = -*x);
    } else if oriented == 0.0 {
        log::warn!("sign reference {reference:?} scores exactly zero; axis sign left as computed");
    }
    Ok(UserMsi {
        scores,
        sign_reference: reference.to_owned(),
    })
}

/// User and outlet media sharing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MsiScores {
    pub users: Vec<String>,
    pub user_msi: Vec<f64>,
    pub outlets: Vec<String>,
    pub outlet_msi: Vec<f64>,
    pub col_masses: Vec<f64>,
    pub sign_reference: String,
}

impl MsiScores {
    pub fn user_map(&self) -> std::collections::HashMap<String, f64> {
        self.users.iter().cloned().zip(self.user_msi.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaOptions {
    pub convention: Convention,
    pub svd: SvdOptions,
    pub sign_reference: Option<String>,
}

/// Full path from counts to scores: residuals, truncated SVD, raw user
/// scores, normalization and outlet averages.
pub fn media_sharing_index(
    counts: &BipartiteCounts,
    options: &CaOptions,
) -> Result<(CaDecomposition, MsiScores)> {
    let s = standardized_residuals(counts)?;
    let dec = truncated_svd(&s, &options.svd)?;
    let raw = msi_users(&dec, options.convention)?;
    let user = normalize_and_orient(&raw, counts, options.sign_reference.as_deref())?;
    let outlet_msi = msi_outlets(&user.scores, counts);
    let scores = MsiScores {
        users: counts.users().to_vec(),
        user_msi: user.scores,
        outlets: counts.outlets().to_vec(),
        outlet_msi,
        col_masses: dec.col_masses.clone(),
        sign_reference: user.sign_reference,
    };
    Ok((dec, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(rows: &[Vec<u64>]) -> BipartiteCounts {
        let users = (0..rows.len()).map(|i| format!("u{i}")).collect();
        let outlets = (0..rows[0].len()).map(|j| format!("o{j}")).collect();
        BipartiteCounts::from_dense(users, outlets, rows).unwrap()
    }

    fn block() -> BipartiteCounts {
        counts(&[vec![3, 0], vec![3, 0], vec![0, 3], vec![0, 3]])
    }

    #[test]
    fn block_table_two_raw_values() {
        let y = block();
        let s = standardized_residuals(&y).unwrap();
        let dec = truncated_svd(&s, &SvdOptions::default()).unwrap();
        let raw = msi_users(&dec, Convention::Standard).unwrap();
        assert_eq!(raw[0], raw[1]);
        assert_eq!(raw[2], raw[3]);
        assert!((raw[0] - raw[2]).abs() > 0.5);
        // Standard coordinates of a balanced 2-block table are +-1 already.
        assert!((raw[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_table_normalized_and_outlets() {
        let (_, msi) = media_sharing_index(&block(), &CaOptions::default()).unwrap();
        // Tied column masses: "o0" wins the tie, and its sharers are users 0, 1.
        assert_eq!(msi.sign_reference, "o0");
        let expect = [1.0, 1.0, -1.0, -1.0];
        for (a, b) in msi.user_msi.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((msi.outlet_msi[0] - 1.0).abs() < 1e-12);
        assert!((msi.outlet_msi[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_sign_reference_flips_axis() {
        let options = CaOptions {
            sign_reference: Some("o1".into()),
            ..Default::default()
        };
        let (_, msi) = media_sharing_index(&block(), &options).unwrap();
        assert!(msi.user_msi[2] > 0.0 && msi.user_msi[0] < 0.0);
        let bad = CaOptions {
            sign_reference: Some("nope".into()),
            ..Default::default()
        };
        assert!(media_sharing_index(&block(), &bad).is_err());
    }

    #[test]
    fn independent_table_has_no_leading_dimension() {
        let y = counts(&[vec![1, 1], vec![1, 1], vec![2, 2]]);
        let err = media_sharing_index(&y, &CaOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IndependentTable));
        assert_eq!(err.to_string(), "no leading dimension: table is independent");
    }

    #[test]
    fn hand_normalization() {
        let y = block();
        let out = normalize_and_orient(&[2.0, 2.0, 0.0, 0.0], &y, None).unwrap();
        assert_eq!(out.scores, vec![1.0, 1.0, -1.0, -1.0]);
        let flipped = normalize_and_orient(&[-2.0, -2.0, 0.0, 0.0], &y, None).unwrap();
        assert_eq!(flipped.scores, out.scores);
    }

    #[test]
    fn normalization_idempotent_and_sign_free() {
        let y = counts(&[vec![3, 1, 0], vec![1, 2, 2], vec![0, 1, 4], vec![2, 0, 1], vec![1, 1, 1]]);
        let raw = [0.3, -1.7, 2.2, 0.05, -0.4];
        let once = normalize_and_orient(&raw, &y, None).unwrap();
        let twice = normalize_and_orient(&once.scores, &y, None).unwrap();
        for (a, b) in once.scores.iter().zip(&twice.scores) {
            assert!((a - b).abs() < 1e-12);
        }
        let neg: Vec<f64> = raw.iter().map(|x| -x).collect();
        assert_eq!(normalize_and_orient(&neg, &y, None).unwrap().scores, once.scores);
    }

    #[test]
    fn constant_scores_rejected() {
        let y = block();
        assert!(matches!(
            normalize_and_orient(&[1.0; 4], &y, None),
            Err(Error::ConstantScores)
        ));
    }

    #[test]
    fn single_sharer_outlet_copies_user_score() {
        let y = counts(&[vec![2, 0, 0], vec![1, 3, 0], vec![0, 1, 1]]);
        let user = [0.5, -0.25, 1.5];
        let out = msi_outlets(&user, &y);
        assert_eq!(out[2], 1.5);
        assert!((out[0] - (2.0 * 0.5 - 0.25) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn paper_literal_convention_differs_by_mass() {
        let y = counts(&[vec![5, 0], vec![1, 0], vec![0, 2], vec![1, 3]]);
        let s = standardized_residuals(&y).unwrap();
        let dec = truncated_svd(&s, &SvdOptions::default()).unwrap();
        let std = msi_users(&dec, Convention::Standard).unwrap();
        let lit = msi_users(&dec, Convention::PaperLiteral).unwrap();
        for i in 0..4 {
            assert!((lit[i] - std[i] * dec.row_masses[i]).abs() < 1e-14);
        }
        assert_eq!("paper_literal".parse::<Convention>().unwrap(), Convention::PaperLiteral);
        assert!("other".parse::<Convention>().is_err());
    }
}
