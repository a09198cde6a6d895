use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Outcome of a dip test against the uniform null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    pub n: usize,
    pub dip: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub seed: u64,
}

pub const MIN_SAMPLE: usize = 4;
pub const MIN_REPLICATES: usize = 100;
pub const DEFAULT_REPLICATES: usize = 2000;

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::InvalidInput(format!(
            "dip test needs at least {MIN_SAMPLE} observations, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("dip test sample has non-finite values".into()));
    }
    let mut x = sample.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    Ok(x)
}

/// Hartigan's dip statistic of `sample`.
///
/// The smallest attainable value is `1 / (2n)` (also returned for a sample of
/// identical values) and the largest is `1/4`.
pub fn dip_statistic(sample: &[f64]) -> Result<f64> {
    Ok(dip_sorted(&sorted_finite(sample)?))
}

/// Dip of an ascending sample.
///
/// Works in units of `2n * dip` with 1-based indices throughout: `gcm` and
/// `lcm` hold the touching points of the greatest convex minorant and least
/// concave majorant of the empirical distribution restricted to the current
/// modal interval `[low, high]`, which shrinks until it stops changing.
pub(crate) fn dip_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let scale = 2.0 * n as f64;
    let mut dip = 1.0;
    if n < 2 || sorted[n - 1] == sorted[0] {
        return dip / scale;
    }

    let mut x = Vec::with_capacity(n + 1);
    x.push(f64::NAN);
    x.extend_from_slice(sorted);

    // mn[j]: predecessor of j on the convex minorant of points 1..=j.
    let mut mn = vec![0usize; n + 1];
    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            let mnmnj = mn[mnj];
            if mnj == 1
                || (x[j] - x[mnj]) * ((mnj - mnmnj) as f64)
                    < (x[mnj] - x[mnmnj]) * ((j - mnj) as f64)
            {
                break;
            }
            mn[j] = mnmnj;
        }
    }

    // mj[k]: successor of k on the concave majorant of points k..=n.
    let mut mj = vec![0usize; n + 1];
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            let mjmjk = mj[mjk];
            if mjk == n
                || (x[k] - x[mjk]) * ((mjk as f64) - (mjmjk as f64))
                    < (x[mjk] - x[mjmjk]) * ((k as f64) - (mjk as f64))
            {
                break;
            }
            mj[k] = mjmjk;
        }
    }

    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];
    let mut low = 1usize;
    let mut high = n;

    loop {
        // Minorant touching points from high down to low.
        gcm[1] = high;
        let mut ig = 1;
        while gcm[ig] > low {
            gcm[ig + 1] = mn[gcm[ig]];
            ig += 1;
        }
        let l_gcm = ig;

        // Majorant touching points from low up to high.
        lcm[1] = low;
        let mut ih = 1;
        while lcm[ih] < high {
            lcm[ih + 1] = mj[lcm[ih]];
            ih += 1;
        }
        let l_lcm = ih;

        // Largest vertical gap between minorant and majorant on [low, high].
        let mut d = 0.0;
        if l_gcm != 2 || l_lcm != 2 {
            let mut ix = l_gcm - 1;
            let mut iv = 2;
            loop {
                let gcmix = gcm[ix];
                let lcmiv = lcm[iv];
                if gcmix > lcmiv {
                    let gcmi1 = gcm[ix + 1];
                    let dx = (lcmiv - gcmi1 + 1) as f64
                        - (x[lcmiv] - x[gcmi1]) * ((gcmix - gcmi1) as f64)
                            / (x[gcmix] - x[gcmi1]);
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcmiv1 = lcm[iv - 1];
                    let dx = (x[gcmix] - x[lcmiv1]) * ((lcmiv - lcmiv1) as f64)
                        / (x[lcmiv] - x[lcmiv1])
                        - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                ix = ix.max(1);
                iv = iv.min(l_lcm);
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }

        if d < dip {
            break;
        }

        // Dip contribution of the minorant left of the modal interval.
        let mut dip_l: f64 = 0.0;
        for j in ig..l_gcm {
            let mut max_t: f64 = 1.0;
            let (jb, je) = (gcm[j + 1], gcm[j]);
            if je - jb > 1 && x[je] != x[jb] {
                let c = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    let t = (jj - jb + 1) as f64 - (x[jj] - x[jb]) * c;
                    max_t = max_t.max(t);
                }
            }
            dip_l = dip_l.max(max_t);
        }

        // And of the majorant right of it.
        let mut dip_u: f64 = 0.0;
        for k in ih..l_lcm {
            let mut max_t: f64 = 1.0;
            let (kb, ke) = (lcm[k], lcm[k + 1]);
            if ke - kb > 1 && x[ke] != x[kb] {
                let c = (ke - kb) as f64 / (x[ke] - x[kb]);
                for kk in kb..=ke {
                    let t = (x[kk] - x[kb]) * c - (kk as f64 - kb as f64 - 1.0);
                    max_t = max_t.max(t);
                }
            }
            dip_u = dip_u.max(max_t);
        }

        dip = dip.max(dip_l.max(dip_u));

        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }

    dip / scale
}

/// Monte Carlo p-value of the dip against `replicates` uniform(0, 1)
/// samples of the same size: `(1 + #{dip_b >= dip}) / (replicates + 1)`.
///
/// Replicate `b` draws from a ChaCha stream keyed by `(seed, b)`, so the
/// result does not depend on how replicates are spread over threads.
pub fn dip_pvalue(sample: &[f64], replicates: usize, seed: u64) -> Result<DipResult> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidInput(format!(
            "dip p-value needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    let dip = dip_statistic(sample)?;
    let n = sample.len();
    let exceed = (0..replicates)
        .into_par_iter()
        .filter(|&b| uniform_replicate_dip(n, seed, b as u64) >= dip)
        .count();
    Ok(DipResult {
        n,
        dip,
        p_value: (1 + exceed) as f64 / (replicates + 1) as f64,
        replicates,
        seed,
    })
}

fn uniform_replicate_dip(n: usize, seed: u64, replicate: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    u.sort_unstable_by(f64::total_cmp);
    dip_sorted(&u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_values_give_minimum() {
        for n in [4, 7, 31] {
            let d = dip_statistic(&vec![2.5; n]).unwrap();
            assert_eq!(d, 1.0 / (2.0 * n as f64));
        }
    }

    #[test]
    fn two_balanced_atoms_give_maximum() {
        assert_eq!(dip_statistic(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap(), 0.25);
    }

    #[test]
    fn too_small_or_non_finite() {
        assert!(dip_statistic(&[1.0, 2.0, 3.0]).is_err());
        assert!(dip_statistic(&[1.0, 2.0, f64::NAN, 4.0]).is_err());
    }

    #[test]
    fn p_value_floor_when_nothing_exceeds() {
        let r = dip_pvalue(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 100, 7).unwrap();
        assert_eq!(r.p_value, 1.0 / 101.0);
        assert_eq!(r.replicates, 100);
        assert!(dip_pvalue(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 99, 7).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let sample: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let a = dip_pvalue(&sample, 150, 11).unwrap();
        let b = dip_pvalue(&sample, 150, 11).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"B\":150"), "{json}");
    }
}
