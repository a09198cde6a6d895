//! Synthetic share events, label timelines and retweet networks with two
//! planted groups of users and outlets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::ingest::{Label, LabelInterval, RetweetEvent, ShareEvent};
use crate::netcomm::CommunityPartition;
use crate::{Error, Result};

pub const SHARES_FILE: &str = "shares.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const RETWEETS_FILE: &str = "retweets.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Generator settings.
///
/// Each user first draws a home group: their own group with probability
/// `own_bias`, otherwise the other one. Each share then goes to the home
/// group with probability `share_loyalty`, or else to a group drawn by a
/// fresh `own_bias` coin, and lands on an outlet chosen uniformly inside that
/// group. A single share therefore reaches the user's own group with
/// probability `own_bias` whatever the loyalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users_cr: usize,
    pub n_users_cl: usize,
    pub outlets_right: Vec<String>,
    pub outlets_left: Vec<String>,
    /// Poisson mean of shares per user (at least one share is always drawn).
    pub shares_per_user: f64,
    pub cr_own_bias: f64,
    pub cl_own_bias: f64,
    pub share_loyalty: f64,
    pub label_noise: f64,
    pub retweet_p_in: f64,
    pub retweet_p_out: f64,
    pub start: i64,
    pub duration: i64,
    pub seed: u64,
}

fn outlet_ids(prefix: char, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i:02}")).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users_cr: 1000,
            n_users_cl: 1000,
            outlets_right: outlet_ids('r', 8),
            outlets_left: outlet_ids('l', 4),
            shares_per_user: 8.0,
            cr_own_bias: 0.95,
            cl_own_bias: 0.6,
            share_loyalty: 0.9,
            label_noise: 0.0,
            retweet_p_in: 0.02,
            retweet_p_out: 0.0005,
            start: 1_551_398_400,
            duration: 180 * 86_400,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let probabilities = [
            ("cr_own_bias", self.cr_own_bias),
            ("cl_own_bias", self.cl_own_bias),
            ("share_loyalty", self.share_loyalty),
            ("label_noise", self.label_noise),
            ("retweet_p_in", self.retweet_p_in),
            ("retweet_p_out", self.retweet_p_out),
        ];
        for (name, p) in probabilities {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.n_users_cr < 2 || self.n_users_cl < 2 {
            return Err(Error::InvalidInput("each group needs at least 2 users".into()));
        }
        if self.outlets_right.is_empty() || self.outlets_left.is_empty() {
            return Err(Error::InvalidInput("each group needs at least one outlet".into()));
        }
        let mut all: Vec<&String> = self.outlets_right.iter().chain(&self.outlets_left).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) || all.iter().any(|o| o.is_empty() || o.contains(',')) {
            return Err(Error::InvalidInput("outlet ids must be distinct, non-empty and comma-free".into()));
        }
        if !(self.shares_per_user.is_finite() && self.shares_per_user > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shares_per_user must be positive, got {}",
                self.shares_per_user
            )));
        }
        if self.duration <= 0 || self.start.checked_add(self.duration).is_none() {
            return Err(Error::InvalidInput("duration must be positive and in range".into()));
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users_cr + self.n_users_cl
    }
}

/// Generated data set. Users are numbered with CR users first.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub users: Vec<String>,
    pub groups: Vec<Label>,
    pub shares: Vec<ShareEvent>,
    pub labels: Vec<LabelInterval>,
    /// `(retweeted, retweeting, timestamp)` by user ordinal.
    pub retweets: Vec<(u32, u32, i64)>,
}

impl SynthData {
    pub fn retweet_events(&self) -> impl Iterator<Item = RetweetEvent> + '_ {
        self.retweets.iter().map(|&(u, v, t)| RetweetEvent {
            retweeted_user: self.users[u as usize].clone(),
            retweeting_user: self.users[v as usize].clone(),
            timestamp: t,
            has_news_link: false,
        })
    }

    pub fn ground_truth(&self) -> HashMap<String, Label> {
        self.users.iter().cloned().zip(self.groups.iter().copied()).collect()
    }

    /// Writes the four data files into `dir` and returns their paths in the
    /// order shares, labels, retweets, ground truth.
    pub fn write_to(&self, dir: &Path) -> Result<[PathBuf; 4]> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = [SHARES_FILE, LABELS_FILE, RETWEETS_FILE, GROUND_TRUTH_FILE].map(|f| dir.join(f));

        write_lines(&paths[0], "user_id,outlet_id,timestamp", |w| {
            for s in &self.shares {
                writeln!(w, "{},{},{}", s.user_id, s.outlet_id, s.timestamp)?;
            }
            Ok(())
        })?;
        write_lines(&paths[1], "user_id,start,end,label", |w| {
            for l in &self.labels {
                writeln!(w, "{},{},{},{}", l.user_id, l.start, l.end, l.label)?;
            }
            Ok(())
        })?;
        write_lines(
            &paths[2],
            "retweeted_user,retweeting_user,timestamp,has_news_link",
            |w| {
                for &(u, v, t) in &self.retweets {
                    writeln!(w, "{},{},{},0", self.users[u as usize], self.users[v as usize], t)?;
                }
                Ok(())
            },
        )?;
        write_lines(&paths[3], "user_id,group", |w| {
            for (u, g) in self.users.iter().zip(&self.groups) {
                writeln!(w, "{u},{g}")?;
            }
            Ok(())
        })?;
        Ok(paths)
    }
}

fn write_lines<F>(path: &Path, header: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")
        .and_then(|_| body(&mut w))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Draws a data set. Shares and labels come from one random stream and
/// retweets from another, so graph settings do not perturb the shares.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let n = config.n_users();
    if n > u32::MAX as usize {
        return Err(Error::InvalidInput(format!("too many users: {n}")));
    }
    let width = n.to_string().len().max(6);
    let users: Vec<String> = (1..=n).map(|i| format!("u{i:0width$}")).collect();
    let groups: Vec<Label> = (0..n)
        .map(|i| if i < config.n_users_cr { Label::CR } else { Label::CL })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let poisson = Poisson::new(config.shares_per_user)
        .map_err(|e| Error::InvalidInput(format!("shares_per_user: {e}")))?;
    let end = config.start + config.duration;
    let mut shares = Vec::new();
    let mut labels = Vec::with_capacity(n);

    for (user, &group) in users.iter().zip(&groups) {
        let (own_bias, own, other) = match group {
            Label::CR => (config.cr_own_bias, &config.outlets_right, &config.outlets_left),
            Label::CL => (config.cl_own_bias, &config.outlets_left, &config.outlets_right),
        };
        let home_is_own = rng.random_bool(own_bias);
        let label = if rng.random_bool(config.label_noise) {
            group.flipped()
        } else {
            group
        };
        labels.push(LabelInterval {
            user_id: user.clone(),
            start: config.start,
            end,
            label,
        });

        let count = (poisson.sample(&mut rng) as u64).max(1);
        for _ in 0..count {
            let to_own = if rng.random_bool(config.share_loyalty) {
                home_is_own
            } else {
                rng.random_bool(own_bias)
            };
            let pool = if to_own { own } else { other };
            let outlet = &pool[rng.random_range(0..pool.len())];
            shares.push(ShareEvent {
                user_id: user.clone(),
                outlet_id: outlet.clone(),
                timestamp: rng.random_range(config.start..end),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let retweets = block_model_edges(config, &mut rng)?;

    Ok(SynthData {
        users,
        groups,
        shares,
        labels,
        retweets,
    })
}

/// Directed two-block stochastic block model over ordered pairs `u != v`,
/// visiting only the sampled pairs by geometric skips.
fn block_model_edges(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(u32, u32, i64)>> {
    let blocks = [0..config.n_users_cr, config.n_users_cr..config.n_users()];
    let end = config.start + config.duration;
    let mut edges = Vec::new();
    for (a, sources) in blocks.iter().enumerate() {
        for (b, targets) in blocks.iter().enumerate() {
            let p = if a == b { config.retweet_p_in } else { config.retweet_p_out };
            if p == 0.0 {
                continue;
            }
            let width = targets.len() as u64;
            let pairs = sources.len() as u64 * width;
            let skip = Geometric::new(p).map_err(|e| Error::InvalidInput(format!("edge probability: {e}")))?;
            let mut k = skip.sample(rng);
            while k < pairs {
                let u = sources.start + (k / width) as usize;
                let v = targets.start + (k % width) as usize;
                if u != v {
                    edges.push((u as u32, v as u32, rng.random_range(config.start..end)));
                }
                k = k.saturating_add(1).saturating_add(skip.sample(rng));
            }
        }
    }
    Ok(edges)
}

/// Agreement between a partition and the planted groups under the best
/// one-to-one matching of the two groups to distinct communities: the
/// fraction of partitioned nodes whose community is the one matched to
/// their group. Nodes in unmatched communities count as disagreements.
///
/// `nodes` names the partition's nodes; each must appear in `ground_truth`.
/// Ground-truth users outside the partition are ignored.
pub fn evaluate_recovery(
    ground_truth: &HashMap<String, Label>,
    partition: &CommunityPartition,
    nodes: &[String],
) -> Result<f64> {
    if nodes.len() != partition.assignment.len() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} nodes but {} node ids were given",
            partition.assignment.len(),
            nodes.len()
        )));
    }
    if nodes.is_empty() {
        return Err(Error::Empty("partition has no nodes".into()));
    }
    let count = partition.assignment.iter().copied().max().unwrap_or(0) + 1;
    // overlap[c] = (CR members, CL members)
    let mut overlap = vec![(0usize, 0usize); count];
    for (node, &c) in nodes.iter().zip(&partition.assignment) {
        match ground_truth.get(node) {
            Some(Label::CR) => overlap[c].0 += 1,
            Some(Label::CL) => overlap[c].1 += 1,
            None => {
                return Err(Error::InvalidInput(format!(
                    "node {node} has no ground-truth group"
                )))
            }
        }
    }
    let mut best = 0;
    for c1 in 0..count {
        best = best.max(overlap[c1].0).max(overlap[c1].1);
        for c2 in 0..count {
            if c1 != c2 {
                best = best.max(overlap[c1].0 + overlap[c2].1);
            }
        }
    }
    Ok(best as f64 / nodes.len() as f64)
}
