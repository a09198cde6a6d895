//! One function per subcommand. Each stage reads raw inputs or the CSV
//! artifacts of earlier stages and writes its own artifacts plus a manifest
//! record.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mediashare_core::artifacts::{self, read_json, write_json};
use mediashare_core::ca::{media_sharing_index, CaOptions, MsiScores, SvdOptions};
use mediashare_core::ideology::{ideology_valence, IvScore, LabelTimelines};
use mediashare_core::ingest::{
    build_counts, for_each_event, read_events, retention, select_top_outlets, BipartiteCounts,
    LabelInterval, ParseOptions, RetweetEvent, RetweetGraphBuilder, ShareEvent,
};
use mediashare_core::netcomm::{
    louvain, profile_communities, symmetrize, CommunityPartition, CommunityProfile, LouvainOptions,
    ProfileOptions,
};
use mediashare_core::stats::{default_grid, dip_pvalue, kde_1d, kde_2d, DensityCurve, DipResult};
use mediashare_core::synth::{self, SynthConfig};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{InputDigest, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Msi,
    Iv,
    Dip,
    Communities,
    Profile,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Msi,
        Stage::Iv,
        Stage::Dip,
        Stage::Communities,
        Stage::Profile,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Msi => "msi",
            Stage::Iv => "iv",
            Stage::Dip => "dip",
            Stage::Communities => "communities",
            Stage::Profile => "profile",
            Stage::Report => "report",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Stage::Synth => "Generate a synthetic data set with planted groups",
            Stage::Ingest => "Select outlets and build the user-outlet count table",
            Stage::Msi => "Score users and outlets by correspondence analysis",
            Stage::Iv => "Compute ideology valence from labeled shares",
            Stage::Dip => "Dip test and density of the user MSI distribution",
            Stage::Communities => "Detect communities in the retweet network",
            Stage::Profile => "Profile the largest communities by MSI and IV",
            Stage::Report => "Run or collect every stage into report.json",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| format!("unknown subcommand {s:?}"))
    }
}

pub const OUTLETS_FILE: &str = "outlets.csv";
pub const COUNTS_FILE: &str = "counts.csv";
pub const INGEST_FILE: &str = "ingest.json";
pub const USER_MSI_FILE: &str = "user_msi.csv";
pub const OUTLET_MSI_FILE: &str = "outlet_msi.csv";
pub const DECOMPOSITION_FILE: &str = "decomposition.json";
pub const IV_FILE: &str = "iv.csv";
pub const DIP_FILE: &str = "dip.json";
pub const DENSITY_FILE: &str = "density.csv";
pub const IV_DENSITY_FILE: &str = "iv_density.csv";
pub const DENSITY_2D_FILE: &str = "density2d.csv";
pub const COMMUNITIES_FILE: &str = "communities.csv";
pub const PARTITION_FILE: &str = "partition.json";
pub const PROFILES_FILE: &str = "community_profiles.json";
pub const REPORT_FILE: &str = "report.json";

/// Runs `stage` with `cfg`. When replaying a manifest, `expected` holds the
/// recorded input digests, and any input that changed is an error.
pub fn execute(stage: Stage, cfg: &RunConfig, expected: Option<&[InputDigest]>) -> Result<(), CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut run = Run::new(cfg, stage, expected);
    match stage {
        Stage::Synth => run_synth(&mut run)?,
        Stage::Ingest => run_ingest(&mut run)?,
        Stage::Msi => run_msi(&mut run)?,
        Stage::Iv => run_iv(&mut run)?,
        Stage::Dip => run_dip(&mut run)?,
        Stage::Communities => run_communities(&mut run)?,
        Stage::Profile => run_profile(&mut run)?,
        Stage::Report => run_report(&mut run)?,
    }
    run.finish()?;
    info!("{stage} finished; artifacts in {}", cfg.out.display());
    Ok(())
}

fn parse_options(cfg: &RunConfig) -> ParseOptions {
    ParseOptions { strict: cfg.strict }
}

fn required<'p>(path: &'p Option<std::path::PathBuf>, key: &str) -> Result<&'p Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{} is required", key.replace('_', "-"))))
}

fn synth_config(cfg: &RunConfig) -> SynthConfig {
    let ids = |prefix: char, n: usize| (1..=n).map(|i| format!("{prefix}{i:02}")).collect();
    SynthConfig {
        n_users_cr: cfg.n_users_cr,
        n_users_cl: cfg.n_users_cl,
        outlets_right: ids('r', cfg.outlets_right),
        outlets_left: ids('l', cfg.outlets_left),
        shares_per_user: cfg.shares_per_user,
        cr_own_bias: cfg.cr_own_bias,
        cl_own_bias: cfg.cl_own_bias,
        share_loyalty: cfg.share_loyalty,
        label_noise: cfg.label_noise,
        retweet_p_in: cfg.retweet_p_in,
        retweet_p_out: cfg.retweet_p_out,
        start: cfg.synth_start,
        duration: cfg.synth_duration,
        seed: cfg.synth_seed,
    }
}

fn run_synth(run: &mut Run) -> Result<(), CliError> {
    let data = synth::generate(&synth_config(run.cfg))?;
    for file in [
        synth::SHARES_FILE,
        synth::LABELS_FILE,
        synth::RETWEETS_FILE,
        synth::GROUND_TRUTH_FILE,
    ] {
        run.output(file);
    }
    data.write_to(&run.cfg.out)?;
    info!(
        "generated {} users, {} shares, {} retweets",
        data.users.len(),
        data.shares.len(),
        data.retweets.len()
    );
    Ok(())
}

struct ShareData {
    events: Vec<ShareEvent>,
    skipped: usize,
    outlets: Vec<String>,
}

fn load_shares(run: &mut Run) -> Result<ShareData, CliError> {
    let path = run.input("shares", required(&run.cfg.shares, "shares")?)?;
    let parsed = read_events::<ShareEvent>(&path, parse_options(run.cfg))?;
    if parsed.skipped > 0 {
        warn!("{}: skipped {} malformed lines", path.display(), parsed.skipped);
    }
    let allowlist = match &run.cfg.allowlist {
        Some(p) => {
            let p = run.input("allowlist", p)?;
            let text = std::fs::read_to_string(&p)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_owned)
                    .collect::<HashSet<String>>(),
            )
        }
        None => None,
    };
    let outlets = select_top_outlets(&parsed.records, run.cfg.top_k, allowlist.as_ref())?;
    Ok(ShareData {
        events: parsed.records,
        skipped: parsed.skipped,
        outlets,
    })
}

fn run_ingest(run: &mut Run) -> Result<(), CliError> {
    let shares = load_shares(run)?;
    let counts = build_counts(&shares.events, &shares.outlets)?;
    let kept = retention(&shares.events, &shares.outlets);

    let col_sums = counts.col_sums();
    let outlet_rows: Vec<(String, u64)> = counts.outlets().iter().cloned().zip(col_sums).collect();
    artifacts::write_outlets(&run.output(OUTLETS_FILE), &outlet_rows)?;
    artifacts::write_counts(&run.output(COUNTS_FILE), &counts)?;

    let mut summary = json!({
        "shares": {
            "events": shares.events.len(),
            "skipped": shares.skipped,
            "retention": kept,
        },
        "counts": {
            "users": counts.n_users(),
            "outlets": counts.n_outlets(),
            "grand_total": counts.grand_total(),
            "nonzero": counts.nnz(),
        },
    });
    if let Some(path) = &run.cfg.retweets {
        let path = run.input("retweets", path)?;
        let mut builder = RetweetGraphBuilder::new(!run.cfg.include_news_links);
        let mut events = 0usize;
        let skipped = for_each_event(&path, parse_options(run.cfg), |e: RetweetEvent| {
            events += 1;
            builder.push(&e);
        })?;
        let graph = builder.finish()?;
        summary["retweets"] = json!({
            "events": events,
            "skipped": skipped,
            "nodes": graph.node_count(),
            "edges": graph.edge_count(),
            "total_weight": graph.total_weight(),
        });
    }
    write_json(&run.output(INGEST_FILE), &summary)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DecompositionSummary<'a> {
    users: usize,
    outlets: usize,
    grand_total: u64,
    k: usize,
    singular_values: &'a [f64],
    total_inertia: f64,
    iterations: usize,
    convention: String,
    sign_reference: &'a str,
    svd_seed: u64,
}

fn score_counts(run: &mut Run, counts: &BipartiteCounts) -> Result<MsiScores, CliError> {
    let cfg = run.cfg;
    let options = CaOptions {
        convention: cfg.convention,
        svd: SvdOptions {
            k: cfg.svd_k,
            tol: cfg.svd_tol,
            max_iter: cfg.svd_max_iter,
            seed: cfg.svd_seed,
            ..Default::default()
        },
        sign_reference: cfg.sign_reference.clone(),
    };
    let (dec, scores) = media_sharing_index(counts, &options)?;
    artifacts::write_user_msi(&run.output(USER_MSI_FILE), &scores.users, &scores.user_msi)?;
    artifacts::write_outlet_msi(
        &run.output(OUTLET_MSI_FILE),
        &scores.outlets,
        &scores.outlet_msi,
        &scores.col_masses,
    )?;
    let summary = DecompositionSummary {
        users: counts.n_users(),
        outlets: counts.n_outlets(),
        grand_total: counts.grand_total(),
        k: dec.k,
        singular_values: &dec.singular_values,
        total_inertia: dec.total_inertia,
        iterations: dec.iterations,
        convention: cfg.convention.to_string(),
        sign_reference: &scores.sign_reference,
        svd_seed: cfg.svd_seed,
    };
    write_json(&run.output(DECOMPOSITION_FILE), &summary)?;
    Ok(scores)
}

fn run_msi(run: &mut Run) -> Result<(), CliError> {
    let counts = match &run.cfg.counts {
        Some(path) => {
            let path = run.input("counts", path)?;
            artifacts::read_counts(&path)?
        }
        None => {
            let shares = load_shares(run)?;
            build_counts(&shares.events, &shares.outlets)?
        }
    };
    score_counts(run, &counts)?;
    Ok(())
}

fn compute_iv(run: &mut Run, shares: &ShareData) -> Result<Vec<IvScore>, CliError> {
    let path = run.input("labels", required(&run.cfg.labels, "labels")?)?;
    let parsed = read_events::<LabelInterval>(&path, parse_options(run.cfg))?;
    if parsed.skipped > 0 {
        warn!("{}: skipped {} malformed lines", path.display(), parsed.skipped);
    }
    let timelines = LabelTimelines::from_intervals(&parsed.records)?;
    if timelines.is_empty() {
        warn!("{}: no label intervals; every IV is undefined", path.display());
    }
    let kept: HashSet<&str> = shares.outlets.iter().map(String::as_str).collect();
    let scores = ideology_valence(
        shares.events.iter().filter(|s| kept.contains(s.outlet_id.as_str())),
        &timelines,
    );
    artifacts::write_iv(&run.output(IV_FILE), &scores)?;
    Ok(scores)
}

fn run_iv(run: &mut Run) -> Result<(), CliError> {
    let shares = load_shares(run)?;
    compute_iv(run, &shares)?;
    Ok(())
}

fn load_msi(run: &mut Run) -> Result<Vec<(String, f64)>, CliError> {
    let path = run.cfg.in_out(&run.cfg.msi, USER_MSI_FILE);
    let path = run.input("user_msi", &path)?;
    Ok(artifacts::read_user_msi(&path)?)
}

fn msi_density(run: &mut Run, msi: &[f64]) -> Result<DensityCurve, CliError> {
    let grid = default_grid(msi, run.cfg.bandwidth, run.cfg.grid_points)?;
    let curve = kde_1d(msi, run.cfg.bandwidth, &grid)?;
    artifacts::write_density(&run.output(DENSITY_FILE), &curve)?;
    Ok(curve)
}

fn compute_dip(run: &mut Run, msi: &[f64]) -> Result<DipResult, CliError> {
    let result = dip_pvalue(msi, run.cfg.dip_replicates, run.cfg.dip_seed)?;
    write_json(&run.output(DIP_FILE), &result)?;
    Ok(result)
}

fn run_dip(run: &mut Run) -> Result<(), CliError> {
    let msi: Vec<f64> = load_msi(run)?.into_iter().map(|(_, s)| s).collect();
    let result = compute_dip(run, &msi)?;
    info!("dip {} with p = {}", result.dip, result.p_value);
    msi_density(run, &msi)?;
    Ok(())
}

/// Contents of `partition.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub modularity: f64,
    pub communities: usize,
    pub community_sizes: Vec<usize>,
    pub resolution: f64,
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: f64,
}

struct Network {
    nodes: Vec<String>,
    partition: CommunityPartition,
    summary: PartitionSummary,
}

fn compute_communities(run: &mut Run) -> Result<Network, CliError> {
    let path = run.input("retweets", required(&run.cfg.retweets, "retweets")?)?;
    let mut builder = RetweetGraphBuilder::new(!run.cfg.include_news_links);
    let skipped = for_each_event(&path, parse_options(run.cfg), |e: RetweetEvent| builder.push(&e))?;
    if skipped > 0 {
        warn!("{}: skipped {skipped} malformed lines", path.display());
    }
    let directed = builder.finish()?;
    let graph = symmetrize(&directed);
    drop(directed);
    let partition = louvain(
        &graph,
        LouvainOptions {
            resolution: run.cfg.resolution,
            seed: run.cfg.louvain_seed,
            max_passes: run.cfg.max_passes,
        },
    )?;
    let nodes = graph.nodes().to_vec();
    let summary = PartitionSummary {
        modularity: partition.modularity,
        communities: partition.community_count(),
        community_sizes: partition.community_sizes.clone(),
        resolution: partition.resolution,
        seed: partition.seed,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        total_weight: graph.total_weight(),
    };
    artifacts::write_communities(&run.output(COMMUNITIES_FILE), &nodes, &partition)?;
    write_json(&run.output(PARTITION_FILE), &summary)?;
    info!(
        "{} communities, modularity {}",
        summary.communities, summary.modularity
    );
    Ok(Network {
        nodes,
        partition,
        summary,
    })
}

fn run_communities(run: &mut Run) -> Result<(), CliError> {
    compute_communities(run)?;
    Ok(())
}

fn partition_path(run: &Run) -> std::path::PathBuf {
    match &run.cfg.communities {
        Some(p) => p.with_file_name(PARTITION_FILE),
        None => run.cfg.out.join(PARTITION_FILE),
    }
}

fn load_network(run: &mut Run) -> Result<Network, CliError> {
    let path = run.cfg.in_out(&run.cfg.communities, COMMUNITIES_FILE);
    let path = run.input("communities", &path)?;
    let (nodes, assignment) = artifacts::read_communities(&path)?;
    let summary_path = run.input("partition", &partition_path(run))?;
    let summary: PartitionSummary = read_json(&summary_path)?;

    let mut sizes = vec![0usize; summary.communities];
    for &c in &assignment {
        match sizes.get_mut(c) {
            Some(n) => *n += 1,
            None => {
                return Err(CliError::Data(format!(
                    "{}: community {c} exceeds the {} communities in {}",
                    path.display(),
                    summary.communities,
                    summary_path.display()
                )))
            }
        }
    }
    if sizes != summary.community_sizes {
        return Err(CliError::Data(format!(
            "{} and {} disagree on community sizes",
            path.display(),
            summary_path.display()
        )));
    }
    let partition = CommunityPartition {
        assignment,
        modularity: summary.modularity,
        community_sizes: sizes,
        resolution: summary.resolution,
        seed: summary.seed,
    };
    Ok(Network {
        nodes,
        partition,
        summary,
    })
}

fn load_iv(run: &mut Run) -> Result<Vec<IvScore>, CliError> {
    let path = run.cfg.in_out(&run.cfg.iv, IV_FILE);
    let path = run.input("iv", &path)?;
    Ok(artifacts::read_iv(&path)?)
}

fn compute_profiles(
    run: &mut Run,
    network: &Network,
    msi: &HashMap<String, f64>,
    iv: &HashMap<String, f64>,
) -> Result<Vec<CommunityProfile>, CliError> {
    let options = ProfileOptions {
        top_n: run.cfg.top_n,
        bandwidth: run.cfg.bandwidth,
        grid_points: run.cfg.grid_points,
        ..Default::default()
    };
    let profiles = profile_communities(&network.partition, &network.nodes, msi, iv, options)?;
    write_json(&run.output(PROFILES_FILE), &profiles)?;
    Ok(profiles)
}

fn run_profile(run: &mut Run) -> Result<(), CliError> {
    let network = load_network(run)?;
    let msi: HashMap<String, f64> = load_msi(run)?.into_iter().collect();
    let iv: HashMap<String, f64> = load_iv(run)?.into_iter().map(|s| (s.user_id, s.iv)).collect();
    compute_profiles(run, &network, &msi, &iv)?;
    Ok(())
}

fn absent(reason: &str) -> Value {
    json!({ "status": "absent", "reason": reason })
}

fn curve_json(curve: &DensityCurve) -> Value {
    json!({
        "bandwidth": curve.bandwidth,
        "grid": curve.grid,
        "density": curve.density,
        "integral": curve.integral(),
        "mode": curve.mode(),
    })
}

/// Each source is computed from raw inputs when they are configured and
/// read from earlier artifacts otherwise. Missing sources are reported
/// together before any work starts.
fn run_report(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let exists = |p: &Path| p.is_file();
    let msi_path = cfg.in_out(&cfg.msi, USER_MSI_FILE);
    let iv_path = cfg.in_out(&cfg.iv, IV_FILE);
    let communities_path = cfg.in_out(&cfg.communities, COMMUNITIES_FILE);

    let mut missing = Vec::new();
    if cfg.shares.is_none() && !exists(&msi_path) {
        missing.push(format!("{} (or --shares)", msi_path.display()));
    }
    let iv_from_labels = cfg.labels.is_some() && cfg.shares.is_some();
    if !iv_from_labels && !exists(&iv_path) {
        missing.push(format!("{} (or --labels with --shares)", iv_path.display()));
    }
    if !cfg.skip_network && cfg.retweets.is_none() {
        for p in [communities_path.clone(), partition_path(run)] {
            if !exists(&p) {
                missing.push(format!("{} (or --retweets)", p.display()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "missing upstream artifacts: {}",
            missing.join(", ")
        )));
    }

    let mut report = serde_json::Map::new();

    // MSI
    let (shares, msi_pairs) = match cfg.shares {
        Some(_) => {
            let shares = load_shares(run)?;
            let counts = build_counts(&shares.events, &shares.outlets)?;
            let scores = score_counts(run, &counts)?;
            let pairs: Vec<(String, f64)> = scores.users.into_iter().zip(scores.user_msi).collect();
            (Some(shares), pairs)
        }
        None => (None, load_msi(run)?),
    };
    let msi_values: Vec<f64> = msi_pairs.iter().map(|(_, s)| *s).collect();
    let dip = compute_dip(run, &msi_values)?;
    let msi_curve = msi_density(run, &msi_values)?;
    report.insert(
        "msi".into(),
        json!({
            "status": "present",
            "users": msi_values.len(),
            "density_file": DENSITY_FILE,
            "density": curve_json(&msi_curve),
        }),
    );
    report.insert("dip".into(), json!({ "status": "present", "result": dip }));

    // IV and the joint density
    let iv_scores = match &shares {
        Some(shares) if cfg.labels.is_some() => compute_iv(run, shares)?,
        _ => load_iv(run)?,
    };
    let iv_map: HashMap<String, f64> = iv_scores.iter().map(|s| (s.user_id.clone(), s.iv)).collect();
    if iv_scores.is_empty() {
        report.insert("iv".into(), absent("no user has a labeled share"));
        report.insert("joint".into(), absent("no user has a labeled share"));
    } else {
        let h = cfg.bandwidth;
        let iv_values: Vec<f64> = iv_scores.iter().map(|s| s.iv).collect();
        let iv_grid = default_grid(&[-1.0, 1.0], h, cfg.grid_points)?;
        let iv_curve = kde_1d(&iv_values, h, &iv_grid)?;
        artifacts::write_density(&run.output(IV_DENSITY_FILE), &iv_curve)?;
        report.insert(
            "iv".into(),
            json!({
                "status": "present",
                "users": iv_values.len(),
                "mean": iv_values.iter().sum::<f64>() / iv_values.len() as f64,
                "density_file": IV_DENSITY_FILE,
                "density": curve_json(&iv_curve),
            }),
        );

        let (xs, ys): (Vec<f64>, Vec<f64>) = msi_pairs
            .iter()
            .filter_map(|(u, m)| iv_map.get(u).map(|iv| (*m, *iv)))
            .unzip();
        if xs.is_empty() {
            report.insert("joint".into(), absent("no user has both an MSI and an IV score"));
        } else {
            let x_grid = default_grid(&msi_values, h, cfg.grid_points_2d)?;
            let y_grid = default_grid(&[-1.0, 1.0], h, cfg.grid_points_2d)?;
            let grid = kde_2d(&xs, &ys, (h, h), &x_grid, &y_grid)?;
            artifacts::write_density_2d(&run.output(DENSITY_2D_FILE), &grid)?;
            report.insert(
                "joint".into(),
                json!({
                    "status": "present",
                    "users": xs.len(),
                    "density_file": DENSITY_2D_FILE,
                    "density": grid,
                }),
            );
        }
    }

    // Network
    if cfg.skip_network {
        report.insert("partition".into(), absent("network stages skipped"));
        report.insert("profiles".into(), absent("network stages skipped"));
    } else {
        let network = match cfg.retweets {
            Some(_) => compute_communities(run)?,
            None => load_network(run)?,
        };
        let msi_map: HashMap<String, f64> = msi_pairs.into_iter().collect();
        let profiles = compute_profiles(run, &network, &msi_map, &iv_map)?;
        let covered: f64 = profiles.iter().map(|p| p.fraction).sum();
        let mut partition =
            serde_json::to_value(&network.summary).map_err(mediashare_core::Error::from)?;
        partition["status"] = json!("present");
        report.insert("partition".into(), partition);
        report.insert(
            "profiles".into(),
            json!({
                "status": "present",
                "top_n": cfg.top_n,
                "fraction_covered": covered,
                "communities": profiles,
            }),
        );
    }

    write_json(&run.output(REPORT_FILE), &Value::Object(report))?;
    Ok(())
}
