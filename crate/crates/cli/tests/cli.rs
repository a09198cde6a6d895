use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mediashare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mediashare"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--out", s(&data), "--n-users-cr", "300", "--n-users-cl", "200"];
    args.extend_from_slice(&["--retweet-p-in", "0.05", "--retweet-p-out", "0.001"]);
    args.extend_from_slice(extra);
    let out = mediashare(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    data
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_shares_file_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_shares.csv");
    let out = mediashare(&["msi", "--shares", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no_such_shares.csv"), "{}", stderr(&out));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(mediashare(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mediashare(&["msi", "--top-k", "lots"]).status.code(), Some(1));
    assert_eq!(mediashare(&["msi", "--top-k", "1"]).status.code(), Some(1));
    assert_eq!(mediashare(&[]).status.code(), Some(1));
    assert_eq!(mediashare(&["--help"]).status.code(), Some(0));
    assert_eq!(mediashare(&["msi", "--help"]).status.code(), Some(0));
    assert_eq!(mediashare(&["--version"]).status.code(), Some(0));
}

#[test]
fn independent_table_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let shares = dir.path().join("shares.csv");
    std::fs::write(&shares, "user_id,outlet_id,timestamp\na,X,1\na,Y,2\nb,X,3\nb,Y,4\n").unwrap();
    let out = mediashare(&["msi", "--shares", s(&shares), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("independent"));
}

#[test]
fn strict_mode_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let shares = dir.path().join("shares.csv");
    std::fs::write(
        &shares,
        "user_id,outlet_id,timestamp\na,X,1\n,Y,2\nb,Y,3\nc,X,4\nc,Y,4\n",
    )
    .unwrap();
    let o = dir.path().join("o");
    let out = mediashare(&["ingest", "--shares", s(&shares), "--out", s(&o), "--strict"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":3:"), "{}", stderr(&out));
    let out = mediashare(&["ingest", "--shares", s(&shares), "--out", s(&o)]);
    assert!(out.status.success());
    let summary = read_json(&o.join("ingest.json"));
    assert_eq!(summary["shares"]["skipped"], 1);
    assert_eq!(summary["counts"]["grand_total"], 4);
}

#[test]
fn printed_config_reads_back_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let out = mediashare(&["--print-config", "--top-k", "9", "--bandwidth", "0.2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("top_k=9\n") && text.contains("dip_replicates=2000\n"));
    let file = dir.path().join("run.conf");
    std::fs::write(&file, &text).unwrap();
    let again = mediashare(&["--print-config", "--config", s(&file), "--bandwidth", "0.3"]);
    let again = String::from_utf8(again.stdout).unwrap();
    assert_eq!(again, text.replace("bandwidth=0.2", "bandwidth=0.3"));
}

#[test]
fn stages_compose_through_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let o = dir.path().join("o");
    let run = |args: &[&str]| {
        let out = mediashare(args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    };
    let shares = data.join("shares.csv");
    let labels = data.join("labels.csv");
    let retweets = data.join("retweets.csv");
    run(&["ingest", "--shares", s(&shares), "--out", s(&o)]);
    run(&["msi", "--counts", s(&o.join("counts.csv")), "--out", s(&o)]);
    run(&["iv", "--shares", s(&shares), "--labels", s(&labels), "--out", s(&o)]);
    run(&["dip", "--out", s(&o), "--dip-replicates", "200"]);
    run(&["communities", "--retweets", s(&retweets), "--out", s(&o)]);
    run(&["profile", "--out", s(&o)]);
    run(&["report", "--out", s(&o), "--dip-replicates", "200"]);

    let manifest = read_json(&o.join("manifest.json"));
    let stages: Vec<&str> = manifest["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["subcommand"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["ingest", "msi", "iv", "dip", "communities", "profile", "report"]);
    let msi_run = &manifest["runs"][1];
    assert_eq!(msi_run["inputs"][0]["role"], "counts");
    assert_eq!(msi_run["inputs"][0]["path"], "counts.csv");
    assert_eq!(msi_run["seeds"]["svd_seed"], 0);

    let report = read_json(&o.join("report.json"));
    for section in ["msi", "dip", "iv", "joint", "partition", "profiles"] {
        assert_eq!(report[section]["status"], "present", "{section}");
    }
    let decomposition = read_json(&o.join("decomposition.json"));
    assert_eq!(decomposition["convention"], "standard");
    assert!(decomposition["singular_values"][0].as_f64().unwrap() <= 1.0);
}

#[test]
fn skip_network_and_empty_labels_mark_sections_absent() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let labels = dir.path().join("labels.csv");
    std::fs::write(&labels, "user_id,start,end,label\n").unwrap();
    let o = dir.path().join("o");
    let out = mediashare(&[
        "report",
        "--shares",
        s(&data.join("shares.csv")),
        "--labels",
        s(&labels),
        "--skip-network",
        "--dip-replicates",
        "100",
        "--out",
        s(&o),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&o.join("report.json"));
    assert_eq!(report["msi"]["status"], "present");
    assert_eq!(report["dip"]["status"], "present");
    for section in ["iv", "joint", "partition", "profiles"] {
        assert_eq!(report[section]["status"], "absent", "{section}");
    }
    assert!(!o.join("density2d.csv").exists());
}

#[test]
fn missing_upstream_artifacts_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = mediashare(&["report", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in ["user_msi.csv", "iv.csv", "communities.csv", "partition.json"] {
        assert!(err.contains(name), "{name} not in {err}");
    }
    let out = mediashare(&["report", "--out", s(dir.path()), "--skip-network"]);
    assert!(!stderr(&out).contains("communities.csv"));
}

/// Fraction of a density curve's mass at positive x.
fn right_mass(curve: &Value) -> f64 {
    let grid: Vec<f64> = serde_json::from_value(curve["grid"].clone()).unwrap();
    let density: Vec<f64> = serde_json::from_value(curve["density"].clone()).unwrap();
    let mut total = 0.0;
    let mut right = 0.0;
    for i in 1..grid.len() {
        let piece = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        total += piece;
        if grid[i] > 0.0 {
            right += piece;
        }
    }
    right / total
}

#[test]
fn polarized_scenario_profiles_one_peaked_and_one_spread_community() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = mediashare(&["synth", "--out", s(&data), "--n-users-cr", "1200", "--n-users-cl", "800"]);
    assert!(out.status.success());
    let o = dir.path().join("o");
    let out = mediashare(&[
        "report",
        "--shares",
        s(&data.join("shares.csv")),
        "--labels",
        s(&data.join("labels.csv")),
        "--retweets",
        s(&data.join("retweets.csv")),
        "--dip-replicates",
        "200",
        "--out",
        s(&o),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&o.join("report.json"));
    let communities = report["profiles"]["communities"].as_array().unwrap();
    assert_eq!(communities.len(), 2);
    // The larger community is the center-right one, sharing right outlets.
    let first = right_mass(&communities[0]["msi_histogram"]);
    let second = right_mass(&communities[1]["msi_histogram"]);
    assert!(first >= 0.9, "{first}");
    assert!((0.2..=0.8).contains(&second), "{second}");
    assert_eq!(communities[0]["mean_iv"], 1.0);
    assert_eq!(communities[1]["mean_iv"], -1.0);
}

#[test]
fn manifest_replay_reproduces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), &[]);
    let a = dir.path().join("a");
    let out = mediashare(&[
        "report",
        "--shares",
        s(&data.join("shares.csv")),
        "--labels",
        s(&data.join("labels.csv")),
        "--retweets",
        s(&data.join("retweets.csv")),
        "--dip-replicates",
        "300",
        "--threads",
        "1",
        "--out",
        s(&a),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let b = dir.path().join("b");
    let out = mediashare(&["--manifest", s(&a.join("manifest.json")), "--out", s(&b), "--threads", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 12);
    for name in names {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }

    std::fs::write(data.join("labels.csv"), "user_id,start,end,label\n").unwrap();
    let out = mediashare(&["--manifest", s(&a.join("manifest.json")), "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("labels"), "{}", stderr(&out));
}
