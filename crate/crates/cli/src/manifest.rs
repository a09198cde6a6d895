//! `manifest.json`: what each stage read, wrote and was configured with.
//!
//! One record per stage, in pipeline order. Thread counts and timestamps
//! are deliberately absent, so rerunning a manifest rewrites it byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::stages::Stage;

pub const MANIFEST_FILE: &str = "manifest.json";
const TOOL: &str = "mediashare";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputDigest>,
}

impl RunRecord {
    pub fn stage(&self) -> Result<Stage, CliError> {
        self.subcommand.parse().map_err(CliError::Data)
    }

    /// The configuration this run used, writing into `out`.
    pub fn config(&self, out: &Path) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for (key, value) in &self.config {
            cfg.set(key, value)
                .map_err(|e| CliError::Data(format!("manifest config: {e}")))?;
        }
        cfg.out = out.to_owned();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    fn empty() -> Self {
        Manifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            runs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let manifest: Manifest = mediashare_core::artifacts::read_json(path)?;
        if manifest.tool != TOOL {
            return Err(CliError::Data(format!(
                "{} is not a {TOOL} manifest",
                path.display()
            )));
        }
        Ok(manifest)
    }

    /// Records `run` in the manifest of `out`, replacing an earlier record of
    /// the same stage. A manifest from another version is started afresh.
    pub fn record(out: &Path, run: RunRecord) -> Result<(), CliError> {
        let path = out.join(MANIFEST_FILE);
        let mut manifest = match Manifest::read(&path) {
            Ok(m) if m.version == env!("CARGO_PKG_VERSION") => m,
            _ => Manifest::empty(),
        };
        manifest.runs.retain(|r| r.subcommand != run.subcommand);
        manifest.runs.push(run);
        manifest
            .runs
            .sort_by_key(|r| r.stage().map(|s| s as usize).unwrap_or(usize::MAX));
        mediashare_core::artifacts::write_json(&path, &manifest)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Book-keeping for one stage: digests of what it reads and the files it
/// writes, checked against a manifest record when replaying.
pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    stage: Stage,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    expected: Option<&'a [InputDigest]>,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a RunConfig, stage: Stage, expected: Option<&'a [InputDigest]>) -> Self {
        Run {
            cfg,
            stage,
            inputs: Vec::new(),
            outputs: Vec::new(),
            expected,
        }
    }

    fn display_path(&self, path: &Path) -> String {
        path.strip_prefix(&self.cfg.out)
            .unwrap_or(path)
            .display()
            .to_string()
    }

    /// Digests an input file before it is read.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<PathBuf, CliError> {
        let digest = InputDigest {
            role: role.to_owned(),
            path: self.display_path(path),
            sha256: sha256_file(path)?,
        };
        if let Some(expected) = self.expected {
            match expected.iter().find(|d| d.role == role) {
                Some(d) if d.sha256 != digest.sha256 => {
                    return Err(CliError::Data(format!(
                        "input {role} ({}) differs from the manifest",
                        path.display()
                    )))
                }
                None => {
                    return Err(CliError::Data(format!(
                        "input {role} ({}) is not in the manifest",
                        path.display()
                    )))
                }
                Some(_) => {}
            }
        }
        self.inputs.push(digest);
        Ok(path.to_owned())
    }

    pub fn output(&mut self, file: &str) -> PathBuf {
        if !self.outputs.iter().any(|f| f == file) {
            self.outputs.push(file.to_owned());
        }
        self.cfg.out.join(file)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let outputs = self
            .outputs
            .iter()
            .map(|file| {
                Ok(OutputDigest {
                    file: file.clone(),
                    sha256: sha256_file(&self.cfg.out.join(file))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let record = RunRecord {
            subcommand: self.stage.name().to_owned(),
            config: self.cfg.recorded(),
            seeds: self.cfg.seeds().into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
            inputs: self.inputs,
            outputs,
        };
        Manifest::record(&self.cfg.out, record)
    }
}
