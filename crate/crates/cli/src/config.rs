//! Run configuration: defaults, `key=value` files and command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mediashare_core::ca::Convention;

use crate::error::CliError;

/// A value that can be read from and written to a `key=value` line.
pub trait ConfigValue: Sized {
    fn parse_value(raw: &str) -> Result<Self, String>;
    fn render(&self) -> String;
    const SWITCH: bool = false;
}

macro_rules! display_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(raw: &str) -> Result<Self, String> {
                raw.parse().map_err(|e| format!("{raw:?}: {e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(usize, u64, i64, f64, String, Convention);

impl ConfigValue for bool {
    fn parse_value(raw: &str) -> Result<Self, String> {
        match raw {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(format!("expected true or false, got {other:?}")),
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
    const SWITCH: bool = true;
}

impl ConfigValue for PathBuf {
    fn parse_value(raw: &str) -> Result<Self, String> {
        Ok(PathBuf::from(raw))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

// An empty value means "not set".
impl<T: ConfigValue> ConfigValue for Option<T> {
    fn parse_value(raw: &str) -> Result<Self, String> {
        if raw.is_empty() {
            Ok(None)
        } else {
            T::parse_value(raw).map(Some)
        }
    }
    fn render(&self) -> String {
        self.as_ref().map(T::render).unwrap_or_default()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $name:ident: $ty:ty = $default:expr;)*) => {
        /// Every tunable of a pipeline run. Each field is also a `--flag` and
        /// a `key=value` config file entry of the same name.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $name: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($name: $default,)* }
            }
        }

        impl RunConfig {
            pub const KEYS: &'static [(&'static str, &'static str, bool)] = &[
                $((stringify!($name), concat!($($doc),*), <$ty as ConfigValue>::SWITCH),)*
            ];

            pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
                match key {
                    $(stringify!($name) => {
                        self.$name = <$ty as ConfigValue>::parse_value(raw.trim())
                            .map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
                    })*
                    other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
                }
                Ok(())
            }

            /// All keys with their rendered values, in declaration order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($name), self.$name.render()),)*]
            }
        }
    };
}

run_config! {
    /// Output directory.
    out: PathBuf = PathBuf::from("out");
    /// Share events (CSV or JSONL).
    shares: Option<PathBuf> = None;
    /// Retweet events (CSV or JSONL).
    retweets: Option<PathBuf> = None;
    /// Label intervals (CSV or JSONL).
    labels: Option<PathBuf> = None;
    /// Outlet allowlist, one outlet id per line.
    allowlist: Option<PathBuf> = None;
    /// Count table to score instead of raw shares.
    counts: Option<PathBuf> = None;
    /// User MSI scores (defaults to user_msi.csv in the output directory).
    msi: Option<PathBuf> = None;
    /// IV scores (defaults to iv.csv in the output directory).
    iv: Option<PathBuf> = None;
    /// Community assignment (defaults to communities.csv in the output directory).
    communities: Option<PathBuf> = None;
    /// Fail on the first malformed input line.
    strict: bool = false;
    /// Number of most shared outlets kept.
    top_k: usize = 12;
    /// Raw score convention: standard or paper_literal.
    convention: Convention = Convention::Standard;
    /// Outlet whose MSI is made positive (default: largest column mass).
    sign_reference: Option<String> = None;
    /// Singular triplets computed.
    svd_k: usize = 1;
    svd_tol: f64 = 1e-10;
    svd_max_iter: usize = 1000;
    svd_seed: u64 = 0;
    /// Monte Carlo replicates of the dip test.
    dip_replicates: usize = 2000;
    dip_seed: u64 = 0;
    /// Gaussian kernel bandwidth for every density.
    bandwidth: f64 = 0.15;
    grid_points: usize = 512;
    grid_points_2d: usize = 128;
    /// Keep retweets that carry a news link.
    include_news_links: bool = false;
    resolution: f64 = 1.0;
    louvain_seed: u64 = 0;
    max_passes: usize = 100;
    /// Communities profiled.
    top_n: usize = 2;
    /// Leave out the retweet network stages in `report`.
    skip_network: bool = false;
    n_users_cr: usize = 1000;
    n_users_cl: usize = 1000;
    /// Number of right-group outlets (ids r01, r02, ...).
    outlets_right: usize = 8;
    /// Number of left-group outlets (ids l01, l02, ...).
    outlets_left: usize = 4;
    shares_per_user: f64 = 8.0;
    cr_own_bias: f64 = 0.95;
    cl_own_bias: f64 = 0.6;
    share_loyalty: f64 = 0.9;
    label_noise: f64 = 0.0;
    retweet_p_in: f64 = 0.02;
    retweet_p_out: f64 = 0.0005;
    synth_start: i64 = 1_551_398_400;
    synth_duration: i64 = 180 * 86_400;
    synth_seed: u64 = 0;
}

impl RunConfig {
    /// Applies a `key=value` file. Blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
            })?;
            self.set(key.trim(), value).map_err(|e| {
                CliError::Usage(format!("{}:{}: {e}", path.display(), n + 1))
            })?;
        }
        Ok(())
    }

    /// The configuration as a `key=value` file that [`apply_file`] reads back.
    ///
    /// [`apply_file`]: RunConfig::apply_file
    pub fn to_file_text(&self) -> String {
        let mut text = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(text, "{key}={value}");
        }
        text
    }

    /// Everything except the output directory, which a manifest implies.
    pub fn recorded(&self) -> BTreeMap<String, String> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| *k != "out")
            .map(|(k, v)| (k.to_owned(), v))
            .collect()
    }

    pub fn seeds(&self) -> BTreeMap<&'static str, u64> {
        BTreeMap::from([
            ("dip_seed", self.dip_seed),
            ("louvain_seed", self.louvain_seed),
            ("svd_seed", self.svd_seed),
            ("synth_seed", self.synth_seed),
        ])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.top_k < 2 {
            return Err(CliError::Usage(format!("top_k must be at least 2, got {}", self.top_k)));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(CliError::Usage(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(1..=3).contains(&self.svd_k) {
            return Err(CliError::Usage(format!("svd_k must be 1, 2 or 3, got {}", self.svd_k)));
        }
        if self.grid_points < 2 || self.grid_points_2d < 2 {
            return Err(CliError::Usage("density grids need at least 2 points".into()));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(CliError::Usage(format!("resolution must be positive, got {}", self.resolution)));
        }
        Ok(())
    }

    /// `explicit` if set, else `file` inside the output directory.
    pub fn in_out(&self, explicit: &Option<PathBuf>, file: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("top_k", "17").unwrap();
        cfg.set("sign_reference", "r01").unwrap();
        cfg.set("bandwidth", "0.1").unwrap();
        cfg.set("convention", "paper_literal").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, cfg.to_file_text()).unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&path).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_entries_are_usage_errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(CliError::Usage(_))));
        assert!(matches!(cfg.set("top_k", "many"), Err(CliError::Usage(_))));
        cfg.set("top_k", "1").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn empty_value_clears_an_option() {
        let mut cfg = RunConfig::default();
        cfg.set("labels", "l.csv").unwrap();
        cfg.set("labels", "").unwrap();
        assert_eq!(cfg.labels, None);
    }

    #[test]
    fn recorded_config_omits_output_directory() {
        let rec = RunConfig::default().recorded();
        assert!(!rec.contains_key("out"));
        assert_eq!(rec["top_k"], "12");
        assert_eq!(rec["bandwidth"], "0.15");
    }
}
