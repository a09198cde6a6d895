mod config;
mod error;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use config::RunConfig;
use error::CliError;
use manifest::Manifest;
use stages::Stage;

fn command() -> Command {
    let mut cmd = Command::new("mediashare")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Media sharing index, ideology valence and retweet community pipeline")
        .after_help(
            "Every option is also a key of the --config file (key=value per line, \
             dashes written as underscores). Flags override the file, which overrides \
             the defaults shown by --print-config.",
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .global(true)
                .help("key=value configuration file"),
        )
        .arg(
            Arg::new("print-config")
                .long("print-config")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("Print the resolved configuration and exit"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_name("N")
                .value_parser(value_parser!(usize))
                .global(true)
                .help("Maximum worker threads"),
        )
        .arg(
            Arg::new("manifest")
                .long("manifest")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .global(true)
                .help("Rerun the stages recorded in a manifest (only --out and --threads apply)"),
        );
    for stage in Stage::ALL {
        cmd = cmd.subcommand(Command::new(stage.name()).about(stage.about()));
    }
    for &(key, doc, switch) in RunConfig::KEYS {
        let arg = Arg::new(key)
            .long(key.replace('_', "-"))
            .global(true)
            .help(doc.trim());
        cmd = cmd.arg(if switch {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name("VALUE")
        });
    }
    cmd
}

fn from_command_line(m: &ArgMatches, key: &str) -> bool {
    m.value_source(key) == Some(ValueSource::CommandLine)
}

fn resolve_config(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        cfg.apply_file(path)?;
    }
    for &(key, _, switch) in RunConfig::KEYS {
        if !from_command_line(m, key) {
            continue;
        }
        if switch {
            cfg.set(key, "true")?;
        } else if let Some(value) = m.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn replay(path: &Path, only: Option<Stage>, out: Option<&Path>) -> Result<(), CliError> {
    let manifest = Manifest::read(path)?;
    let out = match out {
        Some(out) => out.to_owned(),
        None => path.parent().map(Path::to_owned).unwrap_or_default(),
    };
    let mut ran = false;
    for record in &manifest.runs {
        let stage = record.stage()?;
        if only.is_some_and(|s| s != stage) {
            continue;
        }
        let cfg = record.config(&out)?;
        stages::execute(stage, &cfg, Some(&record.inputs))?;
        ran = true;
    }
    if !ran {
        return Err(CliError::Data(format!(
            "{} records no matching stage",
            path.display()
        )));
    }
    Ok(())
}

fn run(matches: ArgMatches) -> Result<(), CliError> {
    let (stage, m) = match matches.subcommand() {
        Some((name, sub)) => (Some(name.parse::<Stage>().map_err(CliError::Usage)?), sub),
        None => (None, &matches),
    };
    if let Some(&threads) = m.get_one::<usize>("threads") {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {threads} threads: {e}")))?;
    }
    if let Some(path) = m.get_one::<PathBuf>("manifest") {
        let out = from_command_line(m, "out")
            .then(|| m.get_one::<String>("out").map(PathBuf::from))
            .flatten();
        return replay(path, stage, out.as_deref());
    }
    let cfg = resolve_config(m)?;
    if m.get_flag("print-config") {
        print!("{}", cfg.to_file_text());
        return Ok(());
    }
    let stage = stage.ok_or_else(|| CliError::Usage("no subcommand given; see --help".into()))?;
    stages::execute(stage, &cfg, None)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "top_k = 7\nbandwidth=0.2\nstrict=true\n").unwrap();
        let m = command()
            .try_get_matches_from([
                "mediashare",
                "msi",
                "--config",
                file.to_str().unwrap(),
                "--top-k",
                "5",
            ])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let cfg = resolve_config(sub).unwrap();
        assert_eq!(cfg.top_k, 5);
        assert_eq!(cfg.bandwidth, 0.2);
        assert!(cfg.strict);
        assert_eq!(cfg.dip_replicates, 2000);
    }
}
