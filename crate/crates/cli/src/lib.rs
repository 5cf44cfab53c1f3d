//! Command-line driver: parses flags and config files, runs one experiment
//! and writes its output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, Command};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "DELAYDENSE_THREADS";

fn cli() -> Command {
    let mut root = Command::new("delaydense")
        .version(output::VERSION)
        .about("Probabilistic and ergodic numerics for scalar delay differential equations")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in commands::COMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .help("`key = value` config file; flags override its values"),
        );
        for key in commands::command_keys(name).unwrap() {
            sub = sub.arg(
                Arg::new(key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true),
            );
        }
        root = root.subcommand(sub);
    }
    root
}

/// Parses `argv` into the subcommand name and its resolved configuration.
pub fn parse_args<I, T>(argv: I) -> Result<(String, ExperimentConfig), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = cli()
        .try_get_matches_from(argv)
        .map_err(|e| match e.kind() {
            ErrorKind::DisplayHelp
            | ErrorKind::DisplayVersion
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => CliError::Help(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        })?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut cfg = match sub.get_one::<String>("config") {
        Some(p) => ExperimentConfig::load(name, Path::new(p))?,
        None => ExperimentConfig::new(name),
    };
    let keys = commands::command_keys(name).unwrap();
    let sections: Vec<String> = commands::COMMANDS
        .iter()
        .map(|(c, _)| c.replace('-', "_"))
        .collect();
    let sections: Vec<&str> = sections.iter().map(String::as_str).collect();
    cfg.check_keys(&keys, &sections)?;
    for key in &keys {
        if let Some(v) = sub.get_one::<String>(key) {
            cfg.set_flag(key, v);
        }
    }
    Ok((name.to_string(), cfg))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        v.trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation {
                field: THREADS_ENV.into(),
                reason: format!("expected a positive integer, got `{v}`"),
            })?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|(name, cfg)| {
        configure_threads()?;
        commands::dispatch(&name, &cfg)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(CliError::Help(msg)) => {
            print!("{msg}");
            0
        }
        Err(CliError::Usage(msg)) => {
            eprint!("{msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
