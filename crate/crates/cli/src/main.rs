mod args;
mod commands;
mod config;
mod failure;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::ConfigFile;
use failure::Failure;
use output::RunManifest;

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let loaded = config::load_config(&cli.flags, &env_var)?;
    let (config_path, file) = match loaded {
        Some((p, f)) => (Some(p), f),
        None => (None, ConfigFile::default()),
    };
    let settings = config::resolve(cli.flags, &env_var, &file)?;
    if let Some(t) = settings.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {t} threads: {e}")))?;
    }

    let (sub, outcome) = match cli.command {
        Command::Stats => ("stats".to_owned(), commands::stats(&settings)?),
        Command::Bound { kind } => (format!("bound {kind:?}"), commands::bound(kind, &settings)?),
        Command::Verify { suite } => (
            format!("verify {}", suite.name()),
            commands::run_verify(suite, &settings)?,
        ),
    };

    let manifest = RunManifest::new(
        std::env::args().collect(),
        &sub,
        settings.clone(),
        config_path,
        outcome.inputs.clone(),
    );
    output::print_json(&output::report(&outcome.kind, &manifest, outcome.body));
    if let (Some(path), Some(csv)) = (&settings.csv, &outcome.csv) {
        output::write_file(path, csv)?;
    }
    match outcome.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("covconc: {f}");
            f.exit_code()
        }
    }
}
