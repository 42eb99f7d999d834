use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

mod args;
mod commands;
mod defaults;
mod error;

use args::{Cli, Command};
use commands::Outcome;
use error::CliError;

fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    let clap_err = |e: clap::Error| match e.kind() {
        clap::error::ErrorKind::DisplayHelp
        | clap::error::ErrorKind::DisplayVersion
        | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            std::process::exit(0);
        }
        _ => CliError::Usage(e.render().to_string().trim().to_string()),
    };
    // A lenient first pass finds the subcommand, the config file and what
    // the user typed; required flags may still come from the config.
    let loose = Cli::command()
        .ignore_errors(true)
        .try_get_matches_from(&argv)
        .map_err(clap_err)?;
    let mut argv = argv;
    if let Some(path) = loose.get_one::<PathBuf>("config") {
        let config = defaults::read_config(path)?;
        argv.extend(defaults::config_args(&loose, &config)?);
    }
    let matches = Cli::command().try_get_matches_from(&argv).map_err(clap_err)?;
    Cli::from_arg_matches(&matches).map_err(clap_err)
}

fn emit(outcome: Outcome) -> Result<(), CliError> {
    let summary = format!("{}\n", outcome.summary);
    match outcome.artifact {
        Some((Some(path), text)) => {
            std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
            print!("{summary}");
        }
        Some((None, text)) => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
            eprint!("{summary}");
        }
        None => print!("{summary}"),
    }
    Ok(())
}

fn serve(cli: &Cli, args: &args::ServeArgs) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(defaults::read_config).transpose()?;
    let config = commands::serve_config(args, file.as_ref())?;
    let mut builder = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = cli.jobs {
        builder.worker_threads(n.max(1));
    }
    let runtime = builder.enable_all().build().map_err(|source| CliError::Io {
        path: "<runtime>".into(),
        source,
    })?;
    runtime.block_on(corefqa_service::serve(config))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Serve(a) => serve(&cli, a),
        other => emit(commands::run(other)?),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let result = parse(argv).and_then(|cli| {
        let level = cli.log.parse().unwrap_or(log::LevelFilter::Warn);
        env_logger::Builder::new()
            .filter_level(level)
            .format_target(false)
            .target(env_logger::Target::Stderr)
            .init();
        run(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
