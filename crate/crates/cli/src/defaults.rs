//! Fold a JSON defaults file into the argument list. Anything given on the
//! command line wins.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory};
use serde_json::{Map, Value};

use crate::args::Cli;
use crate::error::CliError;

pub fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Usage(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Extra `--flag value` arguments for every config key the subcommand
/// accepts and the user did not pass. `serve` reads its own config.
pub fn config_args(matches: &ArgMatches, config: &Map<String, Value>) -> Result<Vec<OsString>, CliError> {
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    if name == "serve" {
        return Ok(Vec::new());
    }
    let command = Cli::command();
    let sub = command.find_subcommand(name).expect("parsed subcommand exists");

    let mut entries: Vec<(&String, &Value)> = config.iter().filter(|(_, v)| !v.is_object()).collect();
    if let Some(Value::Object(section)) = config.get(name) {
        entries.retain(|(k, _)| !section.contains_key(*k));
        entries.extend(section.iter());
    }

    let mut extra = Vec::new();
    for (key, value) in entries {
        let long = key.replace('_', "-");
        if long == "config" {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(command.get_arguments())
            .find(|a| a.get_long() == Some(long.as_str()));
        let Some(arg) = arg else {
            log::debug!("config key {key:?} does not apply to {name}");
            continue;
        };
        let id = arg.get_id().as_str();
        let typed = |m: &ArgMatches| {
            m.try_contains_id(id).unwrap_or(false) && m.value_source(id) == Some(ValueSource::CommandLine)
        };
        let given = typed(sub_matches) || typed(matches);
        if given {
            continue;
        }
        let flag = OsString::from(format!("--{long}"));
        match (arg.get_action(), value) {
            (ArgAction::SetTrue, Value::Bool(true)) => extra.push(flag),
            (ArgAction::SetTrue, Value::Bool(false)) => {}
            (ArgAction::SetTrue, _) => return Err(CliError::Usage(format!("config key {key:?} must be a boolean"))),
            (_, Value::Array(items)) => {
                for item in items {
                    let v = scalar(item)
                        .ok_or_else(|| CliError::Usage(format!("config key {key:?} must hold strings or numbers")))?;
                    extra.push(flag.clone());
                    extra.push(v.into());
                }
            }
            (_, v) => {
                let v = scalar(v)
                    .ok_or_else(|| CliError::Usage(format!("config key {key:?} must be a string or number")))?;
                extra.push(flag);
                extra.push(v.into());
            }
        }
    }
    Ok(extra)
}
