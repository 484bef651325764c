//! Config files: `key=value` lines, `#` comments. Keys are long flag names
//! with `-` or `_`. File values are spliced in right after the subcommand,
//! so flags typed on the command line override them.

use crate::{input_err, CliError};
use clap::{ArgMatches, CommandFactory};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

const SKIPPED: [&str; 4] = ["help", "version", "config", "print_config"];

/// Finds `--config FILE` (or `--config=FILE`) after the subcommand.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(2);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Turns config text into `--key=value` arguments.
pub fn parse_config_text(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Input(format!("config line {}: expected key=value", i + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Input(format!("config line {}: bad key {key:?}", i + 1)));
        }
        out.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(out)
}

/// Splices the `--config` file's flags into `args`.
pub fn inject_config_file(mut args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let extra = parse_config_text(&text)?;
    let at = 2.min(args.len());
    args.splice(at..at, extra);
    Ok(args)
}

/// The resolved flags of subcommand `name` in config-file form. Positional
/// arguments and unset optional flags are left out.
pub fn render(name: &str, matches: &ArgMatches) -> String {
    let root = crate::Cli::command();
    let Some(cmd) = root.find_subcommand(name) else {
        return String::new();
    };
    let mut out = String::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if arg.is_positional() || SKIPPED.contains(&id) {
            continue;
        }
        let Some(long) = arg.get_long() else { continue };
        let Ok(Some(values)) = matches.try_get_raw(id) else {
            continue;
        };
        let joined: Vec<String> = values.map(|v| v.to_string_lossy().into_owned()).collect();
        let _ = writeln!(out, "{long}={}", joined.join(","));
    }
    out
}
