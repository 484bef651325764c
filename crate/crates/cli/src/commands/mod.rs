pub mod decode;
pub mod encode;
pub mod eval;
pub mod prep;
pub mod sample;
pub mod train;

use crate::{input_err, CliError};
use clap::parser::ValueSource;
use clap::ArgMatches;
use std::path::Path;

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

pub(crate) fn write_bytes(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

/// True when the flag came from the command line or a config file rather
/// than its default.
pub(crate) fn given(matches: &ArgMatches, id: &str) -> bool {
    matches!(
        matches.value_source(id),
        Some(ValueSource::CommandLine | ValueSource::EnvVariable)
    )
}
