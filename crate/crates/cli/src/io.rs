use std::fs;
use std::io::Write;
use std::path::Path;

use relfuse::formats::{ProblemFile, RelationMapFile, SequenceFile};

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn with_path<T>(path: &Path, r: Result<T, relfuse::formats::FormatError>) -> CliResult<T> {
    r.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_sequence(path: &Path) -> CliResult<(relfuse::JointTree, relfuse::PoseSequence)> {
    let text = read_text(path)?;
    let file = with_path(path, SequenceFile::from_json(&text))?;
    with_path(path, file.decode())
}

pub fn read_problem(path: &Path) -> CliResult<ProblemFile> {
    let text = read_text(path)?;
    with_path(path, ProblemFile::from_json(&text))
}

pub fn read_maps(path: &Path) -> CliResult<RelationMapFile> {
    let text = read_text(path)?;
    with_path(path, RelationMapFile::from_json(&text))
}
