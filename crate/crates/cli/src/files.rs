//! Reading configs, motifs and MIDI directories.

use std::path::{Path, PathBuf};

use repetition_core::dataset::Song;
use repetition_core::symbolic::{MotifRecord, TokenMatrix};
use repetition_core::Error as CoreError;
use serde::de::DeserializeOwned;
use walkdir::WalkDir;

use crate::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

/// Parse JSON with the failing field path in the error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.into_inner().to_string()
        } else {
            format!("{path}: {}", e.into_inner())
        }
    })
}

/// Load a `.toml` or JSON config file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_string(path)?;
    let parsed = if is_toml(path) {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        from_json(&text)
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// A motif from a JSON token matrix (or motif record), or the first
/// non-empty bar of a MIDI file.
pub fn load_motif(path: &Path) -> CliResult<TokenMatrix> {
    let is_midi = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
    if is_midi {
        let song = Song::from_midi(path.display().to_string(), &read(path)?)?;
        let records = song.motif_records()?;
        let first = records.into_iter().next().ok_or(CoreError::EmptyMotif)?;
        return Ok(first.tokens()?);
    }
    let text = read_string(path)?;
    let tokens: TokenMatrix = from_json(&text).map_err(|e| CoreError::InvalidTokens(format!("{}: {e}", path.display())))?;
    Ok(tokens)
}

pub fn midi_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            CliError::io(&path, e.into_io_error().unwrap_or_else(|| std::io::Error::other("directory loop")))
        })?;
        let p = entry.path();
        if entry.file_type().is_file()
            && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
        {
            files.push(p.to_path_buf());
        }
    }
    Ok(files)
}

/// Song id: path relative to the corpus root, without extension.
pub fn song_id(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file).with_extension("");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub files: usize,
    pub skipped: Vec<(PathBuf, String)>,
    pub motifs: usize,
}

/// Motif records for every MIDI file under `dir`. Unreadable files fail the
/// run unless `skip_invalid` is set.
pub fn ingest_dir(dir: &Path, skip_invalid: bool) -> CliResult<(Vec<MotifRecord>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for file in midi_files(dir)? {
        report.files += 1;
        let bytes = read(&file)?;
        let result = Song::from_midi(song_id(dir, &file), &bytes).and_then(|s| s.motif_records());
        match result {
            Ok(r) => records.extend(r),
            Err(e) if skip_invalid => {
                log::warn!("skipping {}: {e}", file.display());
                report.skipped.push((file, e.to_string()));
            }
            Err(e) => return Err(CliError::Core(CoreError::InvalidTokens(format!("{}: {e}", file.display())))),
        }
    }
    report.motifs = records.len();
    Ok((records, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_errors_name_the_field() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            inner: Inner,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            n: u32,
        }
        let err = from_json::<Outer>(r#"{"inner":{"n":"x"}}"#).unwrap_err();
        assert!(err.starts_with("inner.n:"), "{err}");
    }

    #[test]
    fn song_ids_are_relative() {
        assert_eq!(song_id(Path::new("/c"), Path::new("/c/a/b.mid")), "a/b");
    }
}
