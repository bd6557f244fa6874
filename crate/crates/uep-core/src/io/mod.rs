//! On-disk formats: annotation ingestion, grid containers, versioned JSON
//! documents, and CSV report emission.
//!
//! Every JSON document carries a "format" tag checked on load, and floats
//! round-trip bit-exactly in both JSON and CSV.

pub mod annotations;
pub mod formats;
pub mod grids;
pub mod reports;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(file)?)
}

#[derive(serde::Deserialize)]
struct FormatProbe {
    format: String,
}

/// Reads a versioned document, checking the "format" tag before the body so
/// that a file of the wrong kind reports a version mismatch rather than a
/// missing-field parse error.
pub(crate) fn read_tagged_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    expected: &str,
) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let probe: FormatProbe = serde_json::from_str(&text)?;
    if probe.format != expected {
        return Err(crate::error::UepError::VersionMismatch {
            found: probe.format,
            expected: expected.to_string(),
        });
    }
    Ok(serde_json::from_str(&text)?)
}
