use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::Result;

/// Writes `rows` as CSV (header from the first row's field names) to a
/// temporary file next to `path`, then renames it into place.
pub fn write_csv_atomic<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    write_atomic(path, |file| {
        let mut w = csv::Writer::from_writer(file);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Pretty-printed JSON, written atomically like [`write_csv_atomic`].
pub fn write_json_atomic<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    write_atomic(path, |file| {
        serde_json::to_writer_pretty(&mut *file, value)?;
        file.write_all(b"\n")?;
        Ok(())
    })
}

fn write_atomic(path: &Path, fill: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
