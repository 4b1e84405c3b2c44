//! Output plumbing: atomic file writes and wall-clock formatting.

use std::path::Path;
use std::time::Duration;

use palm::{PalmError, Result};

/// Writes `bytes` to `path` atomically: the content lands in a temporary
/// file in the same directory and is renamed into place only when complete,
/// so a failing command never leaves a partial artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path)
        .map_err(|e| PalmError::Io(e.error))?;
    Ok(())
}

/// Wall-clock seconds with the 3-decimal resolution used in all reports.
pub fn secs3(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}
