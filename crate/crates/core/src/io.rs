use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{AidError, Result};

/// Write via a temp file in the same directory, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| AidError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AidError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AidError::io(path, e))?;
    tmp.persist(path).map_err(|e| AidError::io(path, e.error))?;
    Ok(())
}
