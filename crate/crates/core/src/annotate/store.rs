use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::evalmetrics::AnnotationScore;

/// Append-only JSON-lines file of [`AnnotationScore`]s. Each append is one
/// complete line followed by an fsync; appends are serialized by a lock.
#[derive(Debug)]
pub struct ScoreStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl ScoreStore {
    /// Opens (creating if needed) the store and validates existing lines.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        // Drop a torn tail so the next append starts on a fresh line.
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            log::warn!(
                "{}: dropping {} bytes of an incomplete final line",
                path.display(),
                bytes.len() - keep
            );
            file.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
        }
        let store = ScoreStore {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        };
        store.read_all()?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Every stored score in file order. A final line without its newline
    /// (an append cut off mid-write) is ignored; any other bad line is an
    /// error.
    pub fn read_all(&self) -> Result<Vec<AnnotationScore>> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let complete = match text.rfind('\n') {
            Some(end) => &text[..end],
            None => "",
        };
        if complete.len() + 1 < text.len() {
            log::warn!("{}: ignoring incomplete final line", self.path.display());
        }
        let mut out = Vec::new();
        for (i, line) in complete.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let s = serde_json::from_str(line)
                .map_err(|e| Error::data(format!("{}:{}: {e}", self.path.display(), i + 1)))?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn append(&self, score: &AnnotationScore) -> Result<()> {
        let mut line = serde_json::to_string(score)?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(line.as_bytes())
            .and_then(|()| file.sync_data())
            .map_err(|e| Error::io(&self.path, e))
    }
}
