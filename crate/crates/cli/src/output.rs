//! Run-stamped output directories.

use std::io;
use std::path::{Path, PathBuf};

/// A directory holding the outputs of one invocation.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates `<base>/<name>` when `name` is given (reusing it if present),
    /// otherwise a fresh `<base>/<command>-<timestamp>`.
    pub fn create(base: &Path, command: &str, name: Option<&str>) -> io::Result<Self> {
        std::fs::create_dir_all(base)?;
        if let Some(name) = name {
            let path = base.join(name);
            std::fs::create_dir_all(&path)?;
            return Ok(RunDir { path });
        }
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S%.3f");
        let stem = format!("{command}-{stamp}");
        for attempt in 0.. {
            let dir = if attempt == 0 {
                stem.clone()
            } else {
                format!("{stem}-{attempt}")
            };
            let path = base.join(dir);
            match std::fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}
