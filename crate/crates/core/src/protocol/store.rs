//! Append-only session log. Every committed mutation appends the full session
//! as one JSON line; the in-memory index is rebuilt by replaying the file, the
//! last line for an id winning.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};

use super::Session;

pub struct SessionLog {
    path: Option<PathBuf>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl SessionLog {
    /// A log that keeps nothing on disk.
    pub fn in_memory() -> Self {
        SessionLog {
            path: None,
            writer: Mutex::new(None),
        }
    }

    /// Opens (creating if needed) the log at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Session>)> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut latest: BTreeMap<String, Session> = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let session: Session = serde_json::from_str(&line).map_err(|e| {
                    Error::Integrity(format!("{}:{}: {e}", path.display(), i + 1))
                })?;
                latest.insert(session.id.clone(), session);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = SessionLog {
            path: Some(path),
            writer: Mutex::new(Some(BufWriter::new(file))),
        };
        Ok((log, latest.into_values().collect()))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&self, session: &Session) -> Result<()> {
        let mut guard = self.writer.lock().expect("session log poisoned");
        if let Some(w) = guard.as_mut() {
            let mut line = serde_json::to_vec(session)?;
            line.push(b'\n');
            w.write_all(&line)?;
            w.flush()?;
        }
        Ok(())
    }

    /// Flushes and fsyncs the underlying file.
    pub fn sync(&self) -> Result<()> {
        let mut guard = self.writer.lock().expect("session log poisoned");
        if let Some(w) = guard.as_mut() {
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        Ok(())
    }
}
