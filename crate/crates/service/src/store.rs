use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use imteval_core::session::SessionLog;

/// Finished session logs in submission order, optionally mirrored to an
/// append-only JSONL file. All appends go through one instance.
#[derive(Debug, Default)]
pub struct LogStore {
    logs: Vec<SessionLog>,
    file: Option<File>,
}

impl LogStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_file(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            logs: Vec::new(),
            file: Some(file),
        })
    }

    pub fn append(&mut self, log: SessionLog) -> io::Result<()> {
        if let Some(f) = &mut self.file {
            writeln!(f, "{}", log.to_json_line())?;
            f.flush()?;
        }
        self.logs.push(log);
        Ok(())
    }

    pub fn logs(&self) -> &[SessionLog] {
        &self.logs
    }
}
