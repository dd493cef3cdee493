use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ErrorCode, ProtocolError};
use crate::geometry::{ExtremeClicks, Role};

pub const LOG_VERSION: u32 = 1;

/// Everything that changes service state. One JSON object per log line,
/// tagged by `type` and carrying the format version `v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    WorkerRegistered {
        worker: String,
    },
    BatchOpened {
        worker: String,
        /// Task ids in pool order, golden excluded.
        entries: Vec<String>,
        golden: String,
        golden_index: usize,
    },
    ClicksPosted {
        worker: String,
        task: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shown_ms: Option<u64>,
        clicks: ExtremeClicks,
    },
    /// Golden clicks that missed; the worker has to redo the image.
    GoldenBlocked {
        worker: String,
        task: String,
        clicks: ExtremeClicks,
        failed: Vec<Role>,
    },
}

#[derive(Serialize, Deserialize)]
struct Record {
    v: u32,
    #[serde(flatten)]
    event: Event,
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(&Record {
            v: LOG_VERSION,
            event: self.clone(),
        })
        .expect("events serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let raw: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        match raw.get("v").and_then(|v| v.as_u64()) {
            Some(v) if v == LOG_VERSION as u64 => {}
            Some(v) => return Err(format!("unsupported log version {v}")),
            None => return Err("missing version field \"v\"".into()),
        }
        let rec: Record = serde_json::from_value(raw).map_err(|e| e.to_string())?;
        Ok(rec.event)
    }
}

/// Reads a log written by [`EventSink`]. A missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<Event>, ProtocolError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_error(path, e)),
    };
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = Event::from_line(&line)
            .map_err(|m| ProtocolError::new(ErrorCode::BadLog, format!("{} line {}: {m}", path.display(), i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

/// Append-only JSONL file; every event is flushed before `append` returns.
#[derive(Debug)]
pub struct EventSink {
    path: PathBuf,
    file: File,
}

impl EventSink {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ProtocolError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        Ok(Self { path, file })
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ProtocolError> {
        let mut line = event.to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| io_error(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn io_error(path: &Path, e: std::io::Error) -> ProtocolError {
    ProtocolError::new(ErrorCode::Io, format!("{}: {e}", path.display()))
}
