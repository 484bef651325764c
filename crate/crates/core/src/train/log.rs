//! Comma-separated training log.

use std::fmt;
use std::io::Write;
use std::path::Path;

pub const LOG_HEADER: &str = "step,train_loss,heldout_loss,wallclock_s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    pub train_loss: f64,
    /// `None` when no evaluation ran at this step; written as `nan`.
    pub heldout_loss: Option<f64>,
    pub wallclock_s: f64,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{:.6},", self.step, self.train_loss)?;
        match self.heldout_loss {
            Some(h) => write!(f, "{h:.6}")?,
            None => write!(f, "nan")?,
        }
        write!(f, ",{:.3}", self.wallclock_s)
    }
}

impl LogRecord {
    pub fn parse(line: &str) -> Option<Self> {
        let mut it = line.trim().split(',');
        let step = it.next()?.parse().ok()?;
        let train_loss = it.next()?.parse().ok()?;
        let heldout = it.next()?;
        let heldout_loss = if heldout == "nan" {
            None
        } else {
            Some(heldout.parse().ok()?)
        };
        let wallclock_s = it.next()?.parse().ok()?;
        if it.next().is_some() {
            return None;
        }
        Some(Self {
            step,
            train_loss,
            heldout_loss,
            wallclock_s,
        })
    }
}

/// Append-only log file.
pub struct TrainingLog {
    file: std::fs::File,
}

impl TrainingLog {
    /// Starts a new log, replacing any existing file.
    pub fn create(path: &Path) -> std::io::Result<Self> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "{LOG_HEADER}")?;
        Ok(Self { file })
    }

    /// Reopens a log for a resumed run, dropping records past `step` (they
    /// belong to updates the checkpoint does not contain).
    pub fn resume(path: &Path, step: u64) -> std::io::Result<Self> {
        let kept: Vec<LogRecord> = match std::fs::read_to_string(path) {
            Ok(text) => read_records(&text).into_iter().filter(|r| r.step <= step).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut log = Self::create(path)?;
        for r in &kept {
            log.append(r)?;
        }
        Ok(log)
    }

    pub fn append(&mut self, record: &LogRecord) -> std::io::Result<()> {
        writeln!(self.file, "{record}")?;
        self.file.flush()
    }
}

/// Parses every well-formed record, skipping the header.
pub fn read_records(text: &str) -> Vec<LogRecord> {
    text.lines().filter_map(LogRecord::parse).collect()
}
