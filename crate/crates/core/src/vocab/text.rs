//! Line-oriented text form of event sequences.
//!
//! One event per line: `NOTE_ON <pitch>`, `NOTE_OFF <pitch>`,
//! `TIME_SHIFT <steps>`, or `VELOCITY <bin>`. Blank lines are ignored, as is
//! anything after `#`. Two optional header comments carry metadata:
//! `# source=<text>` and `# duration_s=<seconds>`.

use super::{EventSequence, PerformanceEvent, QuantizationConfig, SequenceMeta, VocabError};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Vocab { line: usize, source: VocabError },
}

impl std::fmt::Display for PerformanceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PerformanceEvent::NoteOn(p) => write!(f, "NOTE_ON {p}"),
            PerformanceEvent::NoteOff(p) => write!(f, "NOTE_OFF {p}"),
            PerformanceEvent::TimeShift(s) => write!(f, "TIME_SHIFT {s}"),
            PerformanceEvent::VelocityBin(b) => write!(f, "VELOCITY {b}"),
        }
    }
}

impl std::str::FromStr for PerformanceEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let (Some(kind), Some(arg), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected `KIND VALUE`, got {s:?}"));
        };
        let value: u16 = arg
            .parse()
            .map_err(|_| format!("bad numeric argument {arg:?}"))?;
        let small = || u8::try_from(value).map_err(|_| format!("{value} out of range"));
        Ok(match kind {
            "NOTE_ON" => PerformanceEvent::NoteOn(small()?),
            "NOTE_OFF" => PerformanceEvent::NoteOff(small()?),
            "TIME_SHIFT" => PerformanceEvent::TimeShift(value),
            "VELOCITY" => PerformanceEvent::VelocityBin(small()?),
            other => return Err(format!("unknown event kind {other:?}")),
        })
    }
}

pub fn to_text(seq: &EventSequence, cfg: &QuantizationConfig) -> Result<String, VocabError> {
    let mut out = String::with_capacity(seq.len() * 12 + 64);
    if !seq.meta.source.is_empty() {
        let _ = writeln!(out, "# source={}", seq.meta.source);
    }
    let _ = writeln!(out, "# duration_s={}", seq.meta.duration_s);
    for &index in &seq.events {
        let _ = writeln!(out, "{}", cfg.index_to_event(index)?);
    }
    Ok(out)
}

pub fn from_text(text: &str, cfg: &QuantizationConfig) -> Result<EventSequence, TextError> {
    let mut events = Vec::new();
    let mut meta = SequenceMeta::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (body, comment) = match raw.split_once('#') {
            Some((b, c)) => (b, Some(c.trim())),
            None => (raw, None),
        };
        if let Some((key, value)) = comment.and_then(|c| c.split_once('=')) {
            match key.trim() {
                "source" => meta.source = value.trim().to_string(),
                "duration_s" => {
                    meta.duration_s = value.trim().parse().map_err(|_| TextError::Syntax {
                        line,
                        reason: format!("bad duration {value:?}"),
                    })?
                }
                _ => {}
            }
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let event: PerformanceEvent = body
            .parse()
            .map_err(|reason| TextError::Syntax { line, reason })?;
        events.push(
            cfg.event_to_index(event)
                .map_err(|source| TextError::Vocab { line, source })?,
        );
    }
    Ok(EventSequence { events, meta })
}
