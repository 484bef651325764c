//! The performance event vocabulary.
//!
//! A performance is a stream of four kinds of events: note-on and note-off
//! for each of the 128 MIDI pitches, time shifts of 1..=125 steps of 8 ms,
//! and 32 velocity bins that set the loudness of subsequent note-ons. Each
//! event has a fixed integer code:
//!
//! | codes     | event                      |
//! |-----------|----------------------------|
//! | 0..=127   | `NoteOn(pitch)`            |
//! | 128..=255 | `NoteOff(pitch)`           |
//! | 256..=380 | `TimeShift(1..=125 steps)` |
//! | 381..=412 | `VelocityBin(0..=31)`      |
//!
//! Turning velocity off ([`QuantizationConfig::without_velocity`]) drops the
//! last block and leaves a 381-symbol vocabulary.

mod codec;
mod text;

pub use codec::{decode, encode, DecodeError, DecodeRepairs, DecodedPerformance};
pub use text::{from_text, to_text, TextError};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const NUM_PITCHES: u16 = 128;
/// Size of the full vocabulary with the default quantization.
pub const VOCAB_SIZE: usize = 413;
/// Velocity state a decoder starts in before any velocity event.
pub const DEFAULT_VELOCITY_BIN: u8 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: i64 },
    #[error("invalid quantization config: {0}")]
    InvalidConfig(String),
}

fn out_of_range(what: &'static str, value: impl Into<i64>) -> VocabError {
    VocabError::OutOfRange {
        what,
        value: value.into(),
    }
}

/// One symbol of the performance vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerformanceEvent {
    NoteOn(u8),
    NoteOff(u8),
    /// Advance time by this many quantization steps.
    TimeShift(u16),
    VelocityBin(u8),
}

/// Integer code of a [`PerformanceEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventIndex(pub u16);

impl EventIndex {
    pub fn code(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EventIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Time and velocity resolution of the codec.
///
/// The default is 8 ms steps, shifts of up to 125 steps (one second), and 32
/// velocity bins. `velocity_bins == 0` disables velocity events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationConfig {
    pub dt_ms: u32,
    pub velocity_bins: u32,
    pub max_shift_steps: u32,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        Self {
            dt_ms: 8,
            velocity_bins: 32,
            max_shift_steps: 125,
        }
    }
}

impl QuantizationConfig {
    pub fn without_velocity() -> Self {
        Self {
            velocity_bins: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), VocabError> {
        if self.dt_ms == 0 || self.max_shift_steps == 0 {
            return Err(VocabError::InvalidConfig(
                "dt_ms and max_shift_steps must be positive".into(),
            ));
        }
        if self.dt_ms * self.max_shift_steps != 1000 {
            return Err(VocabError::InvalidConfig(format!(
                "dt_ms * max_shift_steps = {} (must be 1000)",
                self.dt_ms * self.max_shift_steps
            )));
        }
        // Bin centres must map back to their own bin, which holds for powers
        // of two up to 64.
        if !matches!(self.velocity_bins, 0 | 1 | 2 | 4 | 8 | 16 | 32 | 64) {
            return Err(VocabError::InvalidConfig(format!(
                "velocity_bins = {} (must be 0 or a power of two <= 64)",
                self.velocity_bins
            )));
        }
        Ok(())
    }

    pub fn has_velocity(&self) -> bool {
        self.velocity_bins > 0
    }

    pub fn vocab_size(&self) -> usize {
        2 * NUM_PITCHES as usize + self.max_shift_steps as usize + self.velocity_bins as usize
    }

    fn shift_base(&self) -> u16 {
        2 * NUM_PITCHES
    }

    fn velocity_base(&self) -> u16 {
        self.shift_base() + self.max_shift_steps as u16
    }

    pub fn event_to_index(&self, event: PerformanceEvent) -> Result<EventIndex, VocabError> {
        let code = match event {
            PerformanceEvent::NoteOn(p) if p < 128 => p as u16,
            PerformanceEvent::NoteOff(p) if p < 128 => NUM_PITCHES + p as u16,
            PerformanceEvent::TimeShift(s) if s >= 1 && (s as u32) <= self.max_shift_steps => {
                self.shift_base() + s - 1
            }
            PerformanceEvent::VelocityBin(b) if (b as u32) < self.velocity_bins => {
                self.velocity_base() + b as u16
            }
            PerformanceEvent::NoteOn(p) | PerformanceEvent::NoteOff(p) => {
                return Err(out_of_range("pitch", p))
            }
            PerformanceEvent::TimeShift(s) => return Err(out_of_range("time shift", s)),
            PerformanceEvent::VelocityBin(b) => return Err(out_of_range("velocity bin", b)),
        };
        Ok(EventIndex(code))
    }

    pub fn index_to_event(&self, index: EventIndex) -> Result<PerformanceEvent, VocabError> {
        let code = index.0;
        Ok(if code < NUM_PITCHES {
            PerformanceEvent::NoteOn(code as u8)
        } else if code < 2 * NUM_PITCHES {
            PerformanceEvent::NoteOff((code - NUM_PITCHES) as u8)
        } else if code < self.velocity_base() {
            PerformanceEvent::TimeShift(code - self.shift_base() + 1)
        } else if (code as usize) < self.vocab_size() {
            PerformanceEvent::VelocityBin((code - self.velocity_base()) as u8)
        } else {
            return Err(out_of_range("event index", code));
        })
    }

    /// Maps a MIDI velocity (1..=127) to its bin: `floor(v / 4)` for 32 bins.
    pub fn velocity_to_bin(&self, velocity: u8) -> Result<u8, VocabError> {
        if !(1..=127).contains(&velocity) || self.velocity_bins == 0 {
            return Err(out_of_range("velocity", velocity));
        }
        let bins = self.velocity_bins;
        Ok((velocity as u32 * bins / 128).min(bins - 1) as u8)
    }

    /// Centre velocity of a bin: `4b + 2` for 32 bins.
    pub fn bin_to_velocity(&self, bin: u8) -> Result<u8, VocabError> {
        let bins = self.velocity_bins;
        if bin as u32 >= bins {
            return Err(out_of_range("velocity bin", bin));
        }
        Ok(((2 * bin as u32 + 1) * 64 / bins).clamp(1, 127) as u8)
    }

    /// Velocity state before any velocity event.
    pub fn default_bin(&self) -> u8 {
        (self.velocity_bins * DEFAULT_VELOCITY_BIN as u32 / 32) as u8
    }

    /// Velocity given to decoded notes, either from the current bin or (with
    /// velocity disabled) the default bin of the full vocabulary.
    pub fn default_velocity(&self) -> u8 {
        if self.has_velocity() {
            self.bin_to_velocity(self.default_bin()).unwrap_or(82)
        } else {
            QuantizationConfig::default()
                .bin_to_velocity(DEFAULT_VELOCITY_BIN)
                .unwrap_or(82)
        }
    }

    /// Rounds a time to the nearest step; exact halves round up.
    pub fn seconds_to_step(&self, seconds: f64) -> u64 {
        let steps = seconds * 1000.0 / self.dt_ms as f64;
        // The epsilon makes decimal halves such as 0.012 s (1.5 steps) round
        // up despite binary representation error.
        (steps + 0.5 + 1e-9).floor().max(0.0) as u64
    }

    pub fn step_to_seconds(&self, step: u64) -> f64 {
        step as f64 * self.dt_ms as f64 / 1000.0
    }

    /// Number of steps a code advances time by (zero for non-shift codes).
    pub fn shift_steps(&self, index: EventIndex) -> u64 {
        match self.index_to_event(index) {
            Ok(PerformanceEvent::TimeShift(s)) => s as u64,
            _ => 0,
        }
    }
}

/// Code of an event under the default 413-symbol vocabulary.
pub fn event_to_index(event: PerformanceEvent) -> Result<EventIndex, VocabError> {
    QuantizationConfig::default().event_to_index(event)
}

/// Event of a code under the default 413-symbol vocabulary.
pub fn index_to_event(index: EventIndex) -> Result<PerformanceEvent, VocabError> {
    QuantizationConfig::default().index_to_event(index)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SequenceMeta {
    pub source: String,
    pub duration_s: f64,
}

/// An encoded performance clip.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSequence {
    pub events: Vec<EventIndex>,
    pub meta: SequenceMeta,
}

impl EventSequence {
    pub fn new(events: Vec<EventIndex>) -> Self {
        Self {
            events,
            meta: SequenceMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_shift_steps(&self, cfg: &QuantizationConfig) -> u64 {
        self.events.iter().map(|&e| cfg.shift_steps(e)).sum()
    }

    pub fn codes(&self) -> Vec<u16> {
        self.events.iter().map(|e| e.0).collect()
    }
}
