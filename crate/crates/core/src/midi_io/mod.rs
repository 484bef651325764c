//! Standard MIDI File reading and writing.
//!
//! [`parse_smf`] turns raw bytes into a [`MidiFile`] that keeps every track's
//! channel messages at absolute ticks, together with a merged [`TempoMap`].
//! [`extract_performance`] then flattens that into seconds-based
//! [`PerfNote`]s and sustain-pedal [`PedalInterval`]s. [`write_smf`] goes the
//! other way for generated material.
//!
//! All channels are merged: the material we care about is solo piano, so the
//! channel number carries no information.

mod extract;
mod parse;
mod write;

pub use extract::{extract_performance, ExtractDiagnostics, Performance};
pub use parse::parse_smf;
pub use write::{write_smf, write_smf_until, WRITE_DIVISION, WRITE_TEMPO};

use thiserror::Error;

/// Default tempo (120 bpm) when a file carries no tempo meta event.
pub const DEFAULT_TEMPO: u32 = 500_000;

/// Controller number of the sustain (damper) pedal.
pub const SUSTAIN_CONTROLLER: u8 = 64;

/// CC64 values at or above this are "pedal down".
pub const PEDAL_THRESHOLD: u8 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated chunk: {0}")]
    TruncatedChunk(String),
    #[error("unsupported SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division is not supported")]
    UnsupportedDivision,
    #[error("malformed event at byte {offset} of track {track}: {reason}")]
    MalformedEvent {
        track: usize,
        offset: usize,
        reason: String,
    },
}

/// SMF format 0 (single track) or 1 (simultaneous tracks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmfFormat {
    SingleTrack,
    MultiTrack,
}

/// A channel voice message. The channel is retained here for completeness
/// even though extraction ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMessage {
    NoteOn { channel: u8, key: u8, velocity: u8 },
    NoteOff { channel: u8, key: u8, velocity: u8 },
    ControlChange { channel: u8, controller: u8, value: u8 },
    /// Program change, pitch bend, aftertouch: parsed for framing, unused.
    Other { status: u8, data: [u8; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackEvent {
    pub tick: u64,
    pub message: ChannelMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Track {
    pub events: Vec<TrackEvent>,
    /// Tick of the end-of-track meta event (or of the last event if absent).
    pub end_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TempoChange {
    pub tick: u64,
    pub micros_per_quarter: u32,
}

/// Piecewise-constant tempo over ticks.
///
/// Always non-empty, sorted by tick, and starting at tick 0. Conversion
/// accumulates `ticks * tempo` exactly in integers and divides once, so for
/// a constant tempo `seconds(tick) == tick * T / (D * 1e6)` with a single
/// rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempoMap {
    division: u16,
    changes: Vec<TempoChange>,
    // Σ Δtick·tempo up to the start of each segment.
    prefix: Vec<u128>,
}

impl TempoMap {
    /// Builds a map from raw (tick, tempo) pairs in any order. At equal ticks
    /// the last pair given wins.
    pub fn new(division: u16, mut raw: Vec<TempoChange>) -> Self {
        raw.sort_by_key(|c| c.tick);
        let mut changes: Vec<TempoChange> = Vec::with_capacity(raw.len() + 1);
        if raw.first().is_none_or(|c| c.tick != 0) {
            changes.push(TempoChange {
                tick: 0,
                micros_per_quarter: DEFAULT_TEMPO,
            });
        }
        for c in raw {
            match changes.last_mut() {
                Some(last) if last.tick == c.tick => *last = c,
                _ => changes.push(c),
            }
        }
        let mut prefix = Vec::with_capacity(changes.len());
        let mut acc: u128 = 0;
        for (i, c) in changes.iter().enumerate() {
            if i > 0 {
                let prev = changes[i - 1];
                acc += (c.tick - prev.tick) as u128 * prev.micros_per_quarter as u128;
            }
            prefix.push(acc);
        }
        Self {
            division,
            changes,
            prefix,
        }
    }

    pub fn constant(division: u16, micros_per_quarter: u32) -> Self {
        Self::new(
            division,
            vec![TempoChange {
                tick: 0,
                micros_per_quarter,
            }],
        )
    }

    pub fn division(&self) -> u16 {
        self.division
    }

    pub fn changes(&self) -> &[TempoChange] {
        &self.changes
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        let idx = self.changes.partition_point(|c| c.tick <= tick) - 1;
        let seg = self.changes[idx];
        let micro_ticks =
            self.prefix[idx] + (tick - seg.tick) as u128 * seg.micros_per_quarter as u128;
        micro_ticks as f64 / (self.division as f64 * 1e6)
    }
}

/// A parsed Standard MIDI File.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiFile {
    pub format: SmfFormat,
    /// Ticks per quarter note; always positive.
    pub division: u16,
    pub tracks: Vec<Track>,
    pub tempo_map: TempoMap,
}

impl MidiFile {
    pub fn channel_event_count(&self) -> usize {
        self.tracks.iter().map(|t| t.events.len()).sum()
    }
}

/// One sounded note.
///
/// Invariants: `offset_s > onset_s >= 0`, pitch in 0..=127, velocity in
/// 1..=127. Within a note list no two notes of the same pitch overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfNote {
    pub pitch: u8,
    pub onset_s: f64,
    pub offset_s: f64,
    pub velocity: u8,
}

impl PerfNote {
    pub fn new(pitch: u8, onset_s: f64, offset_s: f64, velocity: u8) -> Self {
        Self {
            pitch,
            onset_s,
            offset_s,
            velocity,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    pub fn is_valid(&self) -> bool {
        self.pitch <= 127
            && (1..=127).contains(&self.velocity)
            && self.onset_s >= 0.0
            && self.onset_s.is_finite()
            && self.offset_s.is_finite()
            && self.offset_s > self.onset_s
    }
}

/// Checks the note-list invariants: every note valid and no same-pitch overlap.
pub fn is_valid_note_list(notes: &[PerfNote]) -> bool {
    if !notes.iter().all(PerfNote::is_valid) {
        return false;
    }
    let mut by_pitch: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 128];
    for n in notes {
        by_pitch[n.pitch as usize].push((n.onset_s, n.offset_s));
    }
    by_pitch.iter_mut().all(|spans| {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        spans.windows(2).all(|w| w[0].1 <= w[1].0)
    })
}

/// Sorts notes by onset, then pitch. This is the canonical order used across
/// the crate when note lists are compared.
pub fn sort_notes(notes: &mut [PerfNote]) {
    notes.sort_by(|a, b| {
        a.onset_s
            .total_cmp(&b.onset_s)
            .then(a.pitch.cmp(&b.pitch))
            .then(a.offset_s.total_cmp(&b.offset_s))
    });
}

/// Sustain pedal held from `on_s` to `off_s`. `off_s` is `f64::INFINITY` if
/// the pedal was never released.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedalInterval {
    pub on_s: f64,
    pub off_s: f64,
}

impl PedalInterval {
    pub fn new(on_s: f64, off_s: f64) -> Self {
        Self { on_s, off_s }
    }
}
