use super::{EventSequence, PerformanceEvent, QuantizationConfig, SequenceMeta, VocabError};
use crate::midi_io::{sort_notes, PerfNote};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("note-off for pitch {pitch} at event {position} with no sounding note")]
    UnmatchedNoteOff { pitch: u8, position: usize },
    #[error("pitch {pitch} still sounding at end of sequence")]
    UnclosedNoteAtEnd { pitch: u8 },
    #[error("note-on for already sounding pitch {pitch} at event {position}")]
    RestrikeOfOpenPitch { pitch: u8, position: usize },
    #[error("pitch {pitch} released at its onset (event {position})")]
    ZeroLengthNote { pitch: u8, position: usize },
}

/// Repairs applied by a lenient decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeRepairs {
    pub unmatched_offs_dropped: usize,
    pub open_notes_closed: usize,
    pub restrikes: usize,
    pub zero_length_dropped: usize,
}

impl DecodeRepairs {
    pub fn total(&self) -> usize {
        self.unmatched_offs_dropped
            + self.open_notes_closed
            + self.restrikes
            + self.zero_length_dropped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPerformance {
    /// Sorted by onset, then pitch.
    pub notes: Vec<PerfNote>,
    /// Cursor time after the last event.
    pub end_s: f64,
    pub repairs: DecodeRepairs,
}

struct Quantized {
    pitch: u8,
    on: u64,
    off: u64,
    bin: u8,
}

/// Encodes a note list as a performance event sequence.
///
/// Times snap to the nearest step. At each occupied step the order is: all
/// note-offs by ascending pitch, then note-ons grouped by velocity bin
/// (ascending), pitches ascending within a group. A velocity event precedes
/// a group only when the bin differs from the running state; the first
/// note-on always gets one. Notes that collapse to zero length are held for
/// one step.
pub fn encode(notes: &[PerfNote], cfg: &QuantizationConfig) -> EventSequence {
    let mut quantized: Vec<Quantized> = notes
        .iter()
        .map(|n| {
            let on = cfg.seconds_to_step(n.onset_s);
            let off = cfg.seconds_to_step(n.offset_s).max(on + 1);
            let bin = if cfg.has_velocity() {
                cfg.velocity_to_bin(n.velocity.clamp(1, 127)).unwrap_or(0)
            } else {
                0
            };
            Quantized {
                pitch: n.pitch.min(127),
                on,
                off,
                bin,
            }
        })
        .collect();

    // Rounding and zero-length extension can make same-pitch notes collide.
    quantized.sort_by_key(|q| (q.pitch, q.on));
    let mut keep = vec![true; quantized.len()];
    for i in 1..quantized.len() {
        if quantized[i].pitch == quantized[i - 1].pitch && quantized[i - 1].off > quantized[i].on {
            quantized[i - 1].off = quantized[i].on;
            if quantized[i - 1].off <= quantized[i - 1].on {
                keep[i - 1] = false;
            }
        }
    }

    // (step, 0 = off / 1 = on, bin, pitch)
    let mut slots: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(quantized.len() * 2);
    for (q, _) in quantized.iter().zip(&keep).filter(|(_, k)| **k) {
        slots.push((q.on, 1, q.bin, q.pitch));
        slots.push((q.off, 0, 0, q.pitch));
    }
    slots.sort_unstable();

    let mut events = Vec::with_capacity(slots.len() * 2);
    let mut push = |e: PerformanceEvent| {
        events.push(
            cfg.event_to_index(e)
                .expect("encoder only emits in-range events"),
        )
    };
    let mut cursor = 0u64;
    let mut velocity_state: Option<u8> = None;
    for (step, kind, bin, pitch) in slots {
        let mut gap = step - cursor;
        while gap > 0 {
            let shift = gap.min(cfg.max_shift_steps as u64);
            push(PerformanceEvent::TimeShift(shift as u16));
            gap -= shift;
        }
        cursor = step;
        if kind == 0 {
            push(PerformanceEvent::NoteOff(pitch));
        } else {
            if cfg.has_velocity() && velocity_state != Some(bin) {
                push(PerformanceEvent::VelocityBin(bin));
                velocity_state = Some(bin);
            }
            push(PerformanceEvent::NoteOn(pitch));
        }
    }

    EventSequence {
        events,
        meta: SequenceMeta {
            source: String::new(),
            duration_s: cfg.step_to_seconds(cursor),
        },
    }
}

/// Decodes an event sequence back into notes.
///
/// The cursor starts at time zero in the default velocity bin. In strict
/// mode any inconsistency is an error; otherwise it is repaired: unmatched
/// note-offs are dropped, a restruck pitch is released first, notes still
/// sounding at the end are closed there, and notes that would have zero
/// length are dropped.
pub fn decode(
    seq: &EventSequence,
    cfg: &QuantizationConfig,
    strict: bool,
) -> Result<DecodedPerformance, DecodeError> {
    let mut repairs = DecodeRepairs::default();
    let mut open: [Option<(u64, u8)>; 128] = [None; 128];
    let mut notes = Vec::new();
    let mut cursor = 0u64;
    let mut velocity = cfg.default_velocity();

    let close = |notes: &mut Vec<PerfNote>, repairs: &mut DecodeRepairs, pitch, on, vel, at| {
        if at > on {
            notes.push(PerfNote::new(
                pitch,
                cfg.step_to_seconds(on),
                cfg.step_to_seconds(at),
                vel,
            ));
        } else {
            repairs.zero_length_dropped += 1;
        }
    };

    for (position, &index) in seq.events.iter().enumerate() {
        match cfg.index_to_event(index)? {
            PerformanceEvent::TimeShift(steps) => cursor += steps as u64,
            PerformanceEvent::VelocityBin(bin) => velocity = cfg.bin_to_velocity(bin)?,
            PerformanceEvent::NoteOn(pitch) => {
                if let Some((on, vel)) = open[pitch as usize].take() {
                    if strict {
                        return Err(DecodeError::RestrikeOfOpenPitch { pitch, position });
                    }
                    repairs.restrikes += 1;
                    close(&mut notes, &mut repairs, pitch, on, vel, cursor);
                }
                open[pitch as usize] = Some((cursor, velocity));
            }
            PerformanceEvent::NoteOff(pitch) => match open[pitch as usize].take() {
                Some((on, _)) if strict && on == cursor => {
                    return Err(DecodeError::ZeroLengthNote { pitch, position });
                }
                Some((on, vel)) => close(&mut notes, &mut repairs, pitch, on, vel, cursor),
                None if strict => return Err(DecodeError::UnmatchedNoteOff { pitch, position }),
                None => repairs.unmatched_offs_dropped += 1,
            },
        }
    }

    for (pitch, slot) in open.iter_mut().enumerate() {
        if let Some((on, vel)) = slot.take() {
            if strict {
                return Err(DecodeError::UnclosedNoteAtEnd { pitch: pitch as u8 });
            }
            repairs.open_notes_closed += 1;
            close(&mut notes, &mut repairs, pitch as u8, on, vel, cursor);
        }
    }

    sort_notes(&mut notes);
    Ok(DecodedPerformance {
        notes,
        end_s: cfg.step_to_seconds(cursor),
        repairs,
    })
}
