//! Corpus preparation: sustain-pedal extension, clip splitting, random
//! segment crops, and data augmentation.
//!
//! The pipeline order is pedal extension, then clip split, then
//! augmentation, then quantization. Stretching therefore acts on continuous
//! time.

mod augment;
mod manifest;

pub use augment::{
    enumerate_augmentations, time_stretch, transpose, AugmentationMode, AugmentationPolicy,
    Combination, LESS_STRETCHES, LESS_TRANSPOSITIONS, MORE_STRETCH_RANGE, MORE_TRANSPOSITIONS,
};
pub use manifest::{
    heldout_split, Manifest, ManifestClip, ManifestEntry, Split, DEFAULT_SEGMENT_LEN_S,
};

use crate::midi_io::{self, sort_notes, MidiError, PedalInterval, PerfNote};
use rand::Rng;
use std::path::PathBuf;
use thiserror::Error;

/// Longest clip the corpus pipeline produces.
pub const CLIP_LEN_S: f64 = 30.0;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("segment of {seg_len_s} s does not fit in a clip of {duration_s} s")]
    SegmentTooLong { seg_len_s: f64, duration_s: f64 },
    #[error("stretch factor {0} outside [0.5, 2.0]")]
    FactorOutOfRange(f64),
    #[error("clip length must be positive, got {0}")]
    InvalidClipLength(f64),
    #[error("{path}: {source}")]
    Midi { path: PathBuf, source: MidiError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
}

/// A stretch of performance with note times relative to its start.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub source: String,
    pub index: usize,
    pub notes: Vec<PerfNote>,
    pub duration_s: f64,
}

impl Clip {
    pub fn new(notes: Vec<PerfNote>, duration_s: f64) -> Self {
        Self {
            source: String::new(),
            index: 0,
            notes,
            duration_s,
        }
    }

    /// Notes with onset in `[start, start + len)`, truncated at the window
    /// end and shifted to the window start.
    fn window(&self, start: f64, len: f64) -> Clip {
        Clip {
            source: self.source.clone(),
            index: self.index,
            notes: window_notes(&self.notes, start, start + len),
            duration_s: len,
        }
    }
}

fn window_notes(notes: &[PerfNote], start: f64, end: f64) -> Vec<PerfNote> {
    notes
        .iter()
        .filter(|n| n.onset_s >= start && n.onset_s < end)
        .filter_map(|n| {
            let note = PerfNote::new(
                n.pitch,
                n.onset_s - start,
                n.offset_s.min(end) - start,
                n.velocity,
            );
            (note.offset_s > note.onset_s).then_some(note)
        })
        .collect()
}

/// Delays each note-off that falls while the sustain pedal is down until the
/// pedal is released.
///
/// A note whose release lands in `[on, off)` of a pedal interval is held to
/// `off`. If that would run into a later strike of the same pitch, the held
/// note ends at the restrike instead. A pedal never released holds notes to
/// the last release in the list.
pub fn extend_with_pedal(notes: &[PerfNote], pedals: &[PedalInterval]) -> Vec<PerfNote> {
    let last_release = notes.iter().map(|n| n.offset_s).fold(0.0, f64::max);
    let mut out: Vec<PerfNote> = notes
        .iter()
        .map(|n| {
            let i = pedals.partition_point(|p| p.on_s <= n.offset_s);
            let mut note = *n;
            if let Some(p) = i.checked_sub(1).map(|i| pedals[i]) {
                if n.offset_s < p.off_s {
                    let release = if p.off_s.is_finite() {
                        p.off_s
                    } else {
                        last_release
                    };
                    note.offset_s = note.offset_s.max(release);
                }
            }
            note
        })
        .collect();

    // Restrike truncation, per pitch in onset order.
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        out[a]
            .pitch
            .cmp(&out[b].pitch)
            .then(out[a].onset_s.total_cmp(&out[b].onset_s))
    });
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if out[a].pitch == out[b].pitch && out[a].offset_s > out[b].onset_s {
            out[a].offset_s = out[b].onset_s.max(notes[a].offset_s);
        }
    }
    out
}

/// Partitions a performance into consecutive clips of `clip_len_s`.
///
/// A note belongs to the clip containing its onset and is truncated at that
/// clip's end. The final clip may be shorter. Clips without notes are kept so
/// indices stay aligned with time.
pub fn split_clips(notes: &[PerfNote], clip_len_s: f64) -> Result<Vec<Clip>, PreprocessError> {
    if !(clip_len_s > 0.0 && clip_len_s.is_finite()) {
        return Err(PreprocessError::InvalidClipLength(clip_len_s));
    }
    let end = notes.iter().map(|n| n.offset_s).fold(0.0, f64::max);
    if notes.is_empty() || end <= 0.0 {
        return Ok(Vec::new());
    }
    let count = (end / clip_len_s).ceil().max(1.0) as usize;
    let mut sorted = notes.to_vec();
    sort_notes(&mut sorted);
    Ok((0..count)
        .map(|i| {
            let start = i as f64 * clip_len_s;
            let stop = ((i + 1) as f64 * clip_len_s).min(end);
            let mut clip = Clip::new(window_notes(&sorted, start, start + clip_len_s), stop - start);
            clip.index = i;
            clip
        })
        .collect())
}

/// Picks a window of `seg_len_s` uniformly inside the clip.
pub fn crop_segment<R: Rng + ?Sized>(
    clip: &Clip,
    seg_len_s: f64,
    rng: &mut R,
) -> Result<Clip, PreprocessError> {
    if seg_len_s > clip.duration_s || seg_len_s <= 0.0 {
        return Err(PreprocessError::SegmentTooLong {
            seg_len_s,
            duration_s: clip.duration_s,
        });
    }
    let slack = clip.duration_s - seg_len_s;
    let start = if slack > 0.0 {
        rng.random_range(0.0..=slack)
    } else {
        0.0
    };
    Ok(clip.window(start, seg_len_s))
}

/// The window a deterministic evaluation uses: the clip's first `seg_len_s`
/// seconds (or the whole clip if shorter).
pub fn leading_segment(clip: &Clip, seg_len_s: f64) -> Clip {
    if seg_len_s >= clip.duration_s {
        clip.clone()
    } else {
        clip.window(0.0, seg_len_s)
    }
}

/// Reads one MIDI file into its non-empty clips.
pub fn clips_from_smf(
    bytes: &[u8],
    source: &str,
    clip_len_s: f64,
    extend_pedal: bool,
) -> Result<Vec<Clip>, PreprocessError> {
    let file = midi_io::parse_smf(bytes).map_err(|source_err| PreprocessError::Midi {
        path: PathBuf::from(source),
        source: source_err,
    })?;
    let perf = midi_io::extract_performance(&file);
    let notes = if extend_pedal {
        extend_with_pedal(&perf.notes, &perf.pedals)
    } else {
        perf.notes
    };
    let mut clips = split_clips(&notes, clip_len_s)?;
    clips.retain(|c| !c.notes.is_empty());
    for c in &mut clips {
        c.source = source.to_string();
    }
    Ok(clips)
}
