use super::{
    sort_notes, ChannelMessage, MidiFile, PedalInterval, PerfNote, PEDAL_THRESHOLD,
    SUSTAIN_CONTROLLER,
};

/// Counts of irregularities repaired while extracting a performance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractDiagnostics {
    /// Note-offs with no sounding note of that pitch; dropped.
    pub dangling_note_offs: usize,
    /// Note-ons never released; closed at the end of the file.
    pub unclosed_notes: usize,
    /// Note-ons for a pitch already sounding; the earlier note is closed.
    pub restrikes: usize,
    /// Notes (or pedal presses) that would have zero duration; dropped.
    pub zero_length_dropped: usize,
}

impl ExtractDiagnostics {
    pub fn total(&self) -> usize {
        self.dangling_note_offs + self.unclosed_notes + self.restrikes + self.zero_length_dropped
    }
}

/// Notes and sustain pedal of one performance, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Performance {
    /// Sorted by onset, then pitch.
    pub notes: Vec<PerfNote>,
    pub pedals: Vec<PedalInterval>,
    /// Time of the last event in the file, end-of-track included.
    pub end_s: f64,
    pub diagnostics: ExtractDiagnostics,
}

/// Converts a parsed file into absolute-time notes and pedal intervals.
///
/// Never fails: irregular input is repaired and counted in
/// [`ExtractDiagnostics`].
pub fn extract_performance(file: &MidiFile) -> Performance {
    let mut merged: Vec<(u64, usize, usize, ChannelMessage)> = file
        .tracks
        .iter()
        .enumerate()
        .flat_map(|(ti, track)| {
            track
                .events
                .iter()
                .enumerate()
                .map(move |(ei, ev)| (ev.tick, ti, ei, ev.message))
        })
        .collect();
    merged.sort_by_key(|&(tick, ti, ei, _)| (tick, ti, ei));

    let end_tick = file
        .tracks
        .iter()
        .map(|t| t.end_tick)
        .chain(merged.last().map(|e| e.0))
        .max()
        .unwrap_or(0);
    let tempo = &file.tempo_map;
    let end_s = tempo.seconds(end_tick);

    let mut diag = ExtractDiagnostics::default();
    let mut open: [Option<(f64, u8)>; 128] = [None; 128];
    let mut pedal_on: Option<f64> = None;
    let mut notes = Vec::new();
    let mut pedals = Vec::new();

    let close = |notes: &mut Vec<PerfNote>,
                     diag: &mut ExtractDiagnostics,
                     pitch: u8,
                     (onset, velocity): (f64, u8),
                     at: f64| {
        if at > onset {
            notes.push(PerfNote::new(pitch, onset, at, velocity));
        } else {
            diag.zero_length_dropped += 1;
        }
    };

    for (tick, _, _, message) in merged {
        let t = tempo.seconds(tick);
        match message {
            ChannelMessage::NoteOn { key, velocity, .. } if velocity > 0 => {
                if let Some(prev) = open[key as usize].take() {
                    diag.restrikes += 1;
                    close(&mut notes, &mut diag, key, prev, t);
                }
                open[key as usize] = Some((t, velocity));
            }
            ChannelMessage::NoteOn { key, .. } | ChannelMessage::NoteOff { key, .. } => {
                match open[key as usize].take() {
                    Some(prev) => close(&mut notes, &mut diag, key, prev, t),
                    None => diag.dangling_note_offs += 1,
                }
            }
            ChannelMessage::ControlChange {
                controller, value, ..
            } if controller == SUSTAIN_CONTROLLER => {
                if value >= PEDAL_THRESHOLD {
                    pedal_on.get_or_insert(t);
                } else if let Some(on) = pedal_on.take() {
                    if t > on {
                        pedals.push(PedalInterval::new(on, t));
                    } else {
                        diag.zero_length_dropped += 1;
                    }
                }
            }
            _ => {}
        }
    }

    for (pitch, slot) in open.iter_mut().enumerate() {
        if let Some(prev) = slot.take() {
            diag.unclosed_notes += 1;
            close(&mut notes, &mut diag, pitch as u8, prev, end_s);
        }
    }
    if let Some(on) = pedal_on {
        pedals.push(PedalInterval::new(on, f64::INFINITY));
    }

    sort_notes(&mut notes);
    Performance {
        notes,
        pedals,
        end_s,
        diagnostics: diag,
    }
}
