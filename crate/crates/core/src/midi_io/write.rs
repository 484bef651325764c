use super::{PedalInterval, PerfNote, SUSTAIN_CONTROLLER};

/// Ticks per quarter note in written files.
pub const WRITE_DIVISION: u16 = 480;
/// Tempo of written files (120 bpm), giving 960 ticks per second.
pub const WRITE_TEMPO: u32 = 500_000;

const TICKS_PER_SECOND: f64 = WRITE_DIVISION as f64 * 1e6 / WRITE_TEMPO as f64;

fn to_tick(seconds: f64) -> u64 {
    (seconds * TICKS_PER_SECOND).round().max(0.0) as u64
}

fn push_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Writes notes (and optionally sustain pedal) as a format-0 SMF with
/// division 480 and a fixed 120 bpm tempo.
pub fn write_smf(notes: &[PerfNote], pedals: Option<&[PedalInterval]>) -> Vec<u8> {
    write_smf_until(notes, pedals, 0.0)
}

/// Like [`write_smf`], but places end-of-track no earlier than `end_s`, so
/// trailing silence survives.
pub fn write_smf_until(
    notes: &[PerfNote],
    pedals: Option<&[PedalInterval]>,
    end_s: f64,
) -> Vec<u8> {
    // (tick, rank, key, message). Rank orders events sharing a tick:
    // releases before presses.
    let mut events: Vec<(u64, u8, u8, [u8; 3])> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        let on = to_tick(n.onset_s);
        let off = to_tick(n.offset_s).max(on + 1);
        events.push((on, 3, n.pitch, [0x90, n.pitch, n.velocity]));
        events.push((off, 0, n.pitch, [0x80, n.pitch, 0]));
    }
    for p in pedals.unwrap_or_default() {
        let on = to_tick(p.on_s);
        events.push((on, 2, 0, [0xb0, SUSTAIN_CONTROLLER, 127]));
        if p.off_s.is_finite() {
            let off = to_tick(p.off_s).max(on + 1);
            events.push((off, 1, 0, [0xb0, SUSTAIN_CONTROLLER, 0]));
        }
    }
    events.sort_by_key(|e| (e.0, e.1, e.2));

    let mut track = Vec::with_capacity(events.len() * 4 + 16);
    track.extend([0x00, 0xff, 0x51, 0x03]);
    track.extend(&WRITE_TEMPO.to_be_bytes()[1..]);
    let mut last = 0u64;
    for (tick, _, _, msg) in &events {
        push_vlq(&mut track, (tick - last) as u32);
        track.extend(msg);
        last = *tick;
    }
    let end = to_tick(end_s).max(last);
    push_vlq(&mut track, (end - last) as u32);
    track.extend([0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend(b"MThd");
    out.extend(6u32.to_be_bytes());
    out.extend(0u16.to_be_bytes());
    out.extend(1u16.to_be_bytes());
    out.extend(WRITE_DIVISION.to_be_bytes());
    out.extend(b"MTrk");
    out.extend((track.len() as u32).to_be_bytes());
    out.extend(track);
    out
}
