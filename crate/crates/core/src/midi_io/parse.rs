use super::{
    ChannelMessage, MidiError, MidiFile, SmfFormat, TempoChange, TempoMap, Track, TrackEvent,
};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity: at most four bytes, seven bits each.
    fn vlq(&mut self) -> Result<Option<u32>, ()> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let Some(b) = self.u8() else {
                return Ok(None);
            };
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(Some(value));
            }
        }
        Err(())
    }
}

/// Parses a Standard MIDI File (format 0 or 1, metrical division).
///
/// Running status is honoured. Meta events other than tempo and end-of-track,
/// sysex events, and unknown chunk types are skipped.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiFile, MidiError> {
    let mut cur = Cursor::new(bytes);
    let magic = cur
        .take(4)
        .ok_or_else(|| MidiError::MalformedHeader("file shorter than chunk id".into()))?;
    if magic != b"MThd" {
        return Err(MidiError::MalformedHeader(format!(
            "expected \"MThd\", found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let header_len = cur
        .u32()
        .ok_or_else(|| MidiError::MalformedHeader("missing header length".into()))?
        as usize;
    if header_len < 6 {
        return Err(MidiError::MalformedHeader(format!(
            "header length {header_len} < 6"
        )));
    }
    let header = cur
        .take(header_len)
        .ok_or_else(|| MidiError::TruncatedChunk("header chunk".into()))?;
    let format_code = u16::from_be_bytes([header[0], header[1]]);
    let ntracks = u16::from_be_bytes([header[2], header[3]]) as usize;
    let division = u16::from_be_bytes([header[4], header[5]]);

    let format = match format_code {
        0 => SmfFormat::SingleTrack,
        1 => SmfFormat::MultiTrack,
        other => return Err(MidiError::UnsupportedFormat(other)),
    };
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedDivision);
    }
    if division == 0 {
        return Err(MidiError::MalformedHeader("division is zero".into()));
    }

    let mut tracks = Vec::with_capacity(ntracks);
    let mut tempos = Vec::new();
    while tracks.len() < ntracks {
        let id = cur.take(4).ok_or_else(|| {
            MidiError::TruncatedChunk(format!(
                "expected {ntracks} tracks, found {}",
                tracks.len()
            ))
        })?;
        let len = cur
            .u32()
            .ok_or_else(|| MidiError::TruncatedChunk("chunk length".into()))?
            as usize;
        let body = cur.take(len).ok_or_else(|| {
            MidiError::TruncatedChunk(format!(
                "chunk declares {len} bytes, {} remain",
                cur.remaining()
            ))
        })?;
        if id != b"MTrk" {
            // Alien chunk; the SMF format requires readers to skip these.
            continue;
        }
        tracks.push(parse_track(body, tracks.len(), &mut tempos)?);
    }

    Ok(MidiFile {
        format,
        division,
        tracks,
        tempo_map: TempoMap::new(division, tempos),
    })
}

fn data_bytes(status: u8) -> usize {
    match status & 0xf0 {
        0xc0 | 0xd0 => 1,
        _ => 2,
    }
}

fn parse_track(
    body: &[u8],
    index: usize,
    tempos: &mut Vec<TempoChange>,
) -> Result<Track, MidiError> {
    let mut cur = Cursor::new(body);
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut events = Vec::new();
    let truncated = |what: &str| MidiError::TruncatedChunk(format!("track {index}: {what}"));
    let malformed = |offset: usize, reason: &str| MidiError::MalformedEvent {
        track: index,
        offset,
        reason: reason.to_string(),
    };

    while cur.remaining() > 0 {
        let at = cur.pos;
        let delta = cur
            .vlq()
            .map_err(|_| malformed(at, "delta time longer than 4 bytes"))?
            .ok_or_else(|| truncated("delta time"))?;
        tick += delta as u64;

        let lead = cur.u8().ok_or_else(|| truncated("event status"))?;
        match lead {
            0xff => {
                running = None;
                let kind = cur.u8().ok_or_else(|| truncated("meta type"))?;
                let len = cur
                    .vlq()
                    .map_err(|_| malformed(at, "meta length longer than 4 bytes"))?
                    .ok_or_else(|| truncated("meta length"))? as usize;
                let data = cur.take(len).ok_or_else(|| truncated("meta data"))?;
                match kind {
                    0x2f => return Ok(Track { events, end_tick: tick }),
                    0x51 if len == 3 => {
                        let micros = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if micros > 0 {
                            tempos.push(TempoChange {
                                tick,
                                micros_per_quarter: micros,
                            });
                        }
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = cur
                    .vlq()
                    .map_err(|_| malformed(at, "sysex length longer than 4 bytes"))?
                    .ok_or_else(|| truncated("sysex length"))? as usize;
                cur.take(len).ok_or_else(|| truncated("sysex data"))?;
            }
            0xf1..=0xfe => return Err(malformed(at, "system message inside a track")),
            _ => {
                let (status, first) = if lead & 0x80 != 0 {
                    running = Some(lead);
                    (lead, cur.u8().ok_or_else(|| truncated("channel data"))?)
                } else {
                    let status =
                        running.ok_or_else(|| malformed(at, "data byte without running status"))?;
                    (status, lead)
                };
                let second = if data_bytes(status) == 2 {
                    cur.u8().ok_or_else(|| truncated("channel data"))?
                } else {
                    0
                };
                if first & 0x80 != 0 || second & 0x80 != 0 {
                    return Err(malformed(at, "status byte where data byte expected"));
                }
                let channel = status & 0x0f;
                let message = match status & 0xf0 {
                    0x90 => ChannelMessage::NoteOn {
                        channel,
                        key: first,
                        velocity: second,
                    },
                    0x80 => ChannelMessage::NoteOff {
                        channel,
                        key: first,
                        velocity: second,
                    },
                    0xb0 => ChannelMessage::ControlChange {
                        channel,
                        controller: first,
                        value: second,
                    },
                    _ => ChannelMessage::Other {
                        status,
                        data: [first, second],
                    },
                };
                events.push(TrackEvent { tick, message });
            }
        }
    }
    // No end-of-track meta; tolerated.
    Ok(Track {
        events,
        end_tick: tick,
    })
}
