//! Standard MIDI File reading and writing (formats 0 and 1).
//!
//! Only what the pipeline needs is decoded: note on/off pairs, tempo and time
//! signature meta events. Every other event is skipped by length.

use std::collections::{HashMap, VecDeque};

use super::note::{Note, NoteSequence, TempoEvent, DEFAULT_BPM};
use crate::error::{Error, Result};

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::MidiParse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn u8(&mut self) -> Result<u8> {
        match self.data.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => self.err("unexpected end of data"),
        }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return self.err(format!("truncated: need {n} bytes"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.bytes(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        self.err("variable-length quantity longer than 4 bytes")
    }
}

/// Result of reading a file, including non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedMidi {
    pub sequence: NoteSequence,
    pub warnings: Vec<String>,
}

/// Parse a Standard MIDI File into a sorted [`NoteSequence`]. Warnings are logged.
pub fn parse_midi(bytes: &[u8]) -> Result<NoteSequence> {
    let parsed = parse_midi_with_warnings(bytes)?;
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    Ok(parsed.sequence)
}

pub fn parse_midi_with_warnings(bytes: &[u8]) -> Result<ParsedMidi> {
    let mut r = Reader { data: bytes, pos: 0 };
    if r.bytes(4).ok() != Some(b"MThd".as_slice()) {
        r.pos = 0;
        return r.err("missing MThd header");
    }
    let header_len = r.u32()? as usize;
    if header_len < 6 {
        return r.err("header chunk shorter than 6 bytes");
    }
    let header_start = r.pos;
    let format = r.u16()?;
    let ntracks = r.u16()?;
    let division = r.u16()?;
    if format > 1 {
        r.pos = header_start;
        return r.err(format!("unsupported SMF format {format}"));
    }
    if division & 0x8000 != 0 {
        r.pos = header_start + 4;
        return r.err("SMPTE time division is not supported");
    }
    if division == 0 {
        r.pos = header_start + 4;
        return r.err("ticks per quarter must be positive");
    }
    r.pos = header_start + header_len;

    let mut notes = Vec::new();
    let mut tempos = Vec::new();
    let mut warnings = Vec::new();

    for track in 0..ntracks {
        let chunk_start = r.pos;
        let id = r.bytes(4)?;
        let len = r.u32()? as usize;
        if id != b"MTrk" {
            // Unknown chunks are skipped per the SMF convention.
            r.bytes(len)?;
            if r.pos > bytes.len() {
                r.pos = chunk_start;
                return r.err("truncated chunk");
            }
            continue;
        }
        let end = r.pos + len;
        if end > bytes.len() {
            r.pos = chunk_start + 4;
            return r.err(format!("track {track} length {len} exceeds file size"));
        }
        let mut tr = Reader {
            data: &bytes[..end],
            pos: r.pos,
        };
        read_track(&mut tr, track, &mut notes, &mut tempos, &mut warnings)?;
        r.pos = end;
    }

    if tempos.is_empty() {
        tempos.push(TempoEvent {
            tick: 0,
            bpm: DEFAULT_BPM,
        });
    }
    Ok(ParsedMidi {
        sequence: NoteSequence::new(notes, division as u32, tempos),
        warnings,
    })
}

fn read_track(
    r: &mut Reader<'_>,
    track: u16,
    notes: &mut Vec<Note>,
    tempos: &mut Vec<TempoEvent>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    let mut pending: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();

    while r.pos < r.data.len() {
        tick += r.vlq()? as u64;
        let event_pos = r.pos;
        let mut status = r.u8()?;
        let first_data = if status < 0x80 {
            match running {
                Some(s) => {
                    let d = status;
                    status = s;
                    Some(d)
                }
                None => {
                    r.pos = event_pos;
                    return r.err("data byte without running status");
                }
            }
        } else {
            None
        };

        match status {
            0xff => {
                let kind = r.u8()?;
                let len = r.vlq()? as usize;
                let data = r.bytes(len)?;
                match kind {
                    0x2f => break,
                    0x51 if len == 3 => {
                        let micros = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if micros > 0 {
                            tempos.push(TempoEvent {
                                tick,
                                bpm: 60_000_000.0 / micros as f64,
                            });
                        }
                    }
                    0x58 if len >= 2 => {
                        let numerator = data[0];
                        let denominator = 1u32 << data[1].min(31);
                        if (numerator, denominator) != (4, 4) {
                            return Err(Error::UnsupportedMeter {
                                numerator,
                                denominator,
                            });
                        }
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                let len = r.vlq()? as usize;
                r.bytes(len)?;
                running = None;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let a = match first_data {
                    Some(d) => d,
                    None => r.u8()?,
                };
                let kind = status & 0xf0;
                let b = if matches!(kind, 0xc0 | 0xd0) { 0 } else { r.u8()? };
                if a > 127 || b > 127 {
                    r.pos = event_pos;
                    return r.err("channel message data byte above 127");
                }
                match kind {
                    0x90 if b > 0 => pending.entry((channel, a)).or_default().push_back((tick, b)),
                    0x80 | 0x90 => {
                        if let Some((onset, vel)) = pending.get_mut(&(channel, a)).and_then(|q| q.pop_front()) {
                            notes.push(Note::new(a, onset, (tick - onset).max(1), vel));
                        }
                    }
                    _ => {}
                }
            }
            _ => {
                r.pos = event_pos;
                return r.err(format!("unexpected status byte 0x{status:02x}"));
            }
        }
    }

    let mut dangling: Vec<_> = pending
        .into_iter()
        .flat_map(|((_, pitch), q)| q.into_iter().map(move |(onset, vel)| (pitch, onset, vel)))
        .collect();
    dangling.sort_unstable();
    for (pitch, onset, vel) in dangling {
        warnings.push(format!(
            "track {track}: note {pitch} at tick {onset} has no note-off; terminated at end of track (tick {tick})"
        ));
        notes.push(Note::new(pitch, onset, tick.saturating_sub(onset).max(1), vel));
    }
    Ok(())
}

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7f) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Encode a sequence as a format-0 file on channel 0 with a 4/4 signature.
pub fn write_midi(seq: &NoteSequence) -> Vec<u8> {
    // (tick, order, bytes): note-offs sort before note-ons on the same tick.
    let mut events: Vec<(u64, u8, Vec<u8>)> = Vec::new();
    events.push((0, 0, vec![0xff, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08]));
    let tempos = if seq.tempo_events.is_empty() {
        vec![TempoEvent {
            tick: 0,
            bpm: DEFAULT_BPM,
        }]
    } else {
        seq.tempo_events.clone()
    };
    for t in &tempos {
        let micros = (60_000_000.0 / t.bpm).round().clamp(1.0, 16_777_215.0) as u32;
        let b = micros.to_be_bytes();
        events.push((t.tick, 1, vec![0xff, 0x51, 0x03, b[1], b[2], b[3]]));
    }
    for n in seq.notes() {
        events.push((n.onset, 3, vec![0x90, n.pitch, n.velocity]));
        events.push((n.end(), 2, vec![0x80, n.pitch, 0]));
    }
    events.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut track = Vec::new();
    let mut last = 0u64;
    for (tick, _, data) in &events {
        write_vlq(&mut track, (tick - last) as u32);
        track.extend_from_slice(data);
        last = *tick;
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(seq.ticks_per_quarter as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(tpq: u16, track: &[u8]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&[0, 0, 0, 1]);
        out.extend_from_slice(&tpq.to_be_bytes());
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(track.len() as u32).to_be_bytes());
        out.extend_from_slice(track);
        out
    }

    #[test]
    fn single_note() {
        // note-on C4 vel 80 at 0, note-off at 480 (delta 0x83 0x60)
        let bytes = file(480, &[0x00, 0x90, 60, 80, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xff, 0x2f, 0x00]);
        let seq = parse_midi(&bytes).unwrap();
        assert_eq!(seq.notes(), &[Note::new(60, 0, 480, 80)]);
        assert_eq!(seq.ticks_per_quarter, 480);
    }

    #[test]
    fn running_status_and_velocity_zero_off() {
        let bytes = file(96, &[0x00, 0x90, 60, 80, 0x60, 60, 0, 0x00, 62, 90, 0x30, 62, 0, 0x00, 0xff, 0x2f, 0x00]);
        let seq = parse_midi(&bytes).unwrap();
        assert_eq!(seq.notes(), &[Note::new(60, 0, 96, 80), Note::new(62, 96, 48, 90)]);
    }

    #[test]
    fn dangling_note_is_terminated_at_track_end() {
        let bytes = file(480, &[0x00, 0x90, 64, 70, 0x83, 0x60, 0xff, 0x2f, 0x00]);
        let parsed = parse_midi_with_warnings(&bytes).unwrap();
        assert_eq!(parsed.sequence.notes(), &[Note::new(64, 0, 480, 70)]);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn three_four_is_rejected() {
        let bytes = file(480, &[0x00, 0xff, 0x58, 0x04, 0x03, 0x02, 0x18, 0x08, 0x00, 0xff, 0x2f, 0x00]);
        assert!(matches!(
            parse_midi(&bytes),
            Err(Error::UnsupportedMeter { numerator: 3, denominator: 4 })
        ));
    }

    #[test]
    fn malformed_header_reports_offset() {
        match parse_midi(b"MThx\0\0\0\x06") {
            Err(Error::MidiParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("unexpected {other:?}"),
        }
        let mut bytes = file(480, &[0x00, 0x90, 60, 80, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xff, 0x2f, 0x00]);
        bytes.truncate(bytes.len() - 5);
        match parse_midi(&bytes) {
            Err(Error::MidiParse { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tempo_is_captured() {
        // 500000 us per quarter = 120 bpm; 400000 = 150 bpm
        let bytes = file(480, &[0x00, 0xff, 0x51, 0x03, 0x06, 0x1a, 0x80, 0x00, 0xff, 0x2f, 0x00]);
        let seq = parse_midi(&bytes).unwrap();
        assert_eq!(seq.tempo_events.len(), 1);
        assert!((seq.tempo_events[0].bpm - 150.0).abs() < 1e-9);
    }
}
