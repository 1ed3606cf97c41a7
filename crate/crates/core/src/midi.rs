//! Standard MIDI File input and output, reduced to what slicing needs.
//!
//! Reading turns an SMF (format 0 or 1) into a flat, sorted list of
//! [`NoteEvent`]s plus a [`BeatGrid`] taken from the PPQ header. One beat is
//! one quarter note; tempo meta events are read past but never affect the
//! grid, since slices are metrical and live in ticks.
//!
//! Writing produces a single-track format 0 file from a list of notes. It is
//! used by the generator and by the synthetic corpus builder.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::ops::Range;

use thiserror::Error;

/// General MIDI reserves channel 10 (index 9) for percussion.
pub const PERCUSSION_CHANNEL: u8 = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed header at byte {offset}: {reason}")]
    BadHeader { offset: usize, reason: &'static str },
    #[error("truncated input at byte {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("unsupported SMF format {0} (only 0 and 1 are read)")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division is not supported (no quarter-note beat)")]
    SmpteTiming,
    #[error("invalid event byte {byte:#04x} at byte {offset}")]
    BadEvent { offset: usize, byte: u8 },
    #[error("beat {beat} out of range for a piece of {length} beats")]
    BeatOutOfRange { beat: u64, length: u64 },
}

/// One sounding note with a half-open tick interval `[onset, offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_ticks: u64,
    pub offset_ticks: u64,
    pub channel: u8,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset_ticks: u64, offset_ticks: u64, channel: u8) -> Self {
        debug_assert!(pitch <= 127 && channel <= 15 && offset_ticks > onset_ticks);
        NoteEvent {
            pitch,
            onset_ticks,
            offset_ticks,
            channel,
        }
    }

    fn sort_key(&self) -> (u64, u8, u8, u64) {
        (self.onset_ticks, self.pitch, self.channel, self.offset_ticks)
    }
}

/// Quarter-note beats laid over the tick axis.
///
/// Beat `b` covers ticks `[b * ticks_per_beat, (b + 1) * ticks_per_beat)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeatGrid {
    pub ticks_per_beat: u16,
    pub piece_length_beats: u64,
}

impl BeatGrid {
    pub fn beat_span(&self, beat: u64) -> Range<u64> {
        let tpb = u64::from(self.ticks_per_beat);
        beat * tpb..(beat + 1) * tpb
    }

    /// Beats whose span intersects the note, clipped to the grid.
    pub fn beats_of(&self, note: &NoteEvent) -> Range<u64> {
        let tpb = u64::from(self.ticks_per_beat);
        let first = note.onset_ticks / tpb;
        let last = (note.offset_ticks - 1) / tpb;
        first.min(self.piece_length_beats)..(last + 1).min(self.piece_length_beats)
    }
}

/// A parsed file: merged non-percussion notes, the grid, and how many
/// note-ons had to be closed at end of track.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MidiPiece {
    pub events: Vec<NoteEvent>,
    pub grid: BeatGrid,
    pub unclosed_notes: usize,
}

impl MidiPiece {
    /// Sounding pitches for every beat of the piece.
    pub fn beat_pitch_sets(&self) -> Vec<BTreeSet<u8>> {
        let mut beats = vec![BTreeSet::new(); self.grid.piece_length_beats as usize];
        for note in &self.events {
            for b in self.grid.beats_of(note) {
                beats[b as usize].insert(note.pitch);
            }
        }
        beats
    }
}

/// Pitches whose `[onset, offset)` interval intersects the given beat.
///
/// A note released exactly on a beat boundary does not sound in the beat
/// that starts there.
pub fn sounding_pitches(
    events: &[NoteEvent],
    grid: &BeatGrid,
    beat: u64,
) -> Result<BTreeSet<u8>, MidiError> {
    if beat >= grid.piece_length_beats {
        return Err(MidiError::BeatOutOfRange {
            beat,
            length: grid.piece_length_beats,
        });
    }
    let span = grid.beat_span(beat);
    Ok(events
        .iter()
        .filter(|e| e.onset_ticks < span.end && e.offset_ticks > span.start)
        .map(|e| e.pitch)
        .collect())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], MidiError> {
        if self.remaining() < n {
            return Err(MidiError::Truncated {
                offset: self.bytes.len(),
                what,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, MidiError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, MidiError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, MidiError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn vlq(&mut self, what: &'static str) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8(what)?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::BadEvent {
            offset: start,
            byte: self.bytes[start],
        })
    }

    fn data_byte(&mut self, what: &'static str) -> Result<u8, MidiError> {
        let offset = self.pos;
        let b = self.u8(what)?;
        if b & 0x80 != 0 {
            return Err(MidiError::BadEvent { offset, byte: b });
        }
        Ok(b)
    }
}

/// Parse an SMF (format 0 or 1) into merged note events and a beat grid.
///
/// Percussion (channel index 9) is dropped. Note-on with velocity 0 counts
/// as note-off. Repeated note-ons on the same key and channel are matched to
/// note-offs first-in first-out. A note still open at end of track is closed
/// there and counted in [`MidiPiece::unclosed_notes`]; zero-length notes are
/// discarded.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiPiece, MidiError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "header magic")?;
    if magic != b"MThd" {
        return Err(MidiError::BadHeader {
            offset: 0,
            reason: "missing MThd chunk id",
        });
    }
    let header_len = r.u32("header length")? as usize;
    if header_len < 6 {
        return Err(MidiError::BadHeader {
            offset: 4,
            reason: "header chunk shorter than 6 bytes",
        });
    }
    let format = r.u16("format")?;
    let declared_tracks = r.u16("track count")?;
    let division = r.u16("time division")?;
    r.take(header_len - 6, "header padding")?;
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::SmpteTiming);
    }
    if division == 0 {
        return Err(MidiError::BadHeader {
            offset: 12,
            reason: "zero ticks per quarter note",
        });
    }

    let mut events = Vec::new();
    let mut unclosed = 0;
    let mut end_tick = 0u64;
    let mut tracks_read = 0u16;
    while r.remaining() > 0 && tracks_read < declared_tracks {
        let chunk_start = r.pos;
        let id = r.take(4, "chunk id")?;
        let len = r.u32("chunk length")? as usize;
        let body = r.take(len, "track chunk")?;
        if id != b"MTrk" {
            continue;
        }
        let track = parse_track(body, chunk_start + 8)?;
        tracks_read += 1;
        end_tick = end_tick.max(track.end_tick);
        unclosed += track.unclosed;
        events.extend(track.notes);
    }
    if tracks_read < declared_tracks {
        return Err(MidiError::Truncated {
            offset: bytes.len(),
            what: "track chunks",
        });
    }

    events.sort_by_key(NoteEvent::sort_key);
    let tpb = u64::from(division);
    Ok(MidiPiece {
        events,
        grid: BeatGrid {
            ticks_per_beat: division,
            piece_length_beats: end_tick.div_ceil(tpb),
        },
        unclosed_notes: unclosed,
    })
}

struct Track {
    notes: Vec<NoteEvent>,
    end_tick: u64,
    unclosed: usize,
}

fn parse_track(body: &[u8], base_offset: usize) -> Result<Track, MidiError> {
    let mut r = Reader::new(body);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut open: HashMap<(u8, u8), VecDeque<u64>> = HashMap::new();
    let mut notes = Vec::new();
    // Offsets inside the chunk are rebased onto the whole file for errors.
    let rebase = |e: MidiError| match e {
        MidiError::BadEvent { offset, byte } => MidiError::BadEvent {
            offset: offset + base_offset,
            byte,
        },
        MidiError::Truncated { offset, what } => MidiError::Truncated {
            offset: offset + base_offset,
            what,
        },
        other => other,
    };

    while r.remaining() > 0 {
        tick += u64::from(r.vlq("delta time").map_err(rebase)?);
        let offset = r.pos;
        let first = r.u8("status").map_err(rebase)?;
        let status = if first & 0x80 != 0 {
            first
        } else {
            // Running status: the byte just read is the first data byte.
            r.pos -= 1;
            running.ok_or(MidiError::BadEvent {
                offset: offset + base_offset,
                byte: first,
            })?
        };
        match status {
            0xff => {
                running = None;
                let kind = r.u8("meta type").map_err(rebase)?;
                let len = r.vlq("meta length").map_err(rebase)? as usize;
                r.take(len, "meta data").map_err(rebase)?;
                if kind == 0x2f {
                    break;
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.vlq("sysex length").map_err(rebase)? as usize;
                r.take(len, "sysex data").map_err(rebase)?;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                match status & 0xf0 {
                    0x80 | 0x90 => {
                        let key = r.data_byte("note key").map_err(rebase)?;
                        let velocity = r.data_byte("note velocity").map_err(rebase)?;
                        if channel == PERCUSSION_CHANNEL {
                            continue;
                        }
                        let queue = open.entry((channel, key)).or_default();
                        if status & 0xf0 == 0x90 && velocity > 0 {
                            queue.push_back(tick);
                        } else if let Some(onset) = queue.pop_front() {
                            if tick > onset {
                                notes.push(NoteEvent::new(key, onset, tick, channel));
                            }
                        }
                    }
                    0xc0 | 0xd0 => {
                        r.data_byte("event data").map_err(rebase)?;
                    }
                    _ => {
                        r.data_byte("event data").map_err(rebase)?;
                        r.data_byte("event data").map_err(rebase)?;
                    }
                }
            }
            byte => {
                return Err(MidiError::BadEvent {
                    offset: offset + base_offset,
                    byte,
                })
            }
        }
    }

    let mut unclosed = 0;
    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort();
    for ((channel, key), onsets) in dangling {
        for onset in onsets {
            unclosed += 1;
            if tick > onset {
                notes.push(NoteEvent::new(key, onset, tick, channel));
            }
        }
    }
    if unclosed > 0 {
        log::warn!("{unclosed} note-on(s) without note-off closed at end of track");
    }
    Ok(Track {
        notes,
        end_tick: tick,
        unclosed,
    })
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
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

/// Serialize notes as a single-track SMF format 0 file.
///
/// Note-offs are written before note-ons at the same tick so that a key
/// released and re-struck on one tick reads back as two notes. The track
/// ends at `end_tick` or at the last note-off, whichever is later.
pub fn write_format0(ticks_per_beat: u16, notes: &[NoteEvent], end_tick: u64, velocity: u8) -> Vec<u8> {
    // (tick, 0 = off / 1 = on, channel, key)
    let mut timeline: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        timeline.push((n.onset_ticks, 1, n.channel, n.pitch));
        timeline.push((n.offset_ticks, 0, n.channel, n.pitch));
    }
    timeline.sort_unstable();

    let mut track = Vec::new();
    let mut now = 0u64;
    for (tick, on, channel, key) in timeline {
        push_vlq(&mut track, (tick - now) as u32);
        now = tick;
        if on == 1 {
            track.extend_from_slice(&[0x90 | channel, key, velocity.max(1)]);
        } else {
            track.extend_from_slice(&[0x80 | channel, key, 0]);
        }
    }
    push_vlq(&mut track, end_tick.saturating_sub(now) as u32);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&ticks_per_beat.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}
