//! Seeded synthetic corpus of diatonic chord progressions.
//!
//! Each piece is a chain of cadential phrases in one key: a bass line on
//! chord roots, a sustained close-position triad and a melody that moves
//! through chord tones with occasional passing tones. The material is
//! entirely diatonic except for the raised leading tone on the minor-key
//! dominant.

use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{Key, Mode};
use crate::midi::{write_format0, BeatGrid, MidiPiece, NoteEvent};
use crate::slice::{PITCH_CLASS_NAMES, Slice};

pub const SYNTH_TICKS_PER_BEAT: u16 = 480;
pub const SYNTH_VELOCITY: u8 = 90;
const BASS_OCTAVE: u8 = 36;
const CHORD_OCTAVE: u8 = 60;
const MELODY_OCTAVE: u8 = 72;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Keys to generate; `None` means every root with modes alternating
    /// by piece index (even indices major, odd minor).
    pub keys: Option<Vec<Key>>,
    pub pieces_per_key: usize,
    pub beats_per_piece: u64,
    /// Probability that a melody beat carries a passing tone.
    pub passing_tone_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            keys: None,
            pieces_per_key: 4,
            beats_per_piece: 104,
            passing_tone_rate: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPiece {
    pub key: Key,
    pub index: usize,
    pub notes: Vec<NoteEvent>,
    pub length_beats: u64,
}

impl SynthPiece {
    /// `C-major_00.mid`, `F#-minor_03.mid`.
    pub fn file_name(&self) -> String {
        format!(
            "{}-{}_{:02}.mid",
            PITCH_CLASS_NAMES[self.key.root as usize], self.key.mode, self.index
        )
    }

    pub fn to_midi(&self) -> Vec<u8> {
        write_format0(
            SYNTH_TICKS_PER_BEAT,
            &self.notes,
            self.length_beats * u64::from(SYNTH_TICKS_PER_BEAT),
            SYNTH_VELOCITY,
        )
    }

    /// The piece as the parser would see it.
    pub fn as_midi_piece(&self) -> MidiPiece {
        let mut events = self.notes.clone();
        events.sort_by_key(|n| (n.onset_ticks, n.pitch, n.channel, n.offset_ticks));
        MidiPiece {
            events,
            grid: BeatGrid {
                ticks_per_beat: SYNTH_TICKS_PER_BEAT,
                piece_length_beats: self.length_beats,
            },
            unclosed_notes: 0,
        }
    }

    pub fn slices(&self) -> Vec<Slice> {
        crate::generator::piece_slices(&self.as_midi_piece())
    }
}

/// Recover the key from a synthetic file name.
pub fn key_from_file_name(name: &str) -> Option<Key> {
    let (root, rest) = name.split_once('-')?;
    let mode = rest.split(['_', '.']).next()?;
    let mode = Mode::from_str(mode).ok()?;
    let root = PITCH_CLASS_NAMES.iter().position(|&n| n == root)?;
    Some(Key::new(root as u8, mode))
}

const MAJOR_STEPS: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR_STEPS: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];

/// Phrase templates as scale degrees, with relative weights. Every phrase
/// opens on the tonic and closes with a dominant-tonic cadence.
const MAJOR_PHRASES: &[(&[usize], u32)] = &[
    (&[0, 3, 4, 0], 6),
    (&[0, 4, 0, 3, 4, 0], 4),
    (&[0, 1, 4, 0], 3),
    (&[0, 3, 0, 4, 0], 3),
    (&[0, 5, 3, 4, 0], 1),
    (&[0, 2, 3, 4, 0], 1),
];

const MINOR_PHRASES: &[(&[usize], u32)] = &[
    (&[0, 3, 4, 0], 6),
    (&[0, 4, 0, 3, 4, 0], 4),
    (&[0, 5, 3, 4, 0], 2),
    (&[0, 3, 0, 4, 0], 3),
    (&[0, 2, 5, 4, 0], 1),
];

fn steps(mode: Mode) -> [u8; 7] {
    match mode {
        Mode::Major => MAJOR_STEPS,
        Mode::Minor => MINOR_STEPS,
    }
}

/// Pitch classes of the triad on `degree`, root first.
fn triad(key: Key, degree: usize) -> [u8; 3] {
    let st = steps(key.mode);
    let mut pcs = [0, 2, 4].map(|k| (key.root + st[(degree + k) % 7]) % 12);
    if key.mode == Mode::Minor && degree == 4 {
        pcs[1] = (pcs[1] + 1) % 12;
    }
    pcs
}

/// Lowest MIDI pitch at or above `base` with pitch class `pc`.
fn place(base: u8, pc: u8) -> u8 {
    base + (pc + 12 - base % 12) % 12
}

/// Generate one piece.
pub fn synth_piece(key: Key, index: usize, config: &SynthConfig) -> SynthPiece {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stream = (index as u64) * 24 + u64::from(key.root) * 2 + (key.mode == Mode::Minor) as u64;
    rng.set_stream(stream);

    let phrases = match key.mode {
        Mode::Major => MAJOR_PHRASES,
        Mode::Minor => MINOR_PHRASES,
    };
    let pick = WeightedIndex::new(phrases.iter().map(|p| p.1)).expect("positive weights");
    let scale = steps(key.mode).map(|s| (key.root + s) % 12);
    let tpb = u64::from(SYNTH_TICKS_PER_BEAT);
    let half = tpb / 2;

    let mut notes = Vec::new();
    let mut beat = 0u64;
    let mut melody_prev = place(MELODY_OCTAVE, key.root);
    while beat < config.beats_per_piece {
        let (degrees, _) = phrases[pick.sample(&mut rng)];
        for (i, &degree) in degrees.iter().enumerate() {
            if beat >= config.beats_per_piece {
                break;
            }
            let last = i + 1 == degrees.len();
            let dur = if last { 2 } else { [1, 2, 2, 2, 4][rng.random_range(0..5)] };
            let dur = dur.min(config.beats_per_piece - beat);
            let chord = triad(key, degree);
            let (on, off) = (beat * tpb, (beat + dur) * tpb);

            notes.push(NoteEvent::new(place(BASS_OCTAVE, chord[0]), on, off, 1));
            for pc in chord {
                notes.push(NoteEvent::new(place(CHORD_OCTAVE, pc), on, off, 0));
            }
            for b in beat..beat + dur {
                let target = chord[rng.random_range(0..3)];
                let pitch = nearest_pitch(melody_prev, target);
                let start = b * tpb;
                if rng.random_bool(config.passing_tone_rate) {
                    let up = rng.random_bool(0.5);
                    let passing = scale_neighbour(pitch, &scale, up);
                    notes.push(NoteEvent::new(pitch, start, start + half, 2));
                    notes.push(NoteEvent::new(passing, start + half, start + tpb, 2));
                    melody_prev = passing;
                } else {
                    notes.push(NoteEvent::new(pitch, start, start + tpb, 2));
                    melody_prev = pitch;
                }
            }
            beat += dur;
        }
    }
    notes.sort_by_key(|n| (n.onset_ticks, n.pitch, n.channel, n.offset_ticks));
    SynthPiece {
        key,
        index,
        notes,
        length_beats: config.beats_per_piece,
    }
}

/// Pitch of class `pc` closest to `prev`, kept inside the melody octave
/// band.
fn nearest_pitch(prev: u8, pc: u8) -> u8 {
    let up = place(prev, pc);
    let down = up.saturating_sub(12);
    let p = if up - prev <= prev - down.min(prev) { up } else { down };
    let low = MELODY_OCTAVE - 5;
    let high = MELODY_OCTAVE + 12;
    if p < low {
        p + 12
    } else if p > high {
        p - 12
    } else {
        p
    }
}

/// Next scale tone above or below `pitch`.
fn scale_neighbour(pitch: u8, scale: &[u8; 7], up: bool) -> u8 {
    let mut p = pitch;
    loop {
        p = if up { p + 1 } else { p - 1 };
        if scale.contains(&(p % 12)) {
            return p;
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("key list is empty")]
    NoKeys,
    #[error("pieces per key must be at least 1")]
    NoPieces,
    #[error("pieces must be at least one beat long")]
    NoBeats,
}

/// Generate the whole corpus in a fixed order: keys as listed (or roots
/// 0..12), then piece index.
pub fn synth_corpus(config: &SynthConfig) -> Result<Vec<SynthPiece>, SynthError> {
    if config.keys.as_ref().is_some_and(|k| k.is_empty()) {
        return Err(SynthError::NoKeys);
    }
    if config.pieces_per_key == 0 {
        return Err(SynthError::NoPieces);
    }
    if config.beats_per_piece == 0 {
        return Err(SynthError::NoBeats);
    }
    let mut out = Vec::new();
    match &config.keys {
        Some(keys) => {
            for &key in keys {
                for i in 0..config.pieces_per_key {
                    out.push(synth_piece(key, i, config));
                }
            }
        }
        None => {
            for root in 0..12 {
                for i in 0..config.pieces_per_key {
                    let mode = if i % 2 == 0 { Mode::Major } else { Mode::Minor };
                    out.push(synth_piece(Key::new(root, mode), i, config));
                }
            }
        }
    }
    Ok(out)
}
