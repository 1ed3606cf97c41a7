//! Distributed embeddings for polyphonic music.
//!
//! A piece is cut into beat-long *slices*, each the set of pitch classes
//! sounding during that beat. Slices play the role of words: a skip-gram
//! model with negative sampling learns one vector per frequent slice from
//! the contexts it appears in. The resulting space is then probed for
//! musical structure (functional chord distances, key relationships, chord
//! pair "analogies") and used to rewrite pieces by substituting each slice
//! with a nearby, tonally compatible one.
//!
//! The pipeline, module by module:
//!
//! - [`midi`]: SMF parsing into notes on a quarter-note beat grid, and SMF writing.
//! - [`slice`]: pitch-class slices and transposition.
//! - [`vocab`]: frequency-ranked vocabulary with UNK cutoff and corpus encoding.
//! - [`trainer`]: skip-gram with negative sampling, trained by plain SGD.
//! - [`embedding`]: cosine metrics, nearest neighbours, persistence.
//! - [`analysis`]: chord, key and analogy experiments producing labeled matrices.
//! - [`generator`]: slice substitution and piece rewriting.
//! - [`synth`]: a seeded generator of diatonic chord-progression pieces.
//! - [`config`] and [`pipeline`]: orchestration used by the `slicevec` CLI.

use thiserror::Error;

pub mod analysis;
pub mod config;
pub mod embedding;
pub mod generator;
pub mod midi;
pub mod pipeline;
pub mod slice;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use embedding::EmbeddingSpace;
pub use midi::{parse_midi, BeatGrid, MidiPiece, NoteEvent};
pub use slice::{make_slice, Slice};
pub use trainer::{train, TrainingConfig};
pub use vocab::{build_vocabulary, encode_corpus, EncodedCorpus, Token, TokenId, Vocabulary};

/// A text file that does not follow its declared format.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, message: &str) -> Self {
        FormatError {
            line,
            message: message.to_string(),
        }
    }
}
