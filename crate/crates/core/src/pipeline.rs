//! File-level orchestration shared by the CLI and the tests.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::analysis::{AnalysisError, Key};
use crate::config::{ConfigError, PipelineConfig};
use crate::embedding::{EmbeddingError, EmbeddingSpace};
use crate::generator::{piece_slices, GeneratorError};
use crate::midi::{parse_midi, MidiPiece};
use crate::slice::Slice;
use crate::synth::{key_from_file_name, synth_corpus, SynthConfig, SynthError};
use crate::trainer::{train, train_hogwild, LossTrace, TrainError};
use crate::vocab::{
    build_vocabulary, corpus_from_text, corpus_to_text, encode_corpus, VocabError, Vocabulary, UNK_ID,
};
use crate::FormatError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("no parseable MIDI files under {0}")]
    NoPieces(PathBuf),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Midi { path: PathBuf, source: crate::midi::MidiError },
}

impl PipelineError {
    /// 1 for configuration problems, 3 for a numerical abort, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Synth(_) => 1,
            PipelineError::Train(TrainError::InvalidConfig(_)) => 1,
            PipelineError::Train(TrainError::NonFinite { .. }) => 3,
            PipelineError::Embedding(EmbeddingError::NonFinite) => 3,
            PipelineError::Generator(GeneratorError::ZeroTopN) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_midi(path: &Path) -> Result<MidiPiece, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_midi(&bytes).map_err(|source| PipelineError::Midi {
        path: path.to_path_buf(),
        source,
    })
}

/// A parsed corpus file.
#[derive(Clone, Debug)]
pub struct LoadedPiece {
    pub path: PathBuf,
    pub slices: Vec<Slice>,
    pub unclosed_notes: usize,
}

impl LoadedPiece {
    pub fn key(&self) -> Option<Key> {
        key_from_file_name(self.path.file_name()?.to_str()?)
    }
}

#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub pieces: Vec<LoadedPiece>,
    /// Files that failed to parse, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn is_midi(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

/// Parse every `.mid`/`.midi` file under `dir`, in path order.
pub fn load_midi_dir(dir: &Path) -> Result<IngestReport, PipelineError> {
    let mut report = IngestReport::default();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| PipelineError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || !is_midi(path) {
            continue;
        }
        match read_midi(path) {
            Ok(piece) => {
                if piece.unclosed_notes > 0 {
                    log::warn!("{}: {} notes never released", path.display(), piece.unclosed_notes);
                }
                report.pieces.push(LoadedPiece {
                    path: path.to_path_buf(),
                    slices: piece_slices(&piece),
                    unclosed_notes: piece.unclosed_notes,
                });
            }
            Err(e) => {
                log::warn!("skipping {e}");
                report.skipped.push((path.to_path_buf(), e.to_string()));
            }
        }
    }
    if report.pieces.is_empty() {
        return Err(PipelineError::NoPieces(dir.to_path_buf()));
    }
    Ok(report)
}

/// Corpus summary figures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub pieces: usize,
    pub slices: usize,
    pub unique_slices: usize,
    pub vocab_size: usize,
    /// Distinct slices folded into UNK.
    pub unk_folds: usize,
    /// Slice occurrences encoded as UNK.
    pub unk_occurrences: u64,
}

impl CorpusStats {
    pub fn compute(pieces: &[Vec<Slice>], vocab: &Vocabulary) -> Self {
        let unique: std::collections::BTreeSet<Slice> = pieces.iter().flatten().copied().collect();
        CorpusStats {
            pieces: pieces.len(),
            slices: pieces.iter().map(Vec::len).sum(),
            unique_slices: unique.len(),
            vocab_size: vocab.size(),
            unk_folds: unique.iter().filter(|&&s| vocab.id_of(s).is_none()).count(),
            unk_occurrences: vocab.count(UNK_ID),
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pieces: {}", self.pieces)?;
        writeln!(f, "slices: {}", self.slices)?;
        writeln!(f, "unique slices: {}", self.unique_slices)?;
        writeln!(f, "vocabulary size: {}", self.vocab_size)?;
        writeln!(f, "slices folded into UNK: {}", self.unk_folds)?;
        write!(f, "UNK occurrences: {}", self.unk_occurrences)
    }
}

/// Build the vocabulary and write both caches.
pub fn ingest(cfg: &PipelineConfig) -> Result<(IngestReport, CorpusStats), PipelineError> {
    let report = load_midi_dir(&cfg.corpus_dir)?;
    let pieces: Vec<Vec<Slice>> = report.pieces.iter().map(|p| p.slices.clone()).collect();
    let vocab = build_vocabulary(pieces.iter().flatten().copied(), cfg.vocab_size)?;
    write_file(&cfg.corpus_cache, corpus_to_text(&pieces))?;
    write_file(&cfg.vocab_cache, vocab.to_text())?;
    let stats = CorpusStats::compute(&pieces, &vocab);
    Ok((report, stats))
}

pub fn load_caches(cfg: &PipelineConfig) -> Result<(Vec<Vec<Slice>>, Vocabulary), PipelineError> {
    let fmt_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Format { path, source }
    };
    let pieces = corpus_from_text(&read_text(&cfg.corpus_cache)?).map_err(fmt_err(&cfg.corpus_cache))?;
    let vocab = Vocabulary::from_text(&read_text(&cfg.vocab_cache)?).map_err(fmt_err(&cfg.vocab_cache))?;
    Ok((pieces, vocab))
}

/// Train from the caches and write the embedding file and loss trace.
pub fn train_from_caches(cfg: &PipelineConfig) -> Result<(EmbeddingSpace, LossTrace), PipelineError> {
    let (pieces, vocab) = load_caches(cfg)?;
    let corpus = encode_corpus(&pieces, &vocab);
    let (matrix, trace) = if cfg.threads > 1 {
        train_hogwild(&corpus, &vocab, &cfg.training, cfg.threads)?
    } else {
        train(&corpus, &vocab, &cfg.training)?
    };
    let space = EmbeddingSpace::from_matrix(vocab, &matrix)?;
    write_file(&cfg.embeddings, space.to_text())?;
    write_file(&cfg.loss_csv, trace.to_csv())?;
    Ok((space, trace))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSpace, PipelineError> {
    Ok(EmbeddingSpace::from_text(&read_text(path)?)?)
}

/// Write a synthetic corpus into `dir`; returns the written paths.
pub fn write_synth_corpus(dir: &Path, config: &SynthConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let pieces = synth_corpus(config)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::with_capacity(pieces.len());
    for p in pieces {
        let path = dir.join(p.file_name());
        write_file(&path, p.to_midi())?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::{write_format0, NoteEvent};

    #[test]
    fn ingest_skips_bad_files_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("in");
        fs::create_dir_all(corpus.join("sub")).unwrap();
        fs::write(corpus.join("a.mid"), write_format0(4, &[NoteEvent::new(60, 0, 8, 0)], 8, 64)).unwrap();
        fs::write(corpus.join("sub/b.MIDI"), write_format0(4, &[NoteEvent::new(64, 4, 8, 0)], 8, 64)).unwrap();
        fs::write(corpus.join("broken.mid"), b"MThd\0\0").unwrap();
        fs::write(corpus.join("notes.txt"), b"ignored").unwrap();
        let cfg = PipelineConfig {
            corpus_dir: corpus.clone(),
            corpus_cache: dir.path().join("c.txt"),
            vocab_cache: dir.path().join("v.txt"),
            ..Default::default()
        };
        let (report, stats) = ingest(&cfg).unwrap();
        assert_eq!(report.pieces.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(stats.pieces, 2);
        assert_eq!(stats.slices, 4);
        // "0", "R", "4".
        assert_eq!(stats.unique_slices, 3);
        assert_eq!(stats.unk_folds, 0);
        let (pieces, vocab) = load_caches(&cfg).unwrap();
        assert_eq!(pieces[1], vec![Slice::REST, "4".parse().unwrap()]);
        assert_eq!(vocab.size(), 4);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.mid"), b"nope").unwrap();
        let err = load_midi_dir(dir.path()).unwrap_err();
        assert!(matches!(err, PipelineError::NoPieces(_)));
        assert_eq!(err.exit_code(), 2);
    }
}
