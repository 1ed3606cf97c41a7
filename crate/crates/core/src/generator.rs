//! Slice substitution and piece rewriting.
//!
//! For an input slice `s` with its own token, the `top_n` nearest vocabulary
//! slices are gathered. Their pitch classes are counted and normalized into
//! twelve weights; each candidate scores the mean weight of its own pitch
//! classes. The substitute is the best-scoring candidate with as many pitch
//! classes as `s`, or the best-scoring candidate overall when none has.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{format_sig6, Key};
use crate::embedding::{EmbeddingError, EmbeddingSpace};
use crate::midi::{write_format0, MidiPiece, NoteEvent};
use crate::slice::{make_slice, Slice};
use crate::vocab::{TokenId, UNK_ID};

/// Substituted beats are rendered from C4 (MIDI 60) upwards.
pub const RENDER_BASE_PITCH: u8 = 60;
pub const RENDER_VELOCITY: u8 = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("top_n must be at least 1")]
    ZeroTopN,
    #[error("{substitutes} substitutes for a piece of {beats} beats")]
    LengthMismatch { substitutes: usize, beats: u64 },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub top_n: usize,
    /// Leave the input slice out of its own candidate list.
    pub exclude_identity: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            top_n: 1,
            exclude_identity: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionCandidate {
    pub slice: Slice,
    pub id: TokenId,
    /// Cosine distance to the input slice.
    pub distance: f64,
    pub score: f64,
    /// Same number of pitch classes as the input.
    pub same_count: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitchClassWeights(pub [f64; 12]);

impl PitchClassWeights {
    /// Occurrence count of each pitch class across `slices`, divided by the
    /// grand total.
    pub fn from_slices<'a, I: IntoIterator<Item = &'a Slice>>(slices: I) -> Self {
        let mut w = [0.0; 12];
        for s in slices {
            for pc in s.pitch_classes() {
                w[pc as usize] += 1.0;
            }
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|x| *x /= total);
        }
        PitchClassWeights(w)
    }

    /// Mean weight over the slice's pitch classes.
    pub fn score(&self, s: Slice) -> f64 {
        let sum: f64 = s.pitch_classes().map(|pc| self.0[pc as usize]).sum();
        sum / s.len() as f64
    }
}

/// Outcome of one substitution, with the evidence behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    pub input: Slice,
    pub output: Slice,
    /// Distance from input to output; `None` on pass-through.
    pub distance: Option<f64>,
    /// Candidates in ascending distance order.
    pub candidates: Vec<SubstitutionCandidate>,
    pub weights: Option<PitchClassWeights>,
}

impl Substitution {
    fn pass_through(s: Slice) -> Self {
        Substitution {
            input: s,
            output: s,
            distance: None,
            candidates: Vec::new(),
            weights: None,
        }
    }
}

/// Pick a substitute for `s`.
///
/// Slices without their own token, and rests, are returned unchanged. UNK
/// and the rest slice are never candidates. Ties on score go to the smaller
/// distance, then to the smaller canonical form.
pub fn substitute_slice(
    s: Slice,
    space: &EmbeddingSpace,
    config: &GeneratorConfig,
) -> Result<Substitution, GeneratorError> {
    if config.top_n == 0 {
        return Err(GeneratorError::ZeroTopN);
    }
    let vocab = space.vocab();
    let Some(query) = vocab.id_of(s).filter(|_| !s.is_rest()) else {
        return Ok(Substitution::pass_through(s));
    };
    let neighbours = space.nearest_where(query, config.top_n, |id| {
        id != UNK_ID
            && vocab.slice_of(id).is_some_and(|t| !t.is_rest())
            && !(config.exclude_identity && id == query)
    })?;
    if neighbours.len() < config.top_n {
        log::warn!(
            "only {} candidates available for top-{} search from {s}",
            neighbours.len(),
            config.top_n
        );
    }
    if neighbours.is_empty() {
        return Ok(Substitution::pass_through(s));
    }

    let slices: Vec<Slice> = neighbours
        .iter()
        .map(|n| vocab.slice_of(n.id).expect("candidates are slices"))
        .collect();
    let weights = PitchClassWeights::from_slices(&slices);
    let candidates: Vec<SubstitutionCandidate> = neighbours
        .iter()
        .zip(&slices)
        .map(|(n, &t)| SubstitutionCandidate {
            slice: t,
            id: n.id,
            distance: n.distance,
            score: weights.score(t),
            same_count: t.len() == s.len(),
        })
        .collect();

    let any_same = candidates.iter().any(|c| c.same_count);
    let best = candidates
        .iter()
        .filter(|c| !any_same || c.same_count)
        .min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.distance.total_cmp(&b.distance))
                .then_with(|| a.slice.cmp(&b.slice))
        })
        .expect("non-empty candidate list");

    Ok(Substitution {
        input: s,
        output: best.slice,
        distance: Some(best.distance),
        weights: Some(weights),
        candidates,
    })
}

/// One row of the rewrite report.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatDiagnostic {
    /// Zero-based beat index.
    pub beat: usize,
    pub original: Slice,
    pub substitute: Slice,
    pub distance: Option<f64>,
}

/// Substitute every beat independently.
pub fn rewrite_piece(
    slices: &[Slice],
    space: &EmbeddingSpace,
    config: &GeneratorConfig,
) -> Result<(Vec<Slice>, Vec<BeatDiagnostic>), GeneratorError> {
    let mut out = Vec::with_capacity(slices.len());
    let mut diags = Vec::with_capacity(slices.len());
    for (beat, &s) in slices.iter().enumerate() {
        let sub = substitute_slice(s, space, config)?;
        out.push(sub.output);
        diags.push(BeatDiagnostic {
            beat,
            original: s,
            substitute: sub.output,
            distance: sub.distance,
        });
    }
    Ok((out, diags))
}

/// `beat,original,substitute,cosine_distance,top_n`; beats are numbered
/// from 1 and pass-through rows carry `NA` as distance.
pub fn diagnostics_csv(diags: &[BeatDiagnostic], top_n: usize) -> String {
    let mut out = String::from("beat,original,substitute,cosine_distance,top_n\n");
    for d in diags {
        let dist = d.distance.map_or_else(|| "NA".to_string(), format_sig6);
        let _ = writeln!(out, "{},{},{},{},{}", d.beat + 1, d.original, d.substitute, dist, top_n);
    }
    out
}

/// Slice of every beat of a parsed piece.
pub fn piece_slices(piece: &MidiPiece) -> Vec<Slice> {
    piece
        .beat_pitch_sets()
        .into_iter()
        .map(make_slice)
        .collect()
}

/// Render a rewritten piece as SMF format 0.
///
/// Beats whose slice changed are cleared of original notes and hold one
/// beat-long note per substitute pitch class in octave 4. Original notes
/// survive on every unchanged beat, split around the changed ones.
pub fn emit_midi(piece: &MidiPiece, substitutes: &[Slice]) -> Result<Vec<u8>, GeneratorError> {
    let grid = piece.grid;
    if substitutes.len() as u64 != grid.piece_length_beats {
        return Err(GeneratorError::LengthMismatch {
            substitutes: substitutes.len(),
            beats: grid.piece_length_beats,
        });
    }
    let originals = piece_slices(piece);
    let changed: Vec<bool> = originals.iter().zip(substitutes).map(|(a, b)| a != b).collect();
    let tpb = u64::from(grid.ticks_per_beat);

    let mut notes = Vec::new();
    for note in &piece.events {
        let beats = grid.beats_of(note);
        let mut b = beats.start;
        while b < beats.end {
            if changed[b as usize] {
                b += 1;
                continue;
            }
            let run_start = b;
            while b < beats.end && !changed[b as usize] {
                b += 1;
            }
            let on = note.onset_ticks.max(run_start * tpb);
            let off = note.offset_ticks.min(b * tpb);
            notes.push(NoteEvent::new(note.pitch, on, off, note.channel));
        }
    }
    for (b, s) in substitutes.iter().enumerate() {
        if !changed[b] {
            continue;
        }
        let span = grid.beat_span(b as u64);
        for pc in s.pitch_classes() {
            notes.push(NoteEvent::new(RENDER_BASE_PITCH + pc, span.start, span.end, 0));
        }
    }
    Ok(write_format0(
        grid.ticks_per_beat,
        &notes,
        grid.piece_length_beats * tpb,
        RENDER_VELOCITY,
    ))
}

/// Number of pitch-class occurrences outside the key's scale.
pub fn out_of_key_count(slices: &[Slice], key: Key) -> usize {
    let scale = key.scale();
    slices
        .iter()
        .map(|s| s.pitch_classes().filter(|&pc| !scale.contains(pc)).count())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Mode;
    use crate::midi::{parse_midi, BeatGrid};
    use crate::vocab::Vocabulary;

    fn s(form: &str) -> Slice {
        form.parse().unwrap()
    }

    /// 2-D space: angles chosen so distances from "0.4.7" are ordered.
    fn toy_space() -> EmbeddingSpace {
        let slices = vec![s("0.4.7"), s("0.4.9"), s("2.7.11"), s("4.7"), s("R"), s("1.6")];
        let vocab = Vocabulary::from_parts(slices, vec![1; 7]).unwrap();
        let at = |deg: f64| [deg.to_radians().cos(), deg.to_radians().sin()];
        let rows = [at(1.0), at(0.0), at(10.0), at(20.0), at(15.0), at(2.0), at(90.0)];
        EmbeddingSpace::new(vocab, rows.concat(), 2).unwrap()
    }

    #[test]
    fn out_of_vocabulary_passes_through() {
        let space = toy_space();
        let sub = substitute_slice(s("0.3.6"), &space, &GeneratorConfig::default()).unwrap();
        assert_eq!(sub.output, s("0.3.6"));
        assert_eq!(sub.distance, None);
        let rest = substitute_slice(Slice::REST, &space, &GeneratorConfig { top_n: 3, ..Default::default() }).unwrap();
        assert_eq!(rest.output, Slice::REST);
    }

    #[test]
    fn top_one_is_nearest_non_identical_candidate() {
        let space = toy_space();
        // UNK sits at 1°, R at 2°: both skipped; "0.4.9" at 10° is nearest.
        let sub = substitute_slice(s("0.4.7"), &space, &GeneratorConfig::default()).unwrap();
        assert_eq!(sub.output, s("0.4.9"));
        assert_eq!(sub.candidates.len(), 1);
        let d = sub.distance.unwrap();
        assert!((d - (1.0 - 10f64.to_radians().cos())).abs() < 1e-12);
    }

    #[test]
    fn preference_for_same_pitch_class_count() {
        let space = toy_space();
        let cfg = GeneratorConfig { top_n: 3, ..Default::default() };
        let sub = substitute_slice(s("0.4.7"), &space, &cfg).unwrap();
        // Candidates: 0.4.9 (10°), 4.7 (15°), 2.7.11 (20°).
        let forms: Vec<String> = sub.candidates.iter().map(|c| c.slice.to_string()).collect();
        assert_eq!(forms, ["0.4.9", "4.7", "2.7.11"]);
        // Weights: 4 → 2/8, 7 → 2/8, 0 9 2 11 → 1/8 each.
        let w = sub.weights.unwrap().0;
        assert!((w[4] - 0.25).abs() < 1e-15 && (w[0] - 0.125).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // 4.7 scores highest (0.25) but has two classes; among triads 0.4.9
        // scores 0.5/3 and 2.7.11 scores 0.5/3 too: tie goes to the nearer.
        assert_eq!(sub.output, s("0.4.9"));
        assert!(sub.candidates.iter().all(|c| (0.0..=1.0).contains(&c.score)));
    }

    #[test]
    fn highest_score_overall_without_same_count() {
        let space = toy_space();
        let cfg = GeneratorConfig { top_n: 3, ..Default::default() };
        let sub = substitute_slice(s("1.6"), &space, &cfg).unwrap();
        assert!(sub.candidates.iter().all(|c| !c.same_count || c.slice == s("4.7")));
        let best = sub
            .candidates
            .iter()
            .filter(|c| c.same_count)
            .map(|c| c.slice)
            .next();
        assert_eq!(sub.output, best.unwrap());
    }

    #[test]
    fn identity_allowed_when_not_excluded() {
        let space = toy_space();
        let cfg = GeneratorConfig { top_n: 1, exclude_identity: false };
        assert_eq!(substitute_slice(s("0.4.7"), &space, &cfg).unwrap().output, s("0.4.7"));
        assert_eq!(
            substitute_slice(s("0.4.7"), &space, &GeneratorConfig { top_n: 0, exclude_identity: true }),
            Err(GeneratorError::ZeroTopN)
        );
    }

    #[test]
    fn rewrite_edges() {
        let space = toy_space();
        let cfg = GeneratorConfig::default();
        assert_eq!(rewrite_piece(&[], &space, &cfg).unwrap().0, vec![]);
        let oov = vec![s("0.3"), s("1.2.3"), s("5")];
        let (out, diags) = rewrite_piece(&oov, &space, &cfg).unwrap();
        assert_eq!(out, oov);
        assert!(diags.iter().all(|d| d.distance.is_none()));
        let csv = diagnostics_csv(&diags, 1);
        assert!(csv.starts_with("beat,original,substitute,cosine_distance,top_n\n1,0.3,0.3,NA,1\n"));
    }

    fn piece(notes: Vec<NoteEvent>, beats: u64) -> MidiPiece {
        MidiPiece {
            events: notes,
            grid: BeatGrid { ticks_per_beat: 4, piece_length_beats: beats },
            unclosed_notes: 0,
        }
    }

    #[test]
    fn unchanged_substitutes_keep_original_content() {
        let p = piece(vec![NoteEvent::new(50, 0, 12, 0), NoteEvent::new(69, 4, 8, 3)], 3);
        let subs = piece_slices(&p);
        let back = parse_midi(&emit_midi(&p, &subs).unwrap()).unwrap();
        assert_eq!(back.events, p.events);
    }

    #[test]
    fn substituted_beat_renders_octave_four_triad() {
        let p = piece(vec![NoteEvent::new(50, 0, 12, 0)], 3);
        let subs = vec![s("2"), s("0.4.7"), s("2")];
        let back = parse_midi(&emit_midi(&p, &subs).unwrap()).unwrap();
        let at_beat: Vec<u8> = back.events.iter().filter(|e| e.onset_ticks == 4).map(|e| e.pitch).collect();
        assert_eq!(at_beat, vec![60, 64, 67]);
        // The held D is split around the changed beat.
        assert!(back.events.contains(&NoteEvent::new(50, 0, 4, 0)));
        assert!(back.events.contains(&NoteEvent::new(50, 8, 12, 0)));
        assert_eq!(piece_slices(&back), subs);
        assert!(matches!(emit_midi(&p, &subs[..2]), Err(GeneratorError::LengthMismatch { .. })));
    }

    #[test]
    fn out_of_key_counting() {
        let am = Key::new(9, Mode::Minor);
        assert_eq!(out_of_key_count(&[s("0.4.9"), s("1.4.8")], am), 2);
        assert_eq!(out_of_key_count(&[], am), 0);
    }
}
