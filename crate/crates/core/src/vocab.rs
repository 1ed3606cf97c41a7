//! Frequency-ranked vocabulary with an UNK cutoff, corpus encoding, and the
//! two text cache formats (`SLICECORPUS`, `SLICEVOCAB`).

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::slice::Slice;
use crate::FormatError;

pub type TokenId = u32;

/// UNK always takes the first id.
pub const UNK_ID: TokenId = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("vocabulary needs room for UNK and at least one slice (max_size {0} < 2)")]
    MaxSizeTooSmall(usize),
    #[error("cannot build a vocabulary from an empty slice stream")]
    EmptyStream,
    #[error("slice {0} listed twice")]
    DuplicateSlice(Slice),
    #[error("expected {expected} counts, got {got}")]
    CountMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Unk,
    Slice(Slice),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Unk => f.write_str("UNK"),
            Token::Slice(s) => s.fmt(f),
        }
    }
}

impl Token {
    /// Tie-break key shared by every ranking in the crate.
    pub fn canonical_form(&self) -> String {
        self.to_string()
    }
}

/// Bidirectional slice ↔ id mapping with occurrence counts.
///
/// Id 0 is UNK and carries the aggregate count of every folded slice;
/// ids `1..size` hold retained slices by descending count, ties broken by
/// canonical form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    counts: Vec<u64>,
    index: HashMap<Slice, TokenId>,
}

/// Keep the `max_size - 1` most frequent slices; fold the rest into UNK.
pub fn build_vocabulary<I>(slices: I, max_size: usize) -> Result<Vocabulary, VocabError>
where
    I: IntoIterator<Item = Slice>,
{
    if max_size < 2 {
        return Err(VocabError::MaxSizeTooSmall(max_size));
    }
    let mut freq: HashMap<Slice, u64> = HashMap::new();
    for s in slices {
        *freq.entry(s).or_default() += 1;
    }
    if freq.is_empty() {
        return Err(VocabError::EmptyStream);
    }
    let mut ranked: Vec<(String, Slice, u64)> =
        freq.into_iter().map(|(s, c)| (s.to_string(), s, c)).collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));

    let keep = ranked.len().min(max_size - 1);
    let unk_count = ranked[keep..].iter().map(|r| r.2).sum();
    let mut counts = vec![unk_count];
    let mut kept = Vec::with_capacity(keep);
    for (_, s, c) in ranked.into_iter().take(keep) {
        kept.push(s);
        counts.push(c);
    }
    Vocabulary::from_parts(kept, counts)
}

impl Vocabulary {
    /// Assemble from retained slices in id order (ids `1..`) and counts
    /// indexed by id (UNK first).
    pub fn from_parts(slices: Vec<Slice>, counts: Vec<u64>) -> Result<Vocabulary, VocabError> {
        if counts.len() != slices.len() + 1 {
            return Err(VocabError::CountMismatch {
                expected: slices.len() + 1,
                got: counts.len(),
            });
        }
        let mut index = HashMap::with_capacity(slices.len());
        let mut tokens = Vec::with_capacity(slices.len() + 1);
        tokens.push(Token::Unk);
        for (i, s) in slices.into_iter().enumerate() {
            if index.insert(s, (i + 1) as TokenId).is_some() {
                return Err(VocabError::DuplicateSlice(s));
            }
            tokens.push(Token::Slice(s));
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk_id(&self) -> TokenId {
        UNK_ID
    }

    pub fn id_of(&self, slice: Slice) -> Option<TokenId> {
        self.index.get(&slice).copied()
    }

    pub fn encode(&self, slice: Slice) -> TokenId {
        self.id_of(slice).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> Token {
        self.tokens[id as usize]
    }

    pub fn slice_of(&self, id: TokenId) -> Option<Slice> {
        match self.tokens.get(id as usize)? {
            Token::Slice(s) => Some(*s),
            Token::Unk => None,
        }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Same ids and slices, ignoring counts.
    pub fn same_tokens(&self, other: &Vocabulary) -> bool {
        self.tokens == other.tokens
    }

    /// `SLICEVOCAB v1` text form.
    pub fn to_text(&self) -> String {
        let mut out = format!("SLICEVOCAB v1 {}\n", self.size());
        for (id, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{id} {t} {c}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocabulary, FormatError> {
        let mut lines = text.lines();
        let size = parse_header(lines.next(), "SLICEVOCAB")?;
        let mut slices = Vec::with_capacity(size.saturating_sub(1));
        let mut counts = Vec::with_capacity(size);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let err = |m: &str| FormatError::new(lineno, m);
            let mut parts = line.split(' ');
            let (Some(id), Some(form), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected `<id> <form> <count>`"));
            };
            if id.parse::<usize>().ok() != Some(i) {
                return Err(err("token ids must be contiguous and ascending from 0"));
            }
            if i == 0 {
                if form != "UNK" {
                    return Err(err("token 0 must be UNK"));
                }
            } else {
                slices.push(form.parse::<Slice>().map_err(|e| err(&e.to_string()))?);
            }
            counts.push(count.parse::<u64>().map_err(|_| err("bad count"))?);
        }
        if counts.len() != size {
            return Err(FormatError::new(1, "token count does not match header"));
        }
        Vocabulary::from_parts(slices, counts).map_err(|e| FormatError::new(0, &e.to_string()))
    }
}

pub(crate) fn parse_header(line: Option<&str>, magic: &str) -> Result<usize, FormatError> {
    Ok(parse_header_fields(line, magic, 1)?[0])
}

/// `<magic> v1 <n_1> … <n_k>` with `k` non-negative integers.
pub(crate) fn parse_header_fields(line: Option<&str>, magic: &str, k: usize) -> Result<Vec<usize>, FormatError> {
    let line = line.ok_or_else(|| FormatError::new(1, "empty file"))?;
    let bad = || FormatError::new(1, &format!("expected `{magic} v1` header with {k} count(s)"));
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.len() != k + 2 || parts[0] != magic || parts[1] != "v1" {
        return Err(bad());
    }
    parts[2..].iter().map(|p| p.parse().map_err(|_| bad())).collect()
}

/// Token-id sequences, one per piece.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub pieces: Vec<Vec<TokenId>>,
    pub total_tokens: usize,
}

pub fn encode_corpus(pieces: &[Vec<Slice>], vocab: &Vocabulary) -> EncodedCorpus {
    let pieces: Vec<Vec<TokenId>> = pieces
        .iter()
        .map(|p| p.iter().map(|&s| vocab.encode(s)).collect())
        .collect();
    let total_tokens = pieces.iter().map(Vec::len).sum();
    EncodedCorpus {
        pieces,
        total_tokens,
    }
}

/// `SLICECORPUS v1` text form: one line of canonical slices per piece.
pub fn corpus_to_text(pieces: &[Vec<Slice>]) -> String {
    let mut out = format!("SLICECORPUS v1 {}\n", pieces.len());
    for piece in pieces {
        for (i, s) in piece.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{s}");
        }
        out.push('\n');
    }
    out
}

pub fn corpus_from_text(text: &str) -> Result<Vec<Vec<Slice>>, FormatError> {
    let mut lines = text.lines();
    let n = parse_header(lines.next(), "SLICECORPUS")?;
    let mut pieces = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            pieces.push(Vec::new());
            continue;
        }
        let piece = line
            .split(' ')
            .map(|f| f.parse::<Slice>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FormatError::new(i + 2, &e.to_string()))?;
        pieces.push(piece);
    }
    if pieces.len() != n {
        return Err(FormatError::new(1, "piece count does not match header"));
    }
    Ok(pieces)
}
