//! The trained vector space: cosine metrics, nearest neighbours, chord-pair
//! angles, and the `SLICEVEC` text format.

use std::fmt::Write as _;

use thiserror::Error;

use crate::slice::Slice;
use crate::trainer::EmbeddingMatrix;
use crate::vocab::{parse_header_fields, Token, TokenId, Vocabulary, UNK_ID};
use crate::FormatError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("cosine metric undefined for a zero vector")]
    ZeroVector,
    #[error("angle undefined: chord-pair difference vector is zero")]
    ZeroDifference,
    #[error("token id {0} not in vocabulary")]
    UnknownToken(TokenId),
    #[error("slice {0} not in vocabulary")]
    SliceNotInVocabulary(Slice),
    #[error("vector data does not match {vocab_size} × {dims}")]
    Shape { vocab_size: usize, dims: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("n must be at least 1")]
    ZeroNeighbours,
    #[error(transparent)]
    Format(#[from] FormatError),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ aᵢbᵢ / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let mut norm = (aa * bb).sqrt();
    if !norm.is_normal() {
        norm = aa.sqrt() * bb.sqrt();
    }
    Ok((dot(a, b) / norm).clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Angle in degrees between two vectors.
pub fn angle_degrees(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    Ok(cosine_similarity(a, b)?.acos().to_degrees())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub id: TokenId,
    pub distance: f64,
}

/// Immutable vocabulary + input vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    vectors: Vec<f64>,
    dims: usize,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, vectors: Vec<f64>, dims: usize) -> Result<Self, EmbeddingError> {
        if dims == 0 || vectors.len() != vocab.size() * dims {
            return Err(EmbeddingError::Shape {
                vocab_size: vocab.size(),
                dims,
            });
        }
        if !vectors.iter().all(|x| x.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(EmbeddingSpace { vocab, vectors, dims })
    }

    /// Keeps the input vectors; output vectors are dropped.
    pub fn from_matrix(vocab: Vocabulary, matrix: &EmbeddingMatrix) -> Result<Self, EmbeddingError> {
        Self::new(vocab, matrix.input_vectors.clone(), matrix.dims)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.vocab.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vector(&self, id: TokenId) -> Result<&[f64], EmbeddingError> {
        let i = id as usize;
        if i >= self.len() {
            return Err(EmbeddingError::UnknownToken(id));
        }
        Ok(&self.vectors[i * self.dims..(i + 1) * self.dims])
    }

    pub fn slice_vector(&self, slice: Slice) -> Result<&[f64], EmbeddingError> {
        let id = self
            .vocab
            .id_of(slice)
            .ok_or(EmbeddingError::SliceNotInVocabulary(slice))?;
        self.vector(id)
    }

    pub fn distance(&self, a: TokenId, b: TokenId) -> Result<f64, EmbeddingError> {
        cosine_distance(self.vector(a)?, self.vector(b)?)
    }

    /// The `n` closest tokens to `query`, ascending by cosine distance, ties
    /// broken by canonical form. Returns fewer when fewer candidates remain.
    pub fn nearest(
        &self,
        query: TokenId,
        n: usize,
        exclude_self: bool,
        exclude_unk: bool,
    ) -> Result<Vec<Neighbor>, EmbeddingError> {
        self.nearest_where(query, n, |id| !(exclude_self && id == query) && !(exclude_unk && id == UNK_ID))
    }

    /// [`nearest`](Self::nearest) over the candidates accepted by `keep`.
    pub fn nearest_where<F>(&self, query: TokenId, n: usize, keep: F) -> Result<Vec<Neighbor>, EmbeddingError>
    where
        F: Fn(TokenId) -> bool,
    {
        if n == 0 {
            return Err(EmbeddingError::ZeroNeighbours);
        }
        let q = self.vector(query)?;
        let mut scored = Vec::new();
        for id in (0..self.len() as TokenId).filter(|&id| keep(id)) {
            let distance = cosine_distance(q, self.vector(id)?)?;
            scored.push((Neighbor { id, distance }, self.vocab.token(id).canonical_form()));
        }
        scored.sort_by(|a, b| a.0.distance.total_cmp(&b.0.distance).then_with(|| a.1.cmp(&b.1)));
        scored.truncate(n);
        Ok(scored.into_iter().map(|(nb, _)| nb).collect())
    }

    /// Angle in degrees between `b1 - a1` and `b2 - a2`.
    pub fn pair_vector_angle(
        &self,
        a1: TokenId,
        b1: TokenId,
        a2: TokenId,
        b2: TokenId,
    ) -> Result<f64, EmbeddingError> {
        let diff = |a: TokenId, b: TokenId| -> Result<Vec<f64>, EmbeddingError> {
            Ok(self.vector(b)?.iter().zip(self.vector(a)?).map(|(x, y)| x - y).collect())
        };
        let (d1, d2) = (diff(a1, b1)?, diff(a2, b2)?);
        angle_degrees(&d1, &d2).map_err(|_| EmbeddingError::ZeroDifference)
    }

    /// `SLICEVEC v1` text: header, then one row per token in id order with
    /// shortest round-trip floats.
    pub fn to_text(&self) -> String {
        let mut out = format!("SLICEVEC v1 {} {}\n", self.len(), self.dims);
        for (token, row) in self.vocab.tokens().iter().zip(self.vectors.chunks(self.dims)) {
            let _ = write!(out, "{token}");
            for x in row {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse `SLICEVEC v1`. Counts are not stored in the file and load as 0.
    pub fn from_text(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines();
        let header = parse_header_fields(lines.next(), "SLICEVEC", 2)?;
        let (size, dims) = (header[0], header[1]);
        let mut slices = Vec::with_capacity(size.saturating_sub(1));
        let mut vectors = Vec::with_capacity(size * dims);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut parts = line.split(' ');
            let form = parts.next().unwrap_or_default();
            if i == 0 {
                if form != "UNK" {
                    return Err(FormatError::new(lineno, "first token must be UNK").into());
                }
            } else {
                let s = form
                    .parse::<Slice>()
                    .map_err(|e| FormatError::new(lineno, &e.to_string()))?;
                slices.push(s);
            }
            let before = vectors.len();
            for p in parts {
                vectors.push(p.parse::<f64>().map_err(|_| FormatError::new(lineno, "bad float"))?);
            }
            if vectors.len() - before != dims {
                return Err(FormatError::new(lineno, "wrong number of components").into());
            }
            rows += 1;
        }
        if rows != size {
            return Err(FormatError::new(1, "row count does not match header").into());
        }
        let vocab = Vocabulary::from_parts(slices, vec![0; size])
            .map_err(|e| FormatError::new(0, &e.to_string()))?;
        Self::new(vocab, vectors, dims)
    }

    pub fn token_label(&self, id: TokenId) -> String {
        match self.vocab.token(id) {
            Token::Unk => "UNK".into(),
            Token::Slice(s) => s.to_string(),
        }
    }
}
