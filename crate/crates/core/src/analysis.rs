//! Probing the trained space for tonal structure.
//!
//! Three experiments, all producing labeled matrices:
//!
//! - **Chord distances**: cosine distance from a tonic triad to its
//!   functional relatives (V, IV, vi, ♭III, ♭II, v).
//! - **Key similarity**: each piece is transposed into all twelve keys of its
//!   mode; every version is reduced to its centroid (the mean of its
//!   in-vocabulary slice vectors) and centroids are compared pairwise.
//! - **Analogy angles**: the angle between chord-pair difference vectors,
//!   e.g. `G − C` (I→V in C) against `D − G` (I→V in G).
//!
//! Rows and columns of key matrices follow the circle of fifths starting at C.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::embedding::{cosine_distance, EmbeddingError, EmbeddingSpace};
use crate::slice::{Slice, PITCH_CLASS_NAMES};
use crate::vocab::{TokenId, UNK_ID};
use crate::FormatError;

/// Pitch classes of the circle of fifths from C: C G D A E B F# Db Ab Eb Bb F.
pub const CIRCLE_OF_FIFTHS: [u8; 12] = [0, 7, 2, 9, 4, 11, 6, 1, 8, 3, 10, 5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("tonic {0} is not in the vocabulary")]
    TonicNotInVocabulary(ChordSpec),
    #[error("role {role} is not defined in {mode} keys")]
    RoleNotInMode { role: FunctionalRole, mode: Mode },
    #[error("no usable {0} pieces")]
    NoPieces(Mode),
    #[error("unknown {kind} {text:?}")]
    Parse { kind: &'static str, text: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Major,
    Minor,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        })
    }
}

impl FromStr for Mode {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "major" => Ok(Mode::Major),
            "minor" => Ok(Mode::Minor),
            _ => Err(AnalysisError::Parse {
                kind: "mode",
                text: s.into(),
            }),
        }
    }
}

fn parse_pitch_class(name: &str) -> Option<u8> {
    let alias = match name {
        "C#" => "Db",
        "D#" => "Eb",
        "Gb" => "F#",
        "G#" => "Ab",
        "A#" => "Bb",
        other => other,
    };
    PITCH_CLASS_NAMES.iter().position(|&n| n == alias).map(|p| p as u8)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Key {
    pub root: u8,
    pub mode: Mode,
}

impl Key {
    pub fn new(root: u8, mode: Mode) -> Key {
        Key { root: root % 12, mode }
    }

    /// Pitch classes of the major or natural-minor scale.
    pub fn scale(&self) -> Slice {
        let steps: [u8; 7] = match self.mode {
            Mode::Major => [0, 2, 4, 5, 7, 9, 11],
            Mode::Minor => [0, 2, 3, 5, 7, 8, 10],
        };
        Slice::from_pitch_classes(steps.iter().map(|s| s + self.root))
    }

    /// The twelve keys of a mode in circle-of-fifths order.
    pub fn circle(mode: Mode) -> [Key; 12] {
        CIRCLE_OF_FIFTHS.map(|root| Key::new(root, mode))
    }
}

/// `"C"`, `"F#"` for major; `"Am"`, `"Ebm"` for minor.
impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = PITCH_CLASS_NAMES[self.root as usize];
        match self.mode {
            Mode::Major => f.write_str(name),
            Mode::Minor => write!(f, "{name}m"),
        }
    }
}

impl FromStr for Key {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, mode) = match s.strip_suffix('m') {
            Some(n) => (n, Mode::Minor),
            None => (s, Mode::Major),
        };
        parse_pitch_class(name)
            .map(|root| Key::new(root, mode))
            .ok_or(AnalysisError::Parse {
                kind: "key",
                text: s.into(),
            })
    }
}

/// Steps between two roots around the circle of fifths (0–6).
pub fn circle_steps(a: u8, b: u8) -> u8 {
    let pos = |pc: u8| CIRCLE_OF_FIFTHS.iter().position(|&x| x == pc % 12).unwrap() as u8;
    let d = (pos(a) + 12 - pos(b)) % 12;
    d.min(12 - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quality {
    Major,
    Minor,
}

/// A triad: root plus quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChordSpec {
    pub root: u8,
    pub quality: Quality,
}

impl ChordSpec {
    pub fn major(root: u8) -> ChordSpec {
        ChordSpec {
            root: root % 12,
            quality: Quality::Major,
        }
    }

    pub fn minor(root: u8) -> ChordSpec {
        ChordSpec {
            root: root % 12,
            quality: Quality::Minor,
        }
    }

    pub fn slice(&self) -> Slice {
        let third = match self.quality {
            Quality::Major => 4,
            Quality::Minor => 3,
        };
        Slice::from_pitch_classes([self.root, self.root + third, self.root + 7])
    }
}

impl fmt::Display for ChordSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = PITCH_CLASS_NAMES[self.root as usize];
        match self.quality {
            Quality::Major => f.write_str(name),
            Quality::Minor => write!(f, "{name}m"),
        }
    }
}

impl FromStr for ChordSpec {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: Key = s.parse().map_err(|_| AnalysisError::Parse {
            kind: "chord",
            text: s.into(),
        })?;
        Ok(match key.mode {
            Mode::Major => ChordSpec::major(key.root),
            Mode::Minor => ChordSpec::minor(key.root),
        })
    }
}

/// Roman-numeral role of a triad relative to a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionalRole {
    I,
    V,
    IV,
    Vi,
    IIIb,
    IIb,
    /// Minor dominant, `v`.
    MinorV,
    /// Minor tonic, `i`.
    MinorI,
}

impl FunctionalRole {
    pub const ALL: [FunctionalRole; 8] = [
        FunctionalRole::I,
        FunctionalRole::V,
        FunctionalRole::IV,
        FunctionalRole::Vi,
        FunctionalRole::IIIb,
        FunctionalRole::IIb,
        FunctionalRole::MinorV,
        FunctionalRole::MinorI,
    ];

    /// The chord this role names in `key`.
    pub fn realize(self, key: Key) -> Result<ChordSpec, AnalysisError> {
        use FunctionalRole::*;
        let r = key.root;
        match (key.mode, self) {
            (Mode::Major, I) => Ok(ChordSpec::major(r)),
            (Mode::Major, V) => Ok(ChordSpec::major(r + 7)),
            (Mode::Major, IV) => Ok(ChordSpec::major(r + 5)),
            (Mode::Major, Vi) => Ok(ChordSpec::minor(r + 9)),
            (Mode::Major, IIIb) => Ok(ChordSpec::major(r + 3)),
            (Mode::Major, IIb) => Ok(ChordSpec::major(r + 1)),
            (_, MinorV) => Ok(ChordSpec::minor(r + 7)),
            (Mode::Minor, MinorI) => Ok(ChordSpec::minor(r)),
            (mode, role) => Err(AnalysisError::RoleNotInMode { role, mode }),
        }
    }
}

impl fmt::Display for FunctionalRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FunctionalRole::*;
        f.write_str(match self {
            I => "I",
            V => "V",
            IV => "IV",
            Vi => "vi",
            IIIb => "IIIb",
            IIb => "IIb",
            MinorV => "v",
            MinorI => "i",
        })
    }
}

impl FromStr for FunctionalRole {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FunctionalRole::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or(AnalysisError::Parse {
                kind: "role",
                text: s.into(),
            })
    }
}

/// Labeled matrix of distances or angles; `None` marks an absent entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Option<f64>>,
    /// Written as a `# units: …` comment line when set.
    pub units: Option<String>,
}

/// Round to six significant digits and print the shortest form of the result.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("valid float");
    format!("{rounded}")
}

impl SimilarityMatrix {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        let n = row_labels.len() * col_labels.len();
        SimilarityMatrix {
            row_labels,
            col_labels,
            values: vec![None; n],
            units: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Option<f64>) {
        let c = self.cols();
        self.values[i * c + j] = v;
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(u) = &self.units {
            let _ = writeln!(out, "# units: {u}");
        }
        for l in &self.col_labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (i, label) in self.row_labels.iter().enumerate() {
            out.push_str(label);
            for j in 0..self.cols() {
                match self.get(i, j) {
                    Some(v) => {
                        let _ = write!(out, ",{}", format_sig6(v));
                    }
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, FormatError> {
        let mut units = None;
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, l)) = lines.peek() {
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(u) = rest.trim().strip_prefix("units:") {
                    units = Some(u.trim().to_string());
                }
                lines.next();
            } else {
                break;
            }
        }
        let (hl, header) = lines.next().ok_or_else(|| FormatError::new(1, "missing header row"))?;
        let col_labels: Vec<String> = header
            .strip_prefix(',')
            .ok_or_else(|| FormatError::new(hl + 1, "header must start with an empty cell"))?
            .split(',')
            .map(String::from)
            .collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let mut cells = line.split(',');
            row_labels.push(cells.next().unwrap_or_default().to_string());
            let before = values.len();
            for c in cells {
                values.push(if c == "NA" {
                    None
                } else {
                    Some(c.parse::<f64>().map_err(|_| FormatError::new(i + 1, "bad value"))?)
                });
            }
            if values.len() - before != col_labels.len() {
                return Err(FormatError::new(i + 1, "row width does not match header"));
            }
        }
        Ok(SimilarityMatrix {
            row_labels,
            col_labels,
            values,
            units,
        })
    }

    /// Entries `(i, i+1 mod n)`: neighbours on the circle of fifths for key
    /// matrices in circle order.
    pub fn cyclic_superdiagonal(&self) -> Vec<Option<f64>> {
        let n = self.rows();
        (0..n).map(|i| self.get(i, (i + 1) % n)).collect()
    }
}

/// Distance from a tonic to one functional relative.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleDistance {
    pub role: FunctionalRole,
    pub chord: ChordSpec,
    /// `None` when the role's triad is not in the vocabulary.
    pub distance: Option<f64>,
}

/// Cosine distance from `tonic` to each role realized in the tonic's key.
pub fn chord_distance_profile(
    space: &EmbeddingSpace,
    tonic: ChordSpec,
    roles: &[FunctionalRole],
) -> Result<Vec<RoleDistance>, AnalysisError> {
    let key = Key::new(
        tonic.root,
        match tonic.quality {
            Quality::Major => Mode::Major,
            Quality::Minor => Mode::Minor,
        },
    );
    let tonic_vec = space
        .slice_vector(tonic.slice())
        .map_err(|_| AnalysisError::TonicNotInVocabulary(tonic))?;
    roles
        .iter()
        .map(|&role| {
            let chord = role.realize(key)?;
            let distance = match space.slice_vector(chord.slice()) {
                Ok(v) => Some(cosine_distance(tonic_vec, v)?),
                Err(_) => None,
            };
            Ok(RoleDistance { role, chord, distance })
        })
        .collect()
}

pub use crate::slice::transpose_piece;

/// Mean vector of a piece's in-vocabulary slices.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyCentroid {
    pub key: Key,
    pub centroid: Vec<f64>,
    pub n_slices_used: usize,
}

/// Centroid of the slices that have their own token; `None` when there are
/// none. With a single cluster, k-means converges to this mean.
pub fn key_centroid(space: &EmbeddingSpace, slices: &[Slice], key: Key) -> Option<KeyCentroid> {
    let mut sum = vec![0.0; space.dims()];
    let mut used = 0;
    for &s in slices {
        let Some(id) = space.vocab().id_of(s) else { continue };
        let v = space.vector(id).ok()?;
        sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        used += 1;
    }
    if used == 0 {
        return None;
    }
    sum.iter_mut().for_each(|x| *x /= used as f64);
    Some(KeyCentroid {
        key,
        centroid: sum,
        n_slices_used: used,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeySimilarity {
    pub matrix: SimilarityMatrix,
    pub pieces_used: usize,
    /// Indices (into the input) of pieces dropped because some transposed
    /// version had no in-vocabulary slice or a zero centroid.
    pub excluded: Vec<usize>,
}

fn key_labels(mode: Mode) -> Vec<String> {
    Key::circle(mode).iter().map(Key::to_string).collect()
}

/// Average centroid distance between the twelve transposed versions of each
/// piece of the given mode.
pub fn key_similarity_matrix(
    space: &EmbeddingSpace,
    pieces: &[(Vec<Slice>, Key)],
    mode: Mode,
) -> Result<KeySimilarity, AnalysisError> {
    let keys = Key::circle(mode);
    let mut sums = [[0.0f64; 12]; 12];
    let mut used = 0;
    let mut excluded = Vec::new();
    for (idx, (slices, key)) in pieces.iter().enumerate() {
        if key.mode != mode {
            continue;
        }
        let centroids: Option<Vec<KeyCentroid>> = keys
            .iter()
            .map(|target| {
                let shift = i32::from(target.root) - i32::from(key.root);
                key_centroid(space, &transpose_piece(slices, shift), *target)
            })
            .collect();
        let dist = centroids.and_then(|cs| {
            let mut d = [[0.0f64; 12]; 12];
            for i in 0..12 {
                for j in i + 1..12 {
                    d[i][j] = cosine_distance(&cs[i].centroid, &cs[j].centroid).ok()?;
                }
            }
            Some(d)
        });
        match dist {
            Some(d) => {
                for i in 0..12 {
                    for j in i + 1..12 {
                        sums[i][j] += d[i][j];
                    }
                }
                used += 1;
            }
            None => {
                log::warn!("piece {idx} ({key}) excluded: a transposed version has no usable centroid");
                excluded.push(idx);
            }
        }
    }
    if used == 0 {
        return Err(AnalysisError::NoPieces(mode));
    }
    let labels = key_labels(mode);
    let mut matrix = SimilarityMatrix::new(labels.clone(), labels);
    matrix.units = Some("cosine distance".into());
    for i in 0..12 {
        matrix.set(i, i, Some(0.0));
        for j in i + 1..12 {
            let v = sums[i][j] / used as f64;
            matrix.set(i, j, Some(v));
            matrix.set(j, i, Some(v));
        }
    }
    Ok(KeySimilarity {
        matrix,
        pieces_used: used,
        excluded,
    })
}

/// Angle between the `from → to` chord-pair vectors of every two keys of a
/// mode. Entries whose chords are missing from the vocabulary are `None`.
pub fn analogy_angle_matrix(
    space: &EmbeddingSpace,
    pair: (FunctionalRole, FunctionalRole),
    mode: Mode,
) -> Result<SimilarityMatrix, AnalysisError> {
    let keys = Key::circle(mode);
    let ids: Vec<Option<(TokenId, TokenId)>> = keys
        .iter()
        .map(|&k| {
            let a = space.vocab().id_of(pair.0.realize(k)?.slice());
            let b = space.vocab().id_of(pair.1.realize(k)?.slice());
            Ok(a.zip(b))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let labels = key_labels(mode);
    let mut m = SimilarityMatrix::new(labels.clone(), labels);
    m.units = Some("degrees".into());
    for i in 0..12 {
        for j in 0..12 {
            let (Some((a1, b1)), Some((a2, b2))) = (ids[i], ids[j]) else { continue };
            let v = if i == j { 0.0 } else { space.pair_vector_angle(a1, b1, a2, b2)? };
            m.set(i, j, Some(v));
        }
    }
    Ok(m)
}

/// Chord-distance profiles for several tonics as one matrix (rows: tonics,
/// columns: roles).
pub fn chord_distance_matrix(
    space: &EmbeddingSpace,
    tonics: &[ChordSpec],
    roles: &[FunctionalRole],
) -> Result<SimilarityMatrix, AnalysisError> {
    let mut m = SimilarityMatrix::new(
        tonics.iter().map(ChordSpec::to_string).collect(),
        roles.iter().map(FunctionalRole::to_string).collect(),
    );
    m.units = Some("cosine distance".into());
    for (i, &t) in tonics.iter().enumerate() {
        for (j, rd) in chord_distance_profile(space, t, roles)?.into_iter().enumerate() {
            m.set(i, j, rd.distance);
        }
    }
    Ok(m)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman correlation between the upper-triangle entries of a key matrix
/// (circle order) and the circle-of-fifths step distance of each key pair.
pub fn circle_correlation(m: &SimilarityMatrix) -> f64 {
    let mut values = Vec::new();
    let mut steps = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            if let Some(v) = m.get(i, j) {
                values.push(v);
                steps.push(f64::from(circle_steps(CIRCLE_OF_FIFTHS[i], CIRCLE_OF_FIFTHS[j])));
            }
        }
    }
    spearman(&values, &steps)
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Ids of the slices that stand for a chord. UNK never does.
pub fn chord_token(space: &EmbeddingSpace, chord: ChordSpec) -> Option<TokenId> {
    space.vocab().id_of(chord.slice()).filter(|&id| id != UNK_ID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Vocabulary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space_with(slices: Vec<Slice>, dims: usize, seed: u64) -> EmbeddingSpace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = slices.len() + 1;
        let vocab = Vocabulary::from_parts(slices, vec![1; n]).unwrap();
        let v = (0..n * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        EmbeddingSpace::new(vocab, v, dims).unwrap()
    }

    fn all_triads() -> Vec<Slice> {
        (0..12u8).flat_map(|r| [ChordSpec::major(r).slice(), ChordSpec::minor(r).slice()]).collect()
    }

    #[test]
    fn circle_labels_and_steps() {
        assert_eq!(
            key_labels(Mode::Major).join(" "),
            "C G D A E B F# Db Ab Eb Bb F"
        );
        assert_eq!(circle_steps(0, 7), 1);
        assert_eq!(circle_steps(0, 5), 1);
        assert_eq!(circle_steps(4, 1), 3);
        assert_eq!(circle_steps(0, 6), 6);
        assert_eq!(circle_steps(3, 3), 0);
    }

    #[test]
    fn role_realization_table() {
        // Oracle: scale-degree spelling from the major scale, independent of
        // the realize() table.
        let major_scale = [0u8, 2, 4, 5, 7, 9, 11];
        for r in 0..12u8 {
            let key = Key::new(r, Mode::Major);
            let deg = |d: usize| (r + major_scale[d]) % 12;
            let triad = |root: u8, third: u8| Slice::from_pitch_classes([root, root + third, root + 7]);
            let table = [
                (FunctionalRole::I, triad(deg(0), 4)),
                (FunctionalRole::V, triad(deg(4), 4)),
                (FunctionalRole::IV, triad(deg(3), 4)),
                (FunctionalRole::Vi, triad(deg(5), 3)),
                (FunctionalRole::IIIb, triad((deg(2) + 11) % 12, 4)),
                (FunctionalRole::IIb, triad((deg(1) + 11) % 12, 4)),
                (FunctionalRole::MinorV, triad(deg(4), 3)),
            ];
            for (role, expected) in table {
                assert_eq!(role.realize(key).unwrap().slice(), expected, "{role} in {key}");
            }
            let minor = Key::new(r, Mode::Minor);
            assert_eq!(FunctionalRole::MinorI.realize(minor).unwrap().slice(), triad(r, 3));
            assert_eq!(FunctionalRole::MinorV.realize(minor).unwrap().slice(), triad((r + 7) % 12, 3));
            assert!(FunctionalRole::IV.realize(minor).is_err());
            assert!(FunctionalRole::MinorI.realize(key).is_err());
        }
        assert_eq!(ChordSpec::major(0).slice().to_string(), "0.4.7");
        assert_eq!(ChordSpec::minor(9).slice().to_string(), "0.4.9");
    }

    #[test]
    fn parsing_names() {
        assert_eq!("F#m".parse::<Key>().unwrap(), Key::new(6, Mode::Minor));
        assert_eq!("Bb".parse::<Key>().unwrap(), Key::new(10, Mode::Major));
        assert_eq!("C#".parse::<Key>().unwrap().to_string(), "Db");
        assert!("H".parse::<Key>().is_err());
        assert_eq!("Am".parse::<ChordSpec>().unwrap(), ChordSpec::minor(9));
        for r in FunctionalRole::ALL {
            assert_eq!(r.to_string().parse::<FunctionalRole>().unwrap(), r);
        }
        assert_eq!(Key::new(9, Mode::Minor).scale(), Key::new(0, Mode::Major).scale());
    }

    #[test]
    fn tonic_profile() {
        let space = space_with(all_triads(), 6, 2);
        let p = chord_distance_profile(&space, ChordSpec::major(0), &[FunctionalRole::I, FunctionalRole::V]).unwrap();
        assert_eq!(p[0].distance, Some(0.0));
        assert!(p[1].distance.unwrap() > 0.0);
        assert_eq!(p[1].chord, ChordSpec::major(7));
    }

    #[test]
    fn missing_chords_are_flagged() {
        let space = space_with(vec![ChordSpec::major(0).slice()], 4, 2);
        let p = chord_distance_profile(&space, ChordSpec::major(0), &[FunctionalRole::V]).unwrap();
        assert_eq!(p[0].distance, None);
        assert_eq!(
            chord_distance_profile(&space, ChordSpec::major(2), &[FunctionalRole::V]),
            Err(AnalysisError::TonicNotInVocabulary(ChordSpec::major(2)))
        );
    }

    #[test]
    fn centroid_is_mean_and_skips_unknown_slices() {
        let space = space_with(all_triads(), 3, 9);
        let c = ChordSpec::major(0).slice();
        let g = ChordSpec::major(7).slice();
        let odd = Slice::from_mask(0b101);
        let kc = key_centroid(&space, &[c, g, odd, c], Key::new(0, Mode::Major)).unwrap();
        assert_eq!(kc.n_slices_used, 3);
        let (vc, vg) = (space.slice_vector(c).unwrap(), space.slice_vector(g).unwrap());
        for d in 0..3 {
            assert!((kc.centroid[d] - (2.0 * vc[d] + vg[d]) / 3.0).abs() < 1e-15);
        }
        assert!(key_centroid(&space, &[odd], Key::new(0, Mode::Major)).is_none());
    }

    #[test]
    fn key_matrix_is_symmetric_with_zero_diagonal() {
        let space = space_with(all_triads(), 8, 4);
        let piece: Vec<Slice> = [0u8, 5, 7, 0].iter().map(|&r| ChordSpec::major(r).slice()).collect();
        let other: Vec<Slice> = [9u8, 2, 4].iter().map(|&r| ChordSpec::minor(r).slice()).collect();
        let ks = key_similarity_matrix(
            &space,
            &[(piece, Key::new(0, Mode::Major)), (other, Key::new(9, Mode::Minor))],
            Mode::Major,
        )
        .unwrap();
        assert_eq!(ks.pieces_used, 1);
        for i in 0..12 {
            assert_eq!(ks.matrix.get(i, i), Some(0.0));
            for j in 0..12 {
                let (a, b) = (ks.matrix.get(i, j).unwrap(), ks.matrix.get(j, i).unwrap());
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert_eq!(
            key_similarity_matrix(&space, &[], Mode::Minor),
            Err(AnalysisError::NoPieces(Mode::Minor))
        );
    }

    #[test]
    fn pieces_without_vocabulary_are_excluded() {
        // Only C major triad known: transposed versions have nothing.
        let space = space_with(vec![ChordSpec::major(0).slice()], 4, 1);
        let piece = vec![ChordSpec::major(0).slice()];
        assert_eq!(
            key_similarity_matrix(&space, &[(piece, Key::new(0, Mode::Major))], Mode::Major),
            Err(AnalysisError::NoPieces(Mode::Major))
        );
    }

    #[test]
    fn analogy_matrix_diagonal_and_missing_entries() {
        let space = space_with(all_triads(), 8, 6);
        let m = analogy_angle_matrix(&space, (FunctionalRole::I, FunctionalRole::V), Mode::Major).unwrap();
        assert_eq!(m.units.as_deref(), Some("degrees"));
        for i in 0..12 {
            assert_eq!(m.get(i, i), Some(0.0));
            for j in 0..12 {
                let v = m.get(i, j).unwrap();
                assert!((0.0..=180.0).contains(&v));
            }
        }
        // C → G against F → C, by hand.
        let id = |c: ChordSpec| space.vocab().id_of(c.slice()).unwrap();
        let expected = space
            .pair_vector_angle(id(ChordSpec::major(0)), id(ChordSpec::major(7)), id(ChordSpec::major(5)), id(ChordSpec::major(0)))
            .unwrap();
        assert_eq!(m.get(0, 11), Some(expected));

        let sparse = space_with(vec![ChordSpec::major(0).slice(), ChordSpec::major(7).slice()], 4, 1);
        let m = analogy_angle_matrix(&sparse, (FunctionalRole::I, FunctionalRole::V), Mode::Major).unwrap();
        assert_eq!(m.get(0, 0), Some(0.0));
        assert_eq!(m.get(0, 1), None);
    }

    #[test]
    fn csv_round_trip() {
        let mut m = SimilarityMatrix::new(vec!["C".into(), "G".into()], vec!["C".into(), "G".into()]);
        m.units = Some("degrees".into());
        m.set(0, 0, Some(0.0));
        m.set(0, 1, Some(121.29999999));
        m.set(1, 0, Some(0.000123456789));
        let csv = m.to_csv();
        assert_eq!(csv, "# units: degrees\n,C,G\nC,0,121.3\nG,0.000123457,NA\n");
        let back = SimilarityMatrix::from_csv(&csv).unwrap();
        assert_eq!(back.to_csv(), csv);
        assert_eq!(back.units.as_deref(), Some("degrees"));
        assert!(SimilarityMatrix::from_csv("C,G\n").is_err());
        assert!(SimilarityMatrix::from_csv(",C,G\nC,1\n").is_err());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(123456789.0), "123457000");
        assert_eq!(format_sig6(-2.5e-9), "-0.0000000025");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn spearman_reference_values() {
        // Reference values from scipy.stats.spearmanr.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[5.0, 6.0, 7.0, 8.0, 7.0]) - 0.8207826816681233).abs() < 1e-12);
        assert!((spearman(&x, &[2.0, 1.0, 4.0, 3.0, 5.0]) - 0.8).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn circle_correlation_of_ideal_matrix_is_one() {
        let labels = key_labels(Mode::Major);
        let mut m = SimilarityMatrix::new(labels.clone(), labels);
        for i in 0..12 {
            for j in 0..12 {
                m.set(i, j, Some(f64::from(circle_steps(CIRCLE_OF_FIFTHS[i], CIRCLE_OF_FIFTHS[j])) * 0.1));
            }
        }
        assert!((circle_correlation(&m) - 1.0).abs() < 1e-12);
        assert_eq!(m.cyclic_superdiagonal().len(), 12);
        assert!(m.cyclic_superdiagonal().iter().all(|v| (v.unwrap() - 0.1).abs() < 1e-15));
    }
}
