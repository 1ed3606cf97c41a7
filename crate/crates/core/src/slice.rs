//! Pitch-class slices: the "words" of the model.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Pitch-class spelling used in labels (0 = C).
pub const PITCH_CLASS_NAMES: [&str; 12] = [
    "C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid slice form {0:?}")]
pub struct ParseSliceError(pub String);

/// The set of pitch classes sounding during one beat.
///
/// Stored as a 12-bit mask. The canonical text form lists the classes in
/// ascending order joined by `.` (`"0.4.7"`); the empty slice (a rest) is
/// `"R"`. `Ord` follows the canonical text form lexicographically, which is
/// the tie-break order used throughout the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Slice(u16);

impl Slice {
    pub const REST: Slice = Slice(0);

    pub fn from_mask(mask: u16) -> Slice {
        Slice(mask & 0x0fff)
    }

    pub fn from_pitch_classes<I: IntoIterator<Item = u8>>(pcs: I) -> Slice {
        Slice(pcs.into_iter().fold(0, |m, pc| m | 1 << (pc % 12)))
    }

    pub fn mask(self) -> u16 {
        self.0
    }

    pub fn is_rest(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, pc: u8) -> bool {
        pc < 12 && self.0 & (1 << pc) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Pitch classes in ascending order.
    pub fn pitch_classes(self) -> impl Iterator<Item = u8> {
        (0..12u8).filter(move |&pc| self.0 & (1 << pc) != 0)
    }

    /// Shift every pitch class by `semitones` (mod 12).
    pub fn transpose(self, semitones: i32) -> Slice {
        let k = semitones.rem_euclid(12) as u32;
        let m = u32::from(self.0);
        Slice((((m << k) | (m >> (12 - k))) & 0x0fff) as u16)
    }
}

/// Octave-equivalence reduction of a set of MIDI pitches.
pub fn make_slice<I: IntoIterator<Item = u8>>(pitches: I) -> Slice {
    Slice::from_pitch_classes(pitches)
}

/// Transpose a whole sequence of slices.
pub fn transpose_piece(slices: &[Slice], semitones: i32) -> Vec<Slice> {
    slices.iter().map(|s| s.transpose(semitones)).collect()
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_rest() {
            return f.write_str("R");
        }
        for (i, pc) in self.pitch_classes().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{pc}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Slice({self})")
    }
}

impl FromStr for Slice {
    type Err = ParseSliceError;

    /// Accepts only the canonical form: strictly ascending, no duplicates.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "R" {
            return Ok(Slice::REST);
        }
        let err = || ParseSliceError(s.to_string());
        let mut mask = 0u16;
        let mut prev: Option<u8> = None;
        for part in s.split('.') {
            // Reject "+1", "01" and similar non-canonical digits.
            if part.is_empty() || (part.len() > 1 && part.starts_with('0')) || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let pc: u8 = part.parse().map_err(|_| err())?;
            if pc > 11 || prev.is_some_and(|p| p >= pc) {
                return Err(err());
            }
            mask |= 1 << pc;
            prev = Some(pc);
        }
        Ok(Slice(mask))
    }
}

impl Ord for Slice {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        self.to_string().cmp(&other.to_string())
    }
}

impl PartialOrd for Slice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn octave_equivalence() {
        assert_eq!(make_slice([60, 72]).to_string(), "0");
        // Opening beats of the Mazurka example: E5, then E5 + A3, then
        // E3, A3, E4, E5, F5.
        assert_eq!(make_slice([76]).to_string(), "4");
        assert_eq!(make_slice([76, 57]).to_string(), "4.9");
        assert_eq!(make_slice([52, 57, 64, 76, 77]).to_string(), "4.5.9");
    }

    #[test]
    fn rest_form() {
        assert_eq!(make_slice([]).to_string(), "R");
        assert_eq!("R".parse::<Slice>().unwrap(), Slice::REST);
    }

    #[test]
    fn parse_rejects_non_canonical_forms() {
        for bad in ["", "4.0", "0.0", "12", "0..4", "a", "04", "0.4.", "UNK", " 0"] {
            assert!(bad.parse::<Slice>().is_err(), "{bad:?}");
        }
        assert_eq!("0.4.7".parse::<Slice>().unwrap(), make_slice([60, 64, 67]));
        assert_eq!("10.11".parse::<Slice>().unwrap().len(), 2);
    }

    #[test]
    fn transpose_examples() {
        let c = "0.4.7".parse::<Slice>().unwrap();
        assert_eq!(c.transpose(7).to_string(), "2.7.11");
        assert_eq!(c.transpose(12), c);
        assert_eq!(c.transpose(5).transpose(7), c);
        assert_eq!(c.transpose(-5), c.transpose(7));
    }

    #[test]
    fn ordering_is_lexicographic_on_canonical_form() {
        let mut v: Vec<Slice> = ["R", "2", "10", "0.4.7", "0"].iter().map(|s| s.parse().unwrap()).collect();
        v.sort();
        let forms: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        assert_eq!(forms, ["0", "0.4.7", "10", "2", "R"]);
    }

    proptest! {
        #[test]
        fn canonical_form_round_trips(mask in 0u16..4096) {
            let s = Slice::from_mask(mask);
            prop_assert_eq!(s.to_string().parse::<Slice>().unwrap(), s);
        }

        #[test]
        fn canonical_form_is_injective(a in 0u16..4096, b in 0u16..4096) {
            let (sa, sb) = (Slice::from_mask(a), Slice::from_mask(b));
            prop_assert_eq!(sa.to_string() == sb.to_string(), a == b);
        }

        #[test]
        fn twelve_unit_steps_are_identity(mask in 0u16..4096, k in -30i32..30) {
            let s = Slice::from_mask(mask);
            let stepped = (0..12).fold(s, |acc, _| acc.transpose(1));
            prop_assert_eq!(stepped, s);
            prop_assert_eq!(s.transpose(k).transpose(-k), s);
            prop_assert_eq!(s.transpose(k).len(), s.len());
        }

        #[test]
        fn make_slice_is_pitch_mod_12(pitches in proptest::collection::btree_set(0u8..128, 0..10)) {
            let s = make_slice(pitches.iter().copied());
            let expected: std::collections::BTreeSet<u8> = pitches.iter().map(|p| p % 12).collect();
            prop_assert_eq!(s.pitch_classes().collect::<std::collections::BTreeSet<_>>(), expected);
        }
    }
}
