//! Chromatic pitch arithmetic and the movable-do mapping from scale degrees.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Semitone offsets of the major scale degrees 1..=7 above the tonic.
pub const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];

const NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// One of the twelve chromatic pitch classes, spelled with sharps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    pub fn new(index: u8) -> Result<Self> {
        if index < 12 {
            Ok(PitchClass(index))
        } else {
            Err(Error::Pitch(format!("pitch class index {index} out of range")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize]
    }

    /// MusicXML step letter and alteration for the sharp spelling.
    pub fn step_alter(self) -> (char, i8) {
        let name = self.name();
        let step = name.as_bytes()[0] as char;
        let alter = if name.len() > 1 { 1 } else { 0 };
        (step, alter)
    }

    pub fn all() -> impl Iterator<Item = PitchClass> {
        (0..12).map(PitchClass)
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PitchClass {
    type Err = Error;

    /// Accepts sharp and flat spellings (`C#`, `Db`, `Bb`, `E#`...).
    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        let base = match chars.next() {
            Some('C') => 0,
            Some('D') => 2,
            Some('E') => 4,
            Some('F') => 5,
            Some('G') => 7,
            Some('A') => 9,
            Some('B') => 11,
            _ => return Err(Error::Pitch(format!("`{s}` is not a pitch class"))),
        };
        let mut offset: i32 = 0;
        for c in chars {
            match c {
                '#' => offset += 1,
                'b' => offset -= 1,
                _ => return Err(Error::Pitch(format!("`{s}` is not a pitch class"))),
            }
        }
        if offset.abs() > 1 {
            return Err(Error::Pitch(format!("`{s}` has too many accidentals")));
        }
        Ok(PitchClass((base + offset).rem_euclid(12) as u8))
    }
}

/// A concrete pitch, stored as a MIDI-style semitone number (C4 = 60).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pitch(i32);

impl Pitch {
    pub fn from_midi(midi: i32) -> Self {
        Pitch(midi)
    }

    pub fn new(class: PitchClass, octave: i32) -> Self {
        Pitch((octave + 1) * 12 + class.0 as i32)
    }

    pub fn midi(self) -> i32 {
        self.0
    }

    pub fn class(self) -> PitchClass {
        PitchClass(self.0.rem_euclid(12) as u8)
    }

    pub fn octave(self) -> i32 {
        self.0.div_euclid(12) - 1
    }

    pub fn transposed(self, semitones: i32) -> Self {
        Pitch(self.0 + semitones)
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class(), self.octave())
    }
}

impl FromStr for Pitch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s
            .find(|c: char| c.is_ascii_digit() || c == '-')
            .ok_or_else(|| Error::Pitch(format!("`{s}` has no octave")))?;
        let class: PitchClass = s[..split].parse()?;
        let octave: i32 = s[split..]
            .parse()
            .map_err(|_| Error::Pitch(format!("`{s}` has a bad octave")))?;
        Ok(Pitch::new(class, octave))
    }
}

/// The `1=X` declaration: which pitch class scale degree 1 sounds as, and in
/// which octave an unmarked degree 1 lies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySignature {
    pub tonic: PitchClass,
    pub octave: i32,
}

impl KeySignature {
    pub const DEFAULT_OCTAVE: i32 = 4;

    pub fn new(tonic: PitchClass) -> Self {
        KeySignature {
            tonic,
            octave: Self::DEFAULT_OCTAVE,
        }
    }

    pub fn tonic_pitch(&self) -> Pitch {
        Pitch::new(self.tonic, self.octave)
    }

    /// Circle-of-fifths position for a major key, flats negative.
    pub fn fifths(&self) -> i32 {
        let f = (self.tonic.0 as i32 * 7).rem_euclid(12);
        if f > 6 {
            f - 12
        } else {
            f
        }
    }
}

impl Default for KeySignature {
    fn default() -> Self {
        KeySignature::new(PitchClass::C)
    }
}

/// Sounding pitch of a numbered-notation note.
pub fn degree_to_pitch(
    degree: u8,
    accidental: i8,
    octave_shift: i8,
    key: &KeySignature,
) -> Result<Pitch> {
    if !(1..=7).contains(&degree) {
        return Err(Error::Pitch(format!("scale degree {degree} outside 1..=7")));
    }
    let offset = MAJOR_SCALE[degree as usize - 1] + accidental as i32 + 12 * octave_shift as i32;
    Ok(key.tonic_pitch().transposed(offset))
}

/// Canonical numbered spelling of a pitch in a key: natural degree when one
/// matches, else the sharpened degree below. Returns `(degree, accidental,
/// octave_shift)`.
pub fn pitch_to_degree(pitch: Pitch, key: &KeySignature) -> (u8, i8, i32) {
    let rel = pitch.midi() - key.tonic_pitch().midi();
    let shift = rel.div_euclid(12);
    let within = rel.rem_euclid(12);
    if let Some(i) = MAJOR_SCALE.iter().position(|&o| o == within) {
        return (i as u8 + 1, 0, shift);
    }
    let i = MAJOR_SCALE
        .iter()
        .position(|&o| o == within - 1)
        .expect("every non-scale semitone sits one above a scale degree");
    (i as u8 + 1, 1, shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(name: &str) -> KeySignature {
        KeySignature::new(name.parse().unwrap())
    }

    #[test]
    fn do_in_c_is_c4() {
        assert_eq!(degree_to_pitch(1, 0, 0, &key("C")).unwrap().to_string(), "C4");
    }

    #[test]
    fn sol_up_an_octave() {
        assert_eq!(degree_to_pitch(5, 0, 1, &key("C")).unwrap().to_string(), "G5");
    }

    #[test]
    fn ti_in_g_major() {
        assert_eq!(degree_to_pitch(7, 0, 0, &key("G")).unwrap().to_string(), "F#5");
    }

    #[test]
    fn degree_out_of_range() {
        assert!(degree_to_pitch(0, 0, 0, &key("C")).is_err());
        assert!(degree_to_pitch(8, 0, 0, &key("C")).is_err());
    }

    #[test]
    fn parse_pitch_classes() {
        assert_eq!("Db".parse::<PitchClass>().unwrap().name(), "C#");
        assert_eq!("Cb".parse::<PitchClass>().unwrap().name(), "B");
        assert!("H".parse::<PitchClass>().is_err());
        assert!("C##".parse::<PitchClass>().is_err());
        assert_eq!("F#5".parse::<Pitch>().unwrap().midi(), 78);
    }

    #[test]
    fn fifths_of_common_keys() {
        let cases = [("C", 0), ("G", 1), ("D", 2), ("F", -1), ("Bb", -2), ("F#", 6), ("Eb", -3)];
        for (k, f) in cases {
            assert_eq!(key(k).fifths(), f, "{k}");
        }
    }

    #[test]
    fn canonical_spelling_round_trips() {
        for tonic in PitchClass::all() {
            let k = KeySignature::new(tonic);
            for midi in 40..100 {
                let p = Pitch::from_midi(midi);
                let (d, a, s) = pitch_to_degree(p, &k);
                assert_eq!(degree_to_pitch(d, a, s as i8, &k).unwrap(), p);
                assert!(a == 0 || a == 1);
            }
        }
    }
}
