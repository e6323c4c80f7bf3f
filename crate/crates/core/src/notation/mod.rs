//! The `.jp` plain-text numbered-notation score format.
//!
//! A file is a block of `field: value` headers followed by a body of note
//! tokens, with measures separated by `|`:
//!
//! ```text
//! title: Song of Soochow
//! school: south
//! key: 1=D
//! time: 2/4
//!
//! 5/ 6/ 1' | 6 - | 5/. 3// 2!tr 1, |
//! ```
//!
//! See `docs/formats/jp.md` for the grammar.

mod duration;
mod parse;
mod serialize;
mod technique;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

pub use self::duration::{decimal_text, Duration, SUPPORTED_DENOMINATORS};
pub use self::parse::{parse_score, parse_score_unchecked, parse_score_with};
pub use self::serialize::{serialize_note, serialize_score};
pub use self::technique::{Technique, TechniqueRegistry};

use crate::error::{Error, Result};
use crate::pitch::{degree_to_pitch, KeySignature, Pitch};

/// Performance school a piece belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum School {
    North,
    South,
    Other,
}

impl School {
    pub const ALL: [School; 3] = [School::North, School::South, School::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            School::North => "north",
            School::South => "south",
            School::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for School {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for School {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "north" | "northern" | "n" => Ok(School::North),
            "south" | "southern" | "s" => Ok(School::South),
            "other" | "o" => Ok(School::Other),
            _ => Err(Error::Config(format!("unknown school `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeSignature {
    pub beats: u32,
    pub beat_unit: u32,
}

impl TimeSignature {
    pub fn new(beats: u32, beat_unit: u32) -> Result<Self> {
        if beats == 0 || beats > 64 {
            return Err(Error::Config(format!("{beats} beats per measure")));
        }
        if !beat_unit.is_power_of_two() || beat_unit > 64 {
            return Err(Error::Config(format!("beat unit {beat_unit} is not a power of two")));
        }
        Ok(TimeSignature { beats, beat_unit })
    }

    /// Length of a full measure in quarter notes.
    pub fn measure_length(&self) -> Rational64 {
        Rational64::new(4 * self.beats as i64, self.beat_unit as i64)
    }
}

impl Default for TimeSignature {
    fn default() -> Self {
        TimeSignature {
            beats: 4,
            beat_unit: 4,
        }
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.beats, self.beat_unit)
    }
}

/// One note or rest.
///
/// `degree == 0` is a rest and then carries no accidental, octave mark or
/// technique.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NoteEvent {
    pub degree: u8,
    pub accidental: i8,
    pub octave_shift: i8,
    pub duration: Duration,
    pub technique: Technique,
}

impl NoteEvent {
    pub fn note(degree: u8, accidental: i8, octave_shift: i8, duration: Duration) -> Result<Self> {
        let ev = NoteEvent {
            degree,
            accidental,
            octave_shift,
            duration,
            technique: Technique::None,
        };
        ev.check()?;
        Ok(ev)
    }

    pub fn rest(duration: Duration) -> Self {
        NoteEvent {
            degree: 0,
            accidental: 0,
            octave_shift: 0,
            duration,
            technique: Technique::None,
        }
    }

    pub fn with_technique(mut self, technique: Technique) -> Self {
        self.technique = technique;
        self
    }

    pub fn is_rest(&self) -> bool {
        self.degree == 0
    }

    /// Sounding pitch, `None` for rests.
    pub fn pitch(&self, key: &KeySignature) -> Option<Pitch> {
        if self.is_rest() {
            return None;
        }
        degree_to_pitch(self.degree, self.accidental, self.octave_shift, key).ok()
    }

    pub fn check(&self) -> Result<()> {
        if self.degree > 7 {
            return Err(Error::Pitch(format!("degree {} outside 0..=7", self.degree)));
        }
        if !(-1..=1).contains(&self.accidental) {
            return Err(Error::Pitch(format!("accidental {}", self.accidental)));
        }
        if !(-2..=2).contains(&self.octave_shift) {
            return Err(Error::Pitch(format!("octave shift {}", self.octave_shift)));
        }
        if self.is_rest()
            && (self.accidental != 0 || self.octave_shift != 0 || self.technique != Technique::None)
        {
            return Err(Error::Pitch("rest with pitch marks or technique".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Measure {
    pub notes: Vec<NoteEvent>,
}

impl Measure {
    pub fn new(notes: Vec<NoteEvent>) -> Self {
        Measure { notes }
    }

    pub fn duration(&self) -> Rational64 {
        self.notes.iter().map(|n| &n.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub title: String,
    pub school: School,
    pub key: KeySignature,
    pub time: TimeSignature,
    pub measures: Vec<Measure>,
}

impl Score {
    pub fn new(title: impl Into<String>, school: School, key: KeySignature, time: TimeSignature) -> Self {
        Score {
            title: title.into(),
            school,
            key,
            time,
            measures: Vec::new(),
        }
    }

    pub fn notes(&self) -> impl Iterator<Item = &NoteEvent> {
        self.measures.iter().flat_map(|m| m.notes.iter())
    }

    pub fn note_count(&self) -> usize {
        self.measures.iter().map(|m| m.notes.len()).sum()
    }

    /// Copy of this score restricted to `measures[range]`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Score {
        Score {
            title: self.title.clone(),
            school: self.school,
            key: self.key,
            time: self.time,
            measures: self.measures[range].to_vec(),
        }
    }

    /// Checks every note invariant and that the score has at least one
    /// non-empty measure. Measure lengths are checked by
    /// [`validate_measures`].
    pub fn check(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::Config("score has no measures".into()));
        }
        for (i, m) in self.measures.iter().enumerate() {
            if m.notes.is_empty() {
                return Err(Error::Config(format!("measure {} is empty", i + 1)));
            }
            for n in &m.notes {
                n.check()?;
            }
        }
        if self.title.contains('\n') || self.title.trim() != self.title {
            return Err(Error::Config("title must be a trimmed single line".into()));
        }
        Ok(())
    }
}

/// A measure whose length disagrees with the time signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureDiagnostic {
    /// Zero-based measure index.
    pub measure: usize,
    pub expected: Rational64,
    pub actual: Rational64,
}

impl fmt::Display for MeasureDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "measure {} lasts {} quarter notes, expected {}",
            self.measure + 1,
            self.actual,
            self.expected
        )
    }
}

/// Flags every measure whose length differs from the time signature. The
/// first (anacrusis) and last measures may be shorter, never longer.
pub fn validate_measures(score: &Score) -> Vec<MeasureDiagnostic> {
    let expected = score.time.measure_length();
    let last = score.measures.len().saturating_sub(1);
    score
        .measures
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            let actual = m.duration();
            let exempt = (i == 0 || i == last) && actual < expected;
            (actual != expected && !exempt).then_some(MeasureDiagnostic {
                measure: i,
                expected,
                actual,
            })
        })
        .collect()
}
