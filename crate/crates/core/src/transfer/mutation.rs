use std::fmt;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::notation::{Duration, NoteEvent, Score, Technique};
use crate::pitch::{pitch_to_degree, Pitch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    RaisePitch,
    LowerPitch,
    SplitNote,
    MergeNotes,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::RaisePitch,
        MutationKind::LowerPitch,
        MutationKind::SplitNote,
        MutationKind::MergeNotes,
    ];
}

/// Duration fractions a note may be split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitPattern {
    Halves,
    ThirdTwoThirds,
    TwoThirdsThird,
    Thirds,
}

impl SplitPattern {
    pub const ALL: [SplitPattern; 4] = [
        SplitPattern::Halves,
        SplitPattern::ThirdTwoThirds,
        SplitPattern::TwoThirdsThird,
        SplitPattern::Thirds,
    ];

    pub fn fractions(self) -> &'static [(i64, i64)] {
        match self {
            SplitPattern::Halves => &[(1, 2), (1, 2)],
            SplitPattern::ThirdTwoThirds => &[(1, 3), (2, 3)],
            SplitPattern::TwoThirdsThird => &[(2, 3), (1, 3)],
            SplitPattern::Thirds => &[(1, 3), (1, 3), (1, 3)],
        }
    }
}

impl fmt::Display for SplitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.fractions().iter().map(|(p, q)| format!("{p}/{q}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// One melody edit. `position` indexes the score's notes (rests included)
/// in reading order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    RaisePitch { position: usize, semitones: u8 },
    LowerPitch { position: usize, semitones: u8 },
    SplitNote { position: usize, pattern: SplitPattern },
    MergeNotes { position: usize },
}

impl Mutation {
    pub fn kind(&self) -> MutationKind {
        match self {
            Mutation::RaisePitch { .. } => MutationKind::RaisePitch,
            Mutation::LowerPitch { .. } => MutationKind::LowerPitch,
            Mutation::SplitNote { .. } => MutationKind::SplitNote,
            Mutation::MergeNotes { .. } => MutationKind::MergeNotes,
        }
    }

    pub fn position(&self) -> usize {
        match *self {
            Mutation::RaisePitch { position, .. }
            | Mutation::LowerPitch { position, .. }
            | Mutation::SplitNote { position, .. }
            | Mutation::MergeNotes { position } => position,
        }
    }

    /// Change in the number of notes when applied.
    pub fn note_delta(&self) -> isize {
        match self {
            Mutation::SplitNote { pattern, .. } => pattern.fractions().len() as isize - 1,
            Mutation::MergeNotes { .. } => -1,
            _ => 0,
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::RaisePitch { position, semitones } => write!(f, "raise@{position}+{semitones}"),
            Mutation::LowerPitch { position, semitones } => write!(f, "lower@{position}-{semitones}"),
            Mutation::SplitNote { position, pattern } => write!(f, "split@{position}{pattern}"),
            Mutation::MergeNotes { position } => write!(f, "merge@{position}"),
        }
    }
}

/// Inclusive playable pitch range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PitchRange {
    pub low: Pitch,
    pub high: Pitch,
}

impl Default for PitchRange {
    /// D4 to E6.
    fn default() -> Self {
        PitchRange {
            low: Pitch::from_midi(62),
            high: Pitch::from_midi(88),
        }
    }
}

impl PitchRange {
    pub fn contains(&self, p: Pitch) -> bool {
        (self.low.midi()..=self.high.midi()).contains(&p.midi())
    }
}

/// `(measure, index within measure)` of every note.
fn locate(score: &Score) -> Vec<(usize, usize)> {
    score
        .measures
        .iter()
        .enumerate()
        .flat_map(|(m, meas)| (0..meas.notes.len()).map(move |i| (m, i)))
        .collect()
}

fn repitched(note: &NoteEvent, score: &Score, delta: i32, range: &PitchRange) -> Result<NoteEvent> {
    let pitch = note
        .pitch(&score.key)
        .ok_or_else(|| Error::Mutation("cannot change the pitch of a rest".into()))?;
    let target = pitch.transposed(delta);
    if !range.contains(target) {
        return Err(Error::Mutation(format!("{target} outside {}..={}", range.low, range.high)));
    }
    let (degree, accidental, octave) = pitch_to_degree(target, &score.key);
    let shift = i8::try_from(octave).map_err(|_| Error::Mutation(format!("{target} not notatable")))?;
    let mut out = NoteEvent::note(degree, accidental, shift, note.duration)
        .map_err(|_| Error::Mutation(format!("{target} not notatable in this key")))?;
    out.technique = note.technique.clone();
    Ok(out)
}

fn split_parts(note: &NoteEvent, pattern: SplitPattern) -> Result<Vec<NoteEvent>> {
    if note.is_rest() {
        return Err(Error::Mutation("cannot split a rest".into()));
    }
    pattern
        .fractions()
        .iter()
        .enumerate()
        .map(|(k, &(p, q))| {
            let d = Duration::from_ratio(note.duration.ratio() * Rational64::new(p, q))
                .map_err(|e| Error::Mutation(format!("split {pattern}: {e}")))?;
            let mut part = note.clone();
            part.duration = d;
            if k > 0 {
                part.technique = Technique::None;
            }
            Ok(part)
        })
        .collect()
}

/// Applies one mutation, returning a new score. Measure durations are
/// preserved exactly; a note leaving `range` or a duration leaving the
/// supported set is an error.
pub fn apply_mutation(score: &Score, m: &Mutation, range: &PitchRange) -> Result<Score> {
    let slots = locate(score);
    let &(mi, ni) = slots
        .get(m.position())
        .ok_or_else(|| Error::Mutation(format!("position {} out of bounds", m.position())))?;
    let note = &score.measures[mi].notes[ni];
    let mut out = score.clone();
    let notes = &mut out.measures[mi].notes;
    match *m {
        Mutation::RaisePitch { semitones, .. } | Mutation::LowerPitch { semitones, .. } => {
            if !(1..=2).contains(&semitones) {
                return Err(Error::Mutation(format!("{semitones} semitones")));
            }
            let delta = if m.kind() == MutationKind::RaisePitch {
                semitones as i32
            } else {
                -(semitones as i32)
            };
            notes[ni] = repitched(note, score, delta, range)?;
        }
        Mutation::SplitNote { pattern, .. } => {
            let parts = split_parts(note, pattern)?;
            notes.splice(ni..=ni, parts);
        }
        Mutation::MergeNotes { .. } => {
            let next = notes
                .get(ni + 1)
                .ok_or_else(|| Error::Mutation("merge across a barline".into()))?;
            if note.is_rest() || next.is_rest() {
                return Err(Error::Mutation("cannot merge rests".into()));
            }
            let d = Duration::from_ratio(note.duration.ratio() + next.duration.ratio())
                .map_err(|e| Error::Mutation(format!("merge: {e}")))?;
            let mut merged = note.clone();
            merged.duration = d;
            notes.splice(ni..=ni + 1, [merged]);
        }
    }
    Ok(out)
}

/// Every applicable mutation of one kind, in position order.
pub fn valid_mutations(score: &Score, kind: MutationKind, range: &PitchRange) -> Vec<Mutation> {
    let mut out = Vec::new();
    for (pos, &(mi, ni)) in locate(score).iter().enumerate() {
        let notes = &score.measures[mi].notes;
        let note = &notes[ni];
        if note.is_rest() {
            continue;
        }
        match kind {
            MutationKind::RaisePitch | MutationKind::LowerPitch => {
                for s in [1u8, 2] {
                    let delta = if kind == MutationKind::RaisePitch { s as i32 } else { -(s as i32) };
                    if repitched(note, score, delta, range).is_ok() {
                        out.push(if kind == MutationKind::RaisePitch {
                            Mutation::RaisePitch { position: pos, semitones: s }
                        } else {
                            Mutation::LowerPitch { position: pos, semitones: s }
                        });
                    }
                }
            }
            MutationKind::SplitNote => {
                for pattern in SplitPattern::ALL {
                    if split_parts(note, pattern).is_ok() {
                        out.push(Mutation::SplitNote { position: pos, pattern });
                    }
                }
            }
            MutationKind::MergeNotes => {
                if let Some(next) = notes.get(ni + 1) {
                    if !next.is_rest() && Duration::from_ratio(note.duration.ratio() + next.duration.ratio()).is_ok() {
                        out.push(Mutation::MergeNotes { position: pos });
                    }
                }
            }
        }
    }
    out
}
