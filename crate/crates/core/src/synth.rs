//! Seeded two-style corpus with disjoint token supports: the north style
//! plays degrees 1-3 an octave up in eighths and sixteenths, the south style
//! degrees 5-7 at the home octave in quarters, halves and dotted values.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::notation::{Duration, Measure, NoteEvent, School, Score, Technique, TimeSignature};
use crate::pitch::KeySignature;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    /// Total pieces, split evenly between the two schools (north first).
    pub pieces: usize,
    pub measures: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pieces: 200,
            measures: 4,
            seed: 0,
        }
    }
}

fn dur(p: i64, q: i64) -> Duration {
    Duration::new(p, q).expect("synthetic durations are supported")
}

/// Fills one 2/4 measure with rhythm cells of the school.
fn rhythm(school: School, rng: &mut ChaCha8Rng) -> Vec<Duration> {
    let cells: Vec<Vec<Duration>> = match school {
        School::North => vec![
            vec![dur(1, 2), dur(1, 2)],
            vec![dur(1, 4), dur(1, 4), dur(1, 2)],
            vec![dur(1, 2), dur(1, 4), dur(1, 4)],
            vec![dur(1, 4); 4],
        ],
        _ => vec![vec![dur(1, 1)], vec![dur(2, 1)], vec![dur(3, 2), dur(1, 2)]],
    };
    let mut out = Vec::new();
    let mut filled = num_rational::Rational64::from_integer(0);
    let two = num_rational::Rational64::from_integer(2);
    while filled < two {
        let cell = cells.choose(rng).expect("non-empty");
        let len: num_rational::Rational64 = cell.iter().sum();
        if filled + len > two {
            continue;
        }
        filled += len;
        out.extend(cell.iter().copied());
    }
    out
}

fn technique(school: School, degree: u8, d: Duration, first: bool, rng: &mut ChaCha8Rng) -> Technique {
    let r: f64 = rng.gen();
    match school {
        School::North => {
            if d == dur(1, 4) && r < 0.7 {
                Technique::Tonguing
            } else if degree == 3 && r < 0.5 {
                Technique::FlutterTonguing
            } else if first && r < 0.3 {
                Technique::Tonguing
            } else {
                Technique::None
            }
        }
        _ => {
            if d >= dur(3, 2) && r < 0.7 {
                Technique::Trill
            } else if first && r < 0.4 {
                Technique::UpperAcciaccatura
            } else if degree == 6 && r < 0.2 {
                Technique::Portamento
            } else {
                Technique::None
            }
        }
    }
}

/// One synthetic piece of the given school.
pub fn synth_piece(school: School, index: usize, measures: usize, rng: &mut ChaCha8Rng) -> Score {
    let mut score = Score::new(
        format!("{}-{:03}", school.as_str(), index + 1),
        school,
        KeySignature::default(),
        TimeSignature::new(2, 4).expect("2/4 is valid"),
    );
    let (degrees, shift): (&[u8], i8) = match school {
        School::North => (&[1, 2, 3], 1),
        _ => (&[5, 6, 7], 0),
    };
    for _ in 0..measures {
        let notes = rhythm(school, rng)
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let degree = *degrees.choose(rng).expect("non-empty");
                let t = technique(school, degree, d, i == 0, rng);
                NoteEvent::note(degree, 0, shift, d)
                    .expect("synthetic notes are valid")
                    .with_technique(t)
            })
            .collect();
        score.measures.push(Measure::new(notes));
    }
    score
}

/// `config.pieces` pieces, the first half north and the rest south.
pub fn synth_corpus(config: &SynthConfig) -> Vec<Score> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let north = config.pieces / 2 + config.pieces % 2;
    (0..config.pieces)
        .map(|i| {
            if i < north {
                synth_piece(School::North, i, config.measures, &mut rng)
            } else {
                synth_piece(School::South, i - north, config.measures, &mut rng)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::validate_measures;
    use crate::represent::tokenize;
    use std::collections::HashSet;

    #[test]
    fn disjoint_and_well_formed() {
        let corpus = synth_corpus(&SynthConfig { pieces: 40, ..Default::default() });
        assert_eq!(corpus.iter().filter(|s| s.school == School::North).count(), 20);
        let mut sets: [HashSet<String>; 2] = Default::default();
        for s in &corpus {
            assert!(validate_measures(s).is_empty());
            assert_eq!(s.measures.len(), 4);
            sets[(s.school == School::South) as usize].extend(tokenize(s).tokens);
        }
        assert!(sets[0].is_disjoint(&sets[1]));
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig { pieces: 10, measures: 2, seed: 7 };
        assert_eq!(synth_corpus(&cfg), synth_corpus(&cfg));
    }
}
