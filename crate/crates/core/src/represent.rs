//! Note tokens: chromatic pitch name, octave, and quarter-length duration
//! spliced into one word, e.g. `C41` for a quarter-note C4 or `R0.5` for an
//! eighth rest.

use std::ops::Range;

use crate::notation::{NoteEvent, School, Score};
use crate::pitch::KeySignature;

/// Where a token sequence came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceSource {
    pub title: String,
    /// Zero-based, half-open range of measures.
    pub measures: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub label: School,
    pub source: PieceSource,
}

impl TokenSequence {
    /// An unlabelled sequence, mostly for tests and ad-hoc queries.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], label: School) -> Self {
        TokenSequence {
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            label,
            source: PieceSource {
                title: String::new(),
                measures: 0..0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizeOptions {
    pub include_rests: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        TokenizeOptions { include_rests: true }
    }
}

pub const DEFAULT_WINDOW: usize = 4;

pub fn note_token(note: &NoteEvent, key: &KeySignature) -> String {
    let dur = note.duration.token_text();
    match note.pitch(key) {
        Some(p) => format!("{p}{dur}"),
        None => format!("R{dur}"),
    }
}

pub fn tokenize(score: &Score) -> TokenSequence {
    tokenize_with(score, TokenizeOptions::default())
}

pub fn tokenize_with(score: &Score, options: TokenizeOptions) -> TokenSequence {
    let tokens = score
        .notes()
        .filter(|n| options.include_rests || !n.is_rest())
        .map(|n| note_token(n, &score.key))
        .collect();
    TokenSequence {
        tokens,
        label: score.school,
        source: PieceSource {
            title: score.title.clone(),
            measures: 0..score.measures.len(),
        },
    }
}

/// Measure ranges of the non-overlapping windows; a short remainder is
/// dropped.
pub fn window_ranges(measure_count: usize, window: usize) -> Vec<Range<usize>> {
    if window == 0 {
        return Vec::new();
    }
    (0..measure_count / window)
        .map(|i| i * window..(i + 1) * window)
        .collect()
}

/// Cuts a score into consecutive `window`-measure pieces and tokenizes each.
pub fn segment(score: &Score, window: usize) -> Vec<TokenSequence> {
    segment_with(score, window, TokenizeOptions::default())
}

pub fn segment_with(score: &Score, window: usize, options: TokenizeOptions) -> Vec<TokenSequence> {
    window_ranges(score.measures.len(), window)
        .into_iter()
        .map(|range| {
            let mut piece = tokenize_with(&score.slice(range.clone()), options);
            piece.source.measures = range;
            piece
        })
        .collect()
}

/// The pitch part (`C#4`, or `R` for rests) and duration part (`0.5`, `1/3`)
/// of a token.
pub fn split_token(token: &str) -> (&str, &str) {
    if let Some(rest) = token.strip_prefix('R') {
        return ("R", rest);
    }
    // pitch name letters, then a single octave digit
    match token.find(|c: char| c.is_ascii_digit()) {
        Some(i) => token.split_at(i + 1),
        None => (token, ""),
    }
}

/// Pitch class name of a token (`C#`), `R` for rests.
pub fn token_pitch_class(token: &str) -> &str {
    let (pitch, _) = split_token(token);
    if pitch == "R" {
        return "R";
    }
    pitch.trim_end_matches(|c: char| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::parse_score;

    #[test]
    fn quarter_do_is_c41() {
        let s = parse_score("key: 1=C\n1").unwrap();
        assert_eq!(tokenize(&s).tokens, ["C41"]);
    }

    #[test]
    fn rest_and_triplet_tokens() {
        let s = parse_score("key: 1=C\ntime: 2/4\n0/ 5{1/3} 5{1/3} 5{1/3} 1/").unwrap();
        assert_eq!(tokenize(&s).tokens, ["R0.5", "G41/3", "G41/3", "G41/3", "C40.5"]);
        let no_rests = tokenize_with(&s, TokenizeOptions { include_rests: false });
        assert_eq!(no_rests.len(), 4);
    }

    #[test]
    fn technique_is_not_part_of_the_token() {
        let s = parse_score("1!tk 1").unwrap();
        let t = tokenize(&s).tokens;
        assert_eq!(t[0], t[1]);
    }

    fn measures(n: usize) -> Score {
        let body = vec!["1 2"; n].join(" | ");
        parse_score(&format!("time: 2/4\nschool: south\n{body}")).unwrap()
    }

    #[test]
    fn segment_counts() {
        let pieces = segment(&measures(10), 4);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].source.measures, 0..4);
        assert_eq!(pieces[1].source.measures, 4..8);
        assert!(pieces.iter().all(|p| p.label == School::South && p.len() == 8));
        assert_eq!(segment(&measures(4), 4).len(), 1);
        assert!(segment(&measures(3), 4).is_empty());
    }

    #[test]
    fn token_parts() {
        assert_eq!(split_token("C#41/3"), ("C#4", "1/3"));
        assert_eq!(split_token("R0.5"), ("R", "0.5"));
        assert_eq!(token_pitch_class("C#41/3"), "C#");
        assert_eq!(token_pitch_class("G52"), "G");
        assert_eq!(token_pitch_class("R1"), "R");
    }
}
