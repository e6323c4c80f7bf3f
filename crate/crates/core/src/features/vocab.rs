use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::error::{model_format, Error, Result};
use crate::represent::TokenSequence;

/// Token ↔ index mapping in first-seen order, with document frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.df[index]
    }

    /// Number of documents the vocabulary was built from.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    fn push(&mut self, token: &str, df: usize) -> usize {
        let i = self.tokens.len();
        self.index.insert(token.to_string(), i);
        self.tokens.push(token.to_string());
        self.df.push(df);
        i
    }

    /// `vocab <n_docs> <size>` followed by one `<token> <df>` line per entry.
    pub fn write_text(&self, out: &mut String) {
        let _ = writeln!(out, "vocab {} {}", self.n_docs, self.len());
        for (t, df) in self.tokens.iter().zip(&self.df) {
            let _ = writeln!(out, "{t} {df}");
        }
    }

    pub(crate) fn read_text<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (line_no, header) = lines.next().ok_or_else(|| model_format(0, "missing vocabulary"))?;
        let mut parts = header.split_whitespace();
        let (n_docs, size) = match (parts.next(), parts.next(), parts.next()) {
            (Some("vocab"), Some(n), Some(s)) => (
                n.parse().map_err(|_| model_format(line_no, "bad document count"))?,
                s.parse::<usize>().map_err(|_| model_format(line_no, "bad vocabulary size"))?,
            ),
            _ => return Err(model_format(line_no, "expected `vocab <n_docs> <size>`")),
        };
        let mut vocab = Vocabulary {
            n_docs,
            ..Default::default()
        };
        for _ in 0..size {
            let (line_no, line) = lines.next().ok_or_else(|| model_format(line_no, "truncated vocabulary"))?;
            let (tok, df) = line
                .split_once(' ')
                .ok_or_else(|| model_format(line_no, "expected `<token> <df>`"))?;
            let df = df.trim().parse().map_err(|_| model_format(line_no, "bad df"))?;
            if vocab.contains(tok) {
                return Err(model_format(line_no, format!("duplicate token `{tok}`")));
            }
            vocab.push(tok, df);
        }
        Ok(vocab)
    }
}

/// Collects every distinct token in first-seen order and counts, per token,
/// how many pieces contain it.
pub fn build_vocabulary(corpus: &[TokenSequence]) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocab = Vocabulary {
        n_docs: corpus.len(),
        ..Default::default()
    };
    for piece in corpus {
        let mut seen = HashSet::new();
        for tok in &piece.tokens {
            let i = match vocab.index_of(tok) {
                Some(i) => i,
                None => vocab.push(tok, 0),
            };
            if seen.insert(i) {
                vocab.df[i] += 1;
            }
        }
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::School;

    fn piece(s: &str) -> TokenSequence {
        let toks: Vec<&str> = s.split_whitespace().collect();
        TokenSequence::from_tokens(&toks, School::South)
    }

    #[test]
    fn counts_document_frequency() {
        let v = build_vocabulary(&[piece("C41 D41"), piece("C41")]).unwrap();
        assert_eq!(v.tokens(), ["C41", "D41"]);
        assert_eq!(v.document_frequency(v.index_of("C41").unwrap()), 2);
        assert_eq!(v.document_frequency(v.index_of("D41").unwrap()), 1);
        assert_eq!(v.n_docs(), 2);
    }

    #[test]
    fn repeated_token_is_one_entry() {
        let v = build_vocabulary(&[piece("E42 E42 E42")]).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.document_frequency(0), 1);
    }

    #[test]
    fn first_seen_order() {
        let v = build_vocabulary(&[piece("G41 C41"), piece("A41 C41 B41")]).unwrap();
        assert_eq!(v.tokens(), ["G41", "C41", "A41", "B41"]);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_vocabulary(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn text_round_trip() {
        let v = build_vocabulary(&[piece("C41 D40.5"), piece("C41 R1")]).unwrap();
        let mut s = String::new();
        v.write_text(&mut s);
        let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l));
        assert_eq!(Vocabulary::read_text(&mut lines).unwrap(), v);
    }
}
