//! Numeric features for token sequences: bag-of-words counts, smoothed
//! TF-IDF, and mean-pooled CBOW / skip-gram embeddings.

mod embedding;
mod vocab;

pub use self::embedding::{
    embed_piece, negative_sampling_gradients, negative_sampling_loss, train_embeddings, EmbeddingConfig,
    EmbeddingMode, EmbeddingModel, NegativeSamplingGradients,
};
pub use self::vocab::{build_vocabulary, Vocabulary};

use crate::represent::TokenSequence;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVector {
    /// `(index, weight)` pairs sorted by index, no duplicates.
    Sparse { dim: usize, entries: Vec<(usize, f64)> },
    Dense(Vec<f64>),
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Sparse { dim, .. } => *dim,
            FeatureVector::Dense(v) => v.len(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        match self {
            FeatureVector::Sparse { entries, .. } => entries
                .binary_search_by_key(&index, |&(i, _)| i)
                .map(|p| entries[p].1)
                .unwrap_or(0.0),
            FeatureVector::Dense(v) => v.get(index).copied().unwrap_or(0.0),
        }
    }

    /// Non-zero (or stored) components in index order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match self {
            FeatureVector::Sparse { entries, .. } => Box::new(entries.iter().copied()),
            FeatureVector::Dense(v) => Box::new(v.iter().copied().enumerate()),
        }
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter().map(|(i, x)| x * weights[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Dense(v) => v.clone(),
            FeatureVector::Sparse { dim, entries } => {
                let mut v = vec![0.0; *dim];
                for &(i, x) in entries {
                    v[i] = x;
                }
                v
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|(_, x)| x * x).sum::<f64>().sqrt()
    }
}

/// Raw token counts; out-of-vocabulary tokens are ignored.
pub fn bow_vector(piece: &TokenSequence, vocab: &Vocabulary) -> FeatureVector {
    FeatureVector::Sparse {
        dim: vocab.len(),
        entries: counts(piece, vocab).into_iter().map(|(i, c)| (i, c as f64)).collect(),
    }
}

/// `tf × ln((1 + n_docs) / (1 + df))` with `tf = count / piece length`,
/// then L2-normalized. A vector with no weight left stays all-zero.
pub fn tfidf_vector(piece: &TokenSequence, vocab: &Vocabulary, n_docs: usize) -> FeatureVector {
    let entries = tfidf_raw(piece, vocab, n_docs);
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    let entries = if norm > 0.0 {
        entries.into_iter().map(|(i, w)| (i, w / norm)).collect()
    } else {
        Vec::new()
    };
    FeatureVector::Sparse {
        dim: vocab.len(),
        entries,
    }
}

/// TF-IDF weights before normalization, zero weights dropped.
pub fn tfidf_raw(piece: &TokenSequence, vocab: &Vocabulary, n_docs: usize) -> Vec<(usize, f64)> {
    if piece.is_empty() {
        return Vec::new();
    }
    let len = piece.len() as f64;
    counts(piece, vocab)
        .into_iter()
        .map(|(i, c)| {
            let idf = ((1.0 + n_docs as f64) / (1.0 + vocab.document_frequency(i) as f64)).ln();
            (i, c as f64 / len * idf)
        })
        .filter(|&(_, w)| w != 0.0)
        .collect()
}

fn counts(piece: &TokenSequence, vocab: &Vocabulary) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = piece.tokens.iter().filter_map(|t| vocab.index_of(t)).collect();
    idx.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in idx {
        match out.last_mut() {
            Some((j, c)) if *j == i => *c += 1,
            _ => out.push((i, 1)),
        }
    }
    out
}
