use std::fmt;
use std::str::FromStr;

use super::model::{train_classifier, ClassifierConfig, Example, LogLinearModel, Prediction};
use crate::error::{model_format, Error, Result};
use crate::features::{
    bow_vector, build_vocabulary, embed_piece, tfidf_vector, train_embeddings, EmbeddingConfig, EmbeddingMode,
    EmbeddingModel, FeatureVector, Vocabulary,
};
use crate::notation::School;
use crate::represent::TokenSequence;

const FORMAT_HEADER: &str = "dizi-classifier 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureScheme {
    Bow,
    Tfidf,
    Cbow,
    SkipGram,
}

impl FeatureScheme {
    pub const ALL: [FeatureScheme; 4] = [
        FeatureScheme::Bow,
        FeatureScheme::Tfidf,
        FeatureScheme::Cbow,
        FeatureScheme::SkipGram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureScheme::Bow => "bow",
            FeatureScheme::Tfidf => "tfidf",
            FeatureScheme::Cbow => "cbow",
            FeatureScheme::SkipGram => "skipgram",
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bow" | "bag-of-words" => Ok(FeatureScheme::Bow),
            "tfidf" | "tf-idf" => Ok(FeatureScheme::Tfidf),
            "cbow" => Ok(FeatureScheme::Cbow),
            "skipgram" | "skip-gram" => Ok(FeatureScheme::SkipGram),
            _ => Err(Error::Config(format!("unknown feature scheme `{s}`"))),
        }
    }
}

/// Everything needed to train a [`StyleClassifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scheme: FeatureScheme,
    pub classifier: ClassifierConfig,
    /// Used by the CBOW and skip-gram schemes; `mode` is overridden by the
    /// scheme and `seed` by `classifier.seed`.
    pub embedding: EmbeddingConfig,
}

impl PipelineConfig {
    pub fn new(scheme: FeatureScheme, seed: u64) -> Self {
        PipelineConfig {
            scheme,
            classifier: ClassifierConfig {
                seed,
                ..Default::default()
            },
            embedding: EmbeddingConfig::new(EmbeddingMode::SkipGram, seed),
        }
    }
}

/// A fitted feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub enum Featurizer {
    Bow(Vocabulary),
    Tfidf(Vocabulary),
    Embedding(EmbeddingModel),
}

impl Featurizer {
    /// Fits vocabulary, document frequencies or embeddings on `corpus` only.
    pub fn fit(corpus: &[TokenSequence], config: &PipelineConfig) -> Result<Self> {
        Ok(match config.scheme {
            FeatureScheme::Bow => Featurizer::Bow(build_vocabulary(corpus)?),
            FeatureScheme::Tfidf => Featurizer::Tfidf(build_vocabulary(corpus)?),
            FeatureScheme::Cbow | FeatureScheme::SkipGram => {
                let mode = if config.scheme == FeatureScheme::Cbow {
                    EmbeddingMode::Cbow
                } else {
                    EmbeddingMode::SkipGram
                };
                let cfg = EmbeddingConfig {
                    mode,
                    seed: config.classifier.seed,
                    ..config.embedding.clone()
                };
                Featurizer::Embedding(train_embeddings(corpus, &cfg)?)
            }
        })
    }

    pub fn scheme(&self) -> FeatureScheme {
        match self {
            Featurizer::Bow(_) => FeatureScheme::Bow,
            Featurizer::Tfidf(_) => FeatureScheme::Tfidf,
            Featurizer::Embedding(m) => match m.config.mode {
                EmbeddingMode::Cbow => FeatureScheme::Cbow,
                EmbeddingMode::SkipGram => FeatureScheme::SkipGram,
            },
        }
    }

    pub fn transform(&self, piece: &TokenSequence) -> FeatureVector {
        match self {
            Featurizer::Bow(v) => bow_vector(piece, v),
            Featurizer::Tfidf(v) => tfidf_vector(piece, v, v.n_docs()),
            Featurizer::Embedding(m) => embed_piece(piece, m),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Featurizer::Bow(v) | Featurizer::Tfidf(v) => v.len(),
            Featurizer::Embedding(m) => m.dim(),
        }
    }
}

/// Featurizer plus log-linear model: classifies token sequences directly.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleClassifier {
    pub featurizer: Featurizer,
    pub model: LogLinearModel,
}

impl StyleClassifier {
    pub fn train(corpus: &[TokenSequence], config: &PipelineConfig) -> Result<Self> {
        let featurizer = Featurizer::fit(corpus, config)?;
        let data: Vec<Example> = corpus.iter().map(|p| (featurizer.transform(p), p.label)).collect();
        let model = train_classifier(&data, &config.classifier)?;
        Ok(StyleClassifier { featurizer, model })
    }

    pub fn predict(&self, piece: &TokenSequence) -> Prediction {
        self.model
            .predict(&self.featurizer.transform(piece))
            .expect("featurizer and model share a dimension")
    }

    /// Mean of the per-piece class distributions; label = argmax, lowest
    /// class index on ties.
    pub fn predict_mean(&self, pieces: &[TokenSequence]) -> Option<Prediction> {
        if pieces.is_empty() {
            return None;
        }
        let k = self.model.classes.len();
        let mut mean = vec![0.0; k];
        for p in pieces {
            for (m, (_, q)) in mean.iter_mut().zip(self.predict(p).probabilities) {
                *m += q / pieces.len() as f64;
            }
        }
        let label = self.model.classes[super::model::argmax(&mean)];
        Some(Prediction {
            label,
            probabilities: self.model.classes.iter().copied().zip(mean).collect(),
        })
    }

    pub fn classes(&self) -> &[School] {
        &self.model.classes
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        out.push_str("scheme ");
        out.push_str(self.featurizer.scheme().as_str());
        out.push('\n');
        match &self.featurizer {
            Featurizer::Bow(v) | Featurizer::Tfidf(v) => v.write_text(&mut out),
            Featurizer::Embedding(m) => out.push_str(&m.to_text()),
        }
        self.model.write_text(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            Some((n, _)) => return Err(model_format(n, "not a classifier model")),
            None => return Err(model_format(0, "empty input")),
        }
        let (n, line) = lines.next().ok_or_else(|| model_format(1, "missing scheme"))?;
        let scheme: FeatureScheme = line
            .strip_prefix("scheme ")
            .ok_or_else(|| model_format(n, "expected `scheme <name>`"))?
            .parse()
            .map_err(|_| model_format(n, "unknown scheme"))?;
        let featurizer = match scheme {
            FeatureScheme::Bow => Featurizer::Bow(Vocabulary::read_text(&mut lines)?),
            FeatureScheme::Tfidf => Featurizer::Tfidf(Vocabulary::read_text(&mut lines)?),
            FeatureScheme::Cbow | FeatureScheme::SkipGram => {
                Featurizer::Embedding(EmbeddingModel::read_text(&mut lines)?)
            }
        };
        let model = LogLinearModel::read_text(&mut lines)?;
        if model.dim != featurizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: featurizer.dim(),
                got: model.dim,
            });
        }
        Ok(StyleClassifier { featurizer, model })
    }
}
