//! Per-note playing-technique tagging: a linear-chain CRF, a rule-constrained
//! decoder, and accuracy / OOV-accuracy evaluation.

mod crf;
mod rules;

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use crf::{
    crf_objective, decode, decode_indices, log_likelihood, observation_features, train_crf, viterbi, CrfConfig,
    CrfModel, Lattice, TaggedSequence,
};
pub use rules::{parse_duration_text, Effect, Predicate, Rule, RuleSet, DEFAULT_RULES};

use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::notation::Score;
use crate::represent::{note_token, window_ranges};

/// The whole score as one tagged sequence; rests included, tagged `None`.
pub fn tagged_sequence(score: &Score) -> TaggedSequence {
    let (tokens, tags) = score
        .notes()
        .map(|n| (note_token(n, &score.key), n.technique.clone()))
        .unzip();
    TaggedSequence { tokens, tags }
}

/// Tagged sequences for consecutive `window`-measure pieces.
pub fn tagged_pieces(score: &Score, window: usize) -> Vec<TaggedSequence> {
    window_ranges(score.measures.len(), window)
        .into_iter()
        .map(|r| tagged_sequence(&score.slice(r)))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Note-level tagging counts. Percentages are derived on demand.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TaggerScores {
    pub notes: usize,
    pub correct: usize,
    pub oov_notes: usize,
    pub oov_correct: usize,
    /// `(gold, predicted)` code pairs for every wrong tag.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl TaggerScores {
    pub fn accuracy(&self) -> f64 {
        if self.notes == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.notes as f64
        }
    }

    /// `None` when the test set has no out-of-vocabulary notes.
    pub fn oov_accuracy(&self) -> Option<f64> {
        (self.oov_notes > 0).then(|| 100.0 * self.oov_correct as f64 / self.oov_notes as f64)
    }

    pub fn merge(&mut self, other: &TaggerScores) {
        self.notes += other.notes;
        self.correct += other.correct;
        self.oov_notes += other.oov_notes;
        self.oov_correct += other.oov_correct;
        for (g, row) in &other.confusion {
            for (p, c) in row {
                *self.confusion.entry(g.clone()).or_default().entry(p.clone()).or_default() += c;
            }
        }
    }

    /// Adds one sequence's predictions.
    pub fn record(&mut self, gold: &TaggedSequence, predicted: &[crate::notation::Technique], vocab: &Vocabulary) {
        for ((tok, g), p) in gold.tokens.iter().zip(&gold.tags).zip(predicted) {
            let ok = g == p;
            let oov = !vocab.contains(tok);
            self.notes += 1;
            self.correct += ok as usize;
            if oov {
                self.oov_notes += 1;
                self.oov_correct += ok as usize;
            }
            if !ok {
                *self
                    .confusion
                    .entry(g.code().to_string())
                    .or_default()
                    .entry(p.code().to_string())
                    .or_default() += 1;
            }
        }
    }
}

/// Decodes every test sequence and scores it against its gold tags. OOV
/// notes are those whose token is absent from `train_vocab`.
pub fn evaluate_tagger(
    model: &CrfModel,
    rules: Option<&RuleSet>,
    test: &[TaggedSequence],
    train_vocab: &Vocabulary,
) -> Result<TaggerScores> {
    let mut scores = TaggerScores::default();
    for seq in test {
        let pred = decode(model, &seq.tokens, rules)?;
        scores.record(seq, &pred, train_vocab);
    }
    Ok(scores)
}

/// Vocabulary of the tokens in tagged training data.
pub fn tagged_vocabulary(data: &[TaggedSequence]) -> Result<Vocabulary> {
    let seqs: Vec<crate::represent::TokenSequence> = data
        .iter()
        .map(|s| crate::represent::TokenSequence::from_tokens(&s.tokens, crate::notation::School::Other))
        .collect();
    crate::features::build_vocabulary(&seqs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggerFold {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub crf: TaggerScores,
    pub crf_rules: TaggerScores,
}

/// Cross-validated accuracy of the plain (CRF) and rule-constrained
/// (CRF-RULES) decoders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggerReport {
    pub folds: Vec<TaggerFold>,
    pub crf: TaggerScores,
    pub crf_rules: TaggerScores,
    pub seed: u64,
}

#[derive(Serialize)]
struct VariantJson {
    accuracy: f64,
    oov_accuracy: Option<f64>,
    notes: usize,
    oov_notes: usize,
}

impl From<&TaggerScores> for VariantJson {
    fn from(s: &TaggerScores) -> Self {
        VariantJson {
            accuracy: s.accuracy(),
            oov_accuracy: s.oov_accuracy(),
            notes: s.notes,
            oov_notes: s.oov_notes,
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "undefined".to_string())
}

impl TaggerReport {
    /// JSON summary; an undefined OOV accuracy is `null`.
    pub fn to_json(&self) -> String {
        let folds: Vec<_> = self
            .folds
            .iter()
            .map(|f| {
                serde_json::json!({
                    "fold": f.fold,
                    "train_size": f.train_size,
                    "test_size": f.test_size,
                    "crf": VariantJson::from(&f.crf),
                    "crf_rules": VariantJson::from(&f.crf_rules),
                })
            })
            .collect();
        let v = serde_json::json!({
            "seed": self.seed,
            "crf": VariantJson::from(&self.crf),
            "crf_rules": VariantJson::from(&self.crf_rules),
            "crf_confusion": self.crf.confusion,
            "crf_rules_confusion": self.crf_rules.confusion,
            "folds": folds,
        });
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "folds: {}   seed: {}", self.folds.len(), self.seed);
        let _ = writeln!(out, "{:<10}  {:>8}  {:>9}  {:>6}  {:>5}", "model", "accuracy", "oov acc", "notes", "oov");
        for (name, s) in [("CRF", &self.crf), ("CRF-RULES", &self.crf_rules)] {
            let _ = writeln!(
                out,
                "{:<10}  {:>8.2}  {:>9}  {:>6}  {:>5}",
                name,
                s.accuracy(),
                pct(s.oov_accuracy()),
                s.notes,
                s.oov_notes
            );
        }
        out
    }
}

/// k-fold cross-validation of the tagger: sequences are shuffled with a
/// seeded RNG and dealt round-robin. Accuracies pool all test notes.
pub fn cross_validate_tagger(
    data: &[TaggedSequence],
    folds: usize,
    config: &CrfConfig,
    rules: &RuleSet,
    seed: u64,
) -> Result<TaggerReport> {
    if folds < 2 || data.len() < folds {
        return Err(Error::Stratification(format!("{} sequence(s) for {folds} folds", data.len())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; data.len()];
    for (j, &i) in order.iter().enumerate() {
        assignment[i] = j % folds;
    }
    let mut report = TaggerReport {
        folds: Vec::with_capacity(folds),
        crf: TaggerScores::default(),
        crf_rules: TaggerScores::default(),
        seed,
    };
    for fold in 0..folds {
        let (test, train): (Vec<_>, Vec<_>) = data
            .iter()
            .zip(&assignment)
            .partition(|(_, &f)| f == fold);
        let train: Vec<TaggedSequence> = train.into_iter().map(|(s, _)| s.clone()).collect();
        let test: Vec<TaggedSequence> = test.into_iter().map(|(s, _)| s.clone()).collect();
        let vocab = tagged_vocabulary(&train)?;
        let model = train_crf(&train, config)?;
        let crf = evaluate_tagger(&model, None, &test, &vocab)?;
        let crf_rules = evaluate_tagger(&model, Some(rules), &test, &vocab)?;
        report.crf.merge(&crf);
        report.crf_rules.merge(&crf_rules);
        report.folds.push(TaggerFold {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            crf,
            crf_rules,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::{parse_score, Technique};

    #[test]
    fn zero_oov_is_undefined() {
        let s = TaggedSequence::new(vec!["C41".into()], vec![Technique::None]);
        let vocab = tagged_vocabulary(std::slice::from_ref(&s)).unwrap();
        let m = CrfModel::new(CrfConfig::default().tags, vec![]);
        let r = evaluate_tagger(&m, None, &[s], &vocab).unwrap();
        assert_eq!(r.accuracy(), 100.0);
        assert_eq!(r.oov_accuracy(), None);
    }

    #[test]
    fn tags_come_from_suffixes() {
        let score = parse_score("key: 1=C\ntime: 2/4\n1!tk 2 | 0 3!tr |").unwrap();
        let s = tagged_sequence(&score);
        assert_eq!(s.tokens, ["C41", "D41", "R1", "E41"]);
        assert_eq!(s.tags, [Technique::Tonguing, Technique::None, Technique::None, Technique::Trill]);
    }
}
