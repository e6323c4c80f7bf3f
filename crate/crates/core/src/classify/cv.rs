use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::pipeline::{PipelineConfig, StyleClassifier};
use crate::error::{Error, Result};
use crate::notation::School;
use crate::represent::TokenSequence;

/// Recall, precision and F1 per class from a confusion matrix
/// (`rows = true class`, `cols = predicted`), all in percent. A class that
/// is never predicted has precision 0; one with no support has recall 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub f1: Vec<f64>,
}

impl ClassMetrics {
    pub fn from_confusion(confusion: &[Vec<usize>]) -> Self {
        let k = confusion.len();
        let mut recall = vec![0.0; k];
        let mut precision = vec![0.0; k];
        let mut f1 = vec![0.0; k];
        for c in 0..k {
            let tp = confusion[c][c] as f64;
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let r = if support > 0 { tp / support as f64 } else { 0.0 };
            let p = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            recall[c] = 100.0 * r;
            precision[c] = 100.0 * p;
            f1[c] = if r + p > 0.0 { 100.0 * 2.0 * r * p / (r + p) } else { 0.0 };
        }
        ClassMetrics { recall, precision, f1 }
    }

    pub fn macro_recall(&self) -> f64 {
        mean(&self.recall)
    }

    pub fn macro_f1(&self) -> f64 {
        mean(&self.f1)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scheme: String,
    pub classes: Vec<School>,
    pub folds: Vec<FoldResult>,
    /// Mean over folds of the per-fold macro recall.
    pub macro_recall: f64,
    /// Mean over folds of the per-fold macro F1.
    pub macro_f1: f64,
    /// Summed over folds; entries add up to the corpus size.
    pub confusion: Vec<Vec<usize>>,
    pub seed: u64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "features: {}   folds: {}   seed: {}", self.scheme, self.folds.len(), self.seed);
        let _ = writeln!(out, "{:>4}  {:>6}  {:>5}  {:>8}  {:>8}", "fold", "train", "test", "recall", "f1");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{:>4}  {:>6}  {:>5}  {:>8.2}  {:>8.2}",
                f.fold + 1,
                f.train_size,
                f.test_size,
                f.macro_recall,
                f.macro_f1
            );
        }
        let _ = writeln!(out, "{:>4}  {:>6}  {:>5}  {:>8.2}  {:>8.2}", "mean", "", "", self.macro_recall, self.macro_f1);
        let _ = writeln!(out, "confusion (rows = true, cols = predicted):");
        let names: Vec<&str> = self.classes.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(out, "{:>8}  {}", "", names.iter().map(|n| format!("{n:>7}")).collect::<String>());
        for (name, row) in names.iter().zip(&self.confusion) {
            let _ = writeln!(out, "{:>8}  {}", name, row.iter().map(|v| format!("{v:>7}")).collect::<String>());
        }
        out
    }
}

/// Stratified fold index for each item: items of each class are shuffled
/// with a seeded RNG and dealt round-robin across folds.
pub fn stratified_folds(labels: &[School], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Stratification("need at least 2 folds".into()));
    }
    let mut classes: Vec<School> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Stratification(format!(
                "class {class} has {} item(s) for {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, i) in members.into_iter().enumerate() {
            assignment[i] = j % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub pipeline: PipelineConfig,
    /// Seeds the fold assignment.
    pub seed: u64,
    /// Train folds on scoped threads; the report is identical either way.
    pub parallel: bool,
}

impl CvConfig {
    pub fn new(pipeline: PipelineConfig, folds: usize, seed: u64) -> Self {
        CvConfig {
            folds,
            pipeline,
            seed,
            parallel: false,
        }
    }
}

/// Per-fold trained models alongside the report, for inspection.
pub struct CrossValidation {
    pub report: EvalReport,
    pub models: Vec<StyleClassifier>,
    pub assignment: Vec<usize>,
}

pub fn cross_validate(corpus: &[TokenSequence], config: &CvConfig) -> Result<EvalReport> {
    cross_validate_detailed(corpus, config).map(|cv| cv.report)
}

pub fn cross_validate_detailed(corpus: &[TokenSequence], config: &CvConfig) -> Result<CrossValidation> {
    let labels: Vec<School> = corpus.iter().map(|p| p.label).collect();
    let assignment = stratified_folds(&labels, config.folds, config.seed)?;
    let mut classes = labels.clone();
    classes.sort();
    classes.dedup();

    let run_fold = |fold: usize| -> Result<(FoldResult, StyleClassifier)> {
        let train: Vec<TokenSequence> = corpus
            .iter()
            .zip(&assignment)
            .filter(|(_, &f)| f != fold)
            .map(|(p, _)| p.clone())
            .collect();
        let model = StyleClassifier::train(&train, &config.pipeline)?;
        let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
        let mut test_size = 0;
        for (p, _) in corpus.iter().zip(&assignment).filter(|(_, &f)| f == fold) {
            let pred = model.predict(p).label;
            let t = classes.iter().position(|c| *c == p.label).expect("label in classes");
            let q = classes.iter().position(|c| *c == pred).expect("prediction in classes");
            confusion[t][q] += 1;
            test_size += 1;
        }
        let m = ClassMetrics::from_confusion(&confusion);
        Ok((
            FoldResult {
                fold,
                train_size: train.len(),
                test_size,
                macro_recall: m.macro_recall(),
                macro_f1: m.macro_f1(),
                confusion,
            },
            model,
        ))
    };

    let results: Vec<Result<(FoldResult, StyleClassifier)>> = if config.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..config.folds).map(|f| s.spawn(move || run_fold(f))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold thread panicked"))
                .collect()
        })
    } else {
        (0..config.folds).map(run_fold).collect()
    };

    let mut folds = Vec::with_capacity(config.folds);
    let mut models = Vec::with_capacity(config.folds);
    for r in results {
        let (f, m) = r?;
        folds.push(f);
        models.push(m);
    }
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    for f in &folds {
        for (row, frow) in confusion.iter_mut().zip(&f.confusion) {
            for (c, v) in row.iter_mut().zip(frow) {
                *c += v;
            }
        }
    }
    let report = EvalReport {
        scheme: config.pipeline.scheme.to_string(),
        classes,
        macro_recall: mean(&folds.iter().map(|f| f.macro_recall).collect::<Vec<_>>()),
        macro_f1: mean(&folds.iter().map(|f| f.macro_f1).collect::<Vec<_>>()),
        folds,
        confusion,
        seed: config.seed,
    };
    Ok(CrossValidation {
        report,
        models,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_twenty_items_ten_folds() {
        let labels: Vec<School> = (0..20).map(|i| if i % 2 == 0 { School::North } else { School::South }).collect();
        let a = stratified_folds(&labels, 10, 3).unwrap();
        for fold in 0..10 {
            let members: Vec<usize> = (0..20).filter(|&i| a[i] == fold).collect();
            assert_eq!(members.len(), 2);
            assert_ne!(labels[members[0]], labels[members[1]]);
        }
    }

    #[test]
    fn always_predicting_one_class() {
        // 5 north, 5 south, everything predicted north
        let m = ClassMetrics::from_confusion(&[vec![5, 0], vec![5, 0]]);
        assert_eq!(m.recall, vec![100.0, 0.0]);
        assert_eq!(m.macro_recall(), 50.0);
        assert_eq!(m.f1[1], 0.0);
        assert!((m.f1[0] - 100.0 * 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_items_per_class() {
        let labels = vec![School::North, School::North, School::South];
        assert!(matches!(stratified_folds(&labels, 2, 0), Err(Error::Stratification(_))));
        assert!(matches!(stratified_folds(&[School::North; 4], 2, 0), Err(Error::SingleClass(1))));
    }
}
