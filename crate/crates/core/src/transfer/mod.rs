//! Classifier-guided melody mutation followed by technique re-tagging with
//! a target school's tagger.

mod mutation;

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use mutation::{apply_mutation, valid_mutations, Mutation, MutationKind, PitchRange, SplitPattern};

use crate::classify::StyleClassifier;
use crate::error::{Error, Result};
use crate::musicxml::export_musicxml;
use crate::notation::{serialize_score, School, Score, Technique};
use crate::represent::{tokenize, window_ranges, DEFAULT_WINDOW};
use crate::tagger::{decode, tagged_sequence, CrfModel, RuleSet};

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub iterations: usize,
    /// Iteration counts at which a snapshot is kept; 0 is the input.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    pub range: PitchRange,
    /// Proceed when the classifier disagrees with the piece's label, taking
    /// the prediction as the initial label.
    pub force: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            iterations: 60,
            checkpoints: vec![0, 20, 60],
            seed: 0,
            range: PitchRange::default(),
            force: false,
        }
    }
}

/// One proposal of the hill climb.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// 1-based.
    pub iteration: usize,
    pub mutation: Mutation,
    pub accepted: bool,
    /// Probability of the initial label before and after the proposal.
    pub p_before: f64,
    pub p_after: f64,
    pub predicted: School,
    pub checkpoint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelodyTransfer {
    pub score: Score,
    pub initial_label: School,
    pub initial_probability: f64,
    pub final_probability: f64,
    pub trace: Vec<TraceStep>,
    /// `(iteration, snapshot)` for each configured checkpoint.
    pub checkpoints: Vec<(usize, Score)>,
    /// Iteration at which no valid mutation remained.
    pub stopped_at: Option<usize>,
}

impl MelodyTransfer {
    pub fn accepted(&self) -> impl Iterator<Item = &TraceStep> {
        self.trace.iter().filter(|s| s.accepted)
    }

    /// Tab-separated trace, one line per proposal.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("iteration\tmutation\taccepted\tp_before\tp_after\tpredicted\n");
        for s in &self.trace {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.12}\t{:.12}\t{}",
                s.iteration, s.mutation, s.accepted as u8, s.p_before, s.p_after, s.predicted
            );
        }
        if let Some(i) = self.stopped_at {
            let _ = writeln!(out, "# stopped at iteration {i}: no valid mutation");
        }
        out
    }
}

fn probability(classifier: &StyleClassifier, score: &Score, label: School) -> (School, f64) {
    let p = classifier.predict(&tokenize(score));
    (p.label, p.probability_of(label))
}

/// Hill-climbs away from the piece's own style: each iteration proposes one
/// random valid mutation (kind uniform among kinds with candidates, then a
/// uniform candidate) and keeps it only if the classifier still predicts the
/// initial label with strictly lower probability.
pub fn melody_transfer(score: &Score, classifier: &StyleClassifier, config: &TransferConfig) -> Result<MelodyTransfer> {
    let pred = classifier.predict(&tokenize(score));
    let initial_label = if pred.label == score.school {
        score.school
    } else if config.force {
        pred.label
    } else {
        return Err(Error::LabelMismatch {
            declared: score.school.to_string(),
            predicted: pred.label.to_string(),
        });
    };
    let initial_probability = pred.probability_of(initial_label);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = score.clone();
    let mut p = initial_probability;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut checkpoints = Vec::new();
    if config.checkpoints.contains(&0) {
        checkpoints.push((0, current.clone()));
    }
    let mut stopped_at = None;

    for iteration in 1..=config.iterations {
        let pools: Vec<Vec<Mutation>> = MutationKind::ALL
            .iter()
            .map(|&k| valid_mutations(&current, k, &config.range))
            .filter(|c| !c.is_empty())
            .collect();
        if pools.is_empty() {
            stopped_at = Some(iteration);
            break;
        }
        let pool = &pools[rng.gen_range(0..pools.len())];
        let mutation = pool[rng.gen_range(0..pool.len())];
        let candidate = apply_mutation(&current, &mutation, &config.range)?;
        let (label, p_after) = probability(classifier, &candidate, initial_label);
        let accepted = label == initial_label && p_after < p;
        let checkpoint = config.checkpoints.contains(&iteration);
        trace.push(TraceStep {
            iteration,
            mutation,
            accepted,
            p_before: p,
            p_after,
            predicted: label,
            checkpoint,
        });
        if accepted {
            current = candidate;
            p = p_after;
        }
        if checkpoint {
            checkpoints.push((iteration, current.clone()));
        }
    }
    // checkpoints beyond an early stop see the final state
    for &c in &config.checkpoints {
        if c <= config.iterations && !checkpoints.iter().any(|(i, _)| *i == c) {
            checkpoints.push((c, current.clone()));
        }
    }
    checkpoints.sort_by_key(|(i, _)| *i);

    Ok(MelodyTransfer {
        score: current,
        initial_label,
        initial_probability,
        final_probability: p,
        trace,
        checkpoints,
        stopped_at,
    })
}

/// Re-tags every note with the tagger's decoded technique; rests are always
/// left untagged. The melody is untouched.
pub fn technique_transfer(score: &Score, tagger: &CrfModel, rules: Option<&RuleSet>) -> Result<Score> {
    let tokens = tagged_sequence(score).tokens;
    let mut all = RuleSet::rests_untagged(tagger.tags());
    if let Some(r) = rules {
        all.rules.extend(r.rules.iter().cloned());
    }
    let tags = decode(tagger, &tokens, Some(&all))?;
    let mut out = score.clone();
    let mut it = tags.into_iter();
    for m in &mut out.measures {
        for n in &mut m.notes {
            let t = it.next().expect("one tag per note");
            n.technique = if n.is_rest() { Technique::None } else { t };
        }
    }
    Ok(out)
}

/// Technique code → number of notes carrying it (untagged notes excluded).
pub fn technique_counts(score: &Score) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for n in score.notes().filter(|n| !n.technique.is_none()) {
        *counts.entry(n.technique.code().to_string()).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleTransferConfig {
    pub transfer: TransferConfig,
    pub target: School,
    pub rules: Option<RuleSet>,
    pub window: usize,
}

impl StyleTransferConfig {
    pub fn new(target: School, seed: u64) -> Self {
        StyleTransferConfig {
            transfer: TransferConfig {
                seed,
                ..Default::default()
            },
            target,
            rules: None,
            window: DEFAULT_WINDOW,
        }
    }
}

/// A reassembled, re-tagged score at one checkpoint with its exports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    #[serde(skip)]
    pub score: Score,
    pub jianpu: String,
    pub musicxml: String,
    /// Mean over windows of the probability of each window's initial label.
    pub probability: f64,
    pub technique_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleTransfer {
    pub score: Score,
    pub windows: Vec<MelodyTransfer>,
    pub checkpoints: Vec<Checkpoint>,
    pub source_technique_counts: BTreeMap<String, usize>,
}

impl StyleTransfer {
    /// All window traces, each line prefixed by the window index.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("window\titeration\tmutation\taccepted\tp_before\tp_after\tpredicted\n");
        for (w, t) in self.windows.iter().enumerate() {
            for line in t.trace_tsv().lines().skip(1) {
                let _ = writeln!(out, "{w}\t{line}");
            }
        }
        out
    }
}

fn reassemble(original: &Score, ranges: &[std::ops::Range<usize>], windows: &[&Score]) -> Score {
    let mut out = original.clone();
    out.measures.clear();
    let mut next = 0;
    for (r, w) in ranges.iter().zip(windows) {
        out.measures.extend(original.measures[next..r.start].iter().cloned());
        out.measures.extend(w.measures.iter().cloned());
        next = r.end;
    }
    out.measures.extend(original.measures[next..].iter().cloned());
    out
}

/// Melody transfer on every window of the score, reassembled in order
/// (remainder measures pass through), then technique transfer with the
/// target school's tagger. Window `w` uses seed `seed + w`.
pub fn run_style_transfer(
    score: &Score,
    classifier: &StyleClassifier,
    tagger: &CrfModel,
    config: &StyleTransferConfig,
) -> Result<StyleTransfer> {
    let ranges = window_ranges(score.measures.len(), config.window);
    if ranges.is_empty() {
        return Err(Error::Config(format!(
            "score has {} measure(s), fewer than one {}-measure window",
            score.measures.len(),
            config.window
        )));
    }
    let windows: Vec<MelodyTransfer> = ranges
        .iter()
        .enumerate()
        .map(|(w, r)| {
            let cfg = TransferConfig {
                seed: config.transfer.seed.wrapping_add(w as u64),
                ..config.transfer.clone()
            };
            melody_transfer(&score.slice(r.clone()), classifier, &cfg)
        })
        .collect::<Result<_>>()?;

    let mut checkpoints = Vec::new();
    for (k, &(iteration, _)) in windows[0].checkpoints.iter().enumerate() {
        let snaps: Vec<&Score> = windows.iter().map(|w| &w.checkpoints[k].1).collect();
        let mut melody = reassemble(score, &ranges, &snaps);
        melody.school = config.target;
        let tagged = technique_transfer(&melody, tagger, config.rules.as_ref())?;
        let probability = windows
            .iter()
            .zip(&snaps)
            .map(|(w, s)| probability(classifier, s, w.initial_label).1)
            .sum::<f64>()
            / windows.len() as f64;
        checkpoints.push(Checkpoint {
            iteration,
            jianpu: serialize_score(&tagged),
            musicxml: export_musicxml(&tagged)?,
            probability,
            technique_counts: technique_counts(&tagged),
            score: tagged,
        });
    }

    let finals: Vec<&Score> = windows.iter().map(|w| &w.score).collect();
    let mut melody = reassemble(score, &ranges, &finals);
    melody.school = config.target;
    let result = technique_transfer(&melody, tagger, config.rules.as_ref())?;
    Ok(StyleTransfer {
        score: result,
        windows,
        checkpoints,
        source_technique_counts: technique_counts(score),
    })
}
