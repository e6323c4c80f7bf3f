#![allow(dead_code)]

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dizi_core::notation::{Duration, Measure, NoteEvent, School, Score, Technique, TechniqueRegistry, TimeSignature};
use dizi_core::pitch::{KeySignature, PitchClass};

const PALETTE: [(i64, i64); 14] = [
    (1, 4), (1, 2), (1, 1), (2, 1), (3, 2), (3, 4), (1, 3), (2, 3),
    (1, 6), (1, 12), (3, 1), (4, 1), (1, 8), (3, 8),
];

fn fill(length: Rational64, rng: &mut ChaCha8Rng) -> Vec<Duration> {
    let mut out = Vec::new();
    let mut left = length;
    while left > Rational64::from_integer(0) {
        let mut options: Vec<Duration> = PALETTE
            .iter()
            .map(|&(p, q)| Rational64::new(p, q))
            .filter(|&d| d < left && Duration::from_ratio(left - d).is_ok())
            .filter_map(|d| Duration::from_ratio(d).ok())
            .collect();
        if let Ok(rest) = Duration::from_ratio(left) {
            options.push(rest);
        }
        let d = *options.choose(rng).expect("the remainder is always an option");
        left -= d.ratio();
        out.push(d);
    }
    out
}

fn note(d: Duration, rng: &mut ChaCha8Rng) -> NoteEvent {
    if rng.gen_bool(0.15) {
        return NoteEvent::rest(d);
    }
    let degree = rng.gen_range(1..=7);
    let accidental = if rng.gen_bool(0.2) { *[-1i8, 1].choose(rng).unwrap() } else { 0 };
    let shift = *[-2i8, -1, 0, 0, 0, 1, 1, 2].choose(rng).unwrap();
    let techniques = TechniqueRegistry::default().techniques().to_vec();
    let t = if rng.gen_bool(0.4) { techniques.choose(rng).unwrap().clone() } else { Technique::None };
    NoteEvent::note(degree, accidental, shift, d).unwrap().with_technique(t)
}

/// A random well-formed score: full measures, sometimes with a short
/// pickup first measure.
pub fn random_score(rng: &mut ChaCha8Rng) -> Score {
    let words = ["song", "river", "moon", "spring", "high", "mountain", "flowing", "water"];
    let title: Vec<&str> = (0..rng.gen_range(0..4)).map(|_| *words.choose(rng).unwrap()).collect();
    let (beats, unit) = *[(2, 4), (3, 4), (4, 4), (3, 8), (6, 8), (1, 4), (2, 2)].choose(rng).unwrap();
    let mut key = KeySignature::new(PitchClass::new(rng.gen_range(0..12)).unwrap());
    if rng.gen_bool(0.2) {
        key.octave = rng.gen_range(3..=5);
    }
    let school = *School::ALL.choose(rng).unwrap();
    let mut score = Score::new(title.join(" "), school, key, TimeSignature::new(beats, unit).unwrap());
    let full = score.time.measure_length();
    let count = rng.gen_range(1..=9);
    for i in 0..count {
        let mut len = full;
        if i == 0 && count > 1 && rng.gen_bool(0.3) {
            let short: Vec<Rational64> = PALETTE
                .iter()
                .map(|&(p, q)| Rational64::new(p, q))
                .filter(|&d| d < full)
                .collect();
            len = *short.choose(rng).unwrap();
        }
        let notes = fill(len, rng).into_iter().map(|d| note(d, rng)).collect();
        score.measures.push(Measure::new(notes));
    }
    score
}

pub fn random_score_seeded(seed: u64) -> Score {
    random_score(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Largest relative gap between an analytic gradient and central finite
/// differences of `f` at `x`.
pub fn max_relative_error(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let down = f(&xp);
        xp[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub mod gradients {
    use super::*;
    use dizi_core::classify::{objective, LogLinearModel};
    use dizi_core::features::{negative_sampling_gradients, negative_sampling_loss, FeatureVector};
    use dizi_core::tagger::{crf_objective, observation_features, CrfModel, TaggedSequence};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    /// 3-token, 3-tag CRF instance with random weights.
    pub fn crf(seed: u64, l2: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tags = vec![Technique::None, Technique::Tonguing, Technique::Trill];
        let data = vec![
            TaggedSequence::new(toks("C41 D40.5 C41"), vec![Technique::Tonguing, Technique::None, Technique::Trill]),
            TaggedSequence::new(toks("E41/3 C41"), vec![Technique::Trill, Technique::Trill]),
        ];
        let mut features = Vec::new();
        for s in &data {
            for i in 0..s.len() {
                for f in observation_features(&s.tokens, i) {
                    if !features.contains(&f) {
                        features.push(f);
                    }
                }
            }
        }
        let mut model = CrfModel::new(tags, features);
        let x = uniform(&mut rng, model.param_count(), 1.0);
        model.set_params(&x);
        let (_, grad) = crf_objective(&model, &data, l2).unwrap();
        let mut work = model.clone();
        max_relative_error(
            &mut |p| {
                work.set_params(p);
                crf_objective(&work, &data, l2).unwrap().0
            },
            &x,
            &grad,
        )
    }

    /// Three-class log-linear model on a handful of sparse and dense points.
    pub fn classifier(seed: u64, l2: f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = vec![School::North, School::South, School::Other];
        let dim = 5;
        let data = vec![
            (FeatureVector::Sparse { dim, entries: vec![(0, 1.0), (3, 0.5)] }, School::North),
            (FeatureVector::Dense(uniform(&mut rng, dim, 1.0)), School::South),
            (FeatureVector::Dense(uniform(&mut rng, dim, 1.0)), School::Other),
            (FeatureVector::Sparse { dim, entries: vec![(4, 2.0)] }, School::South),
        ];
        let mut model = LogLinearModel::zeros(classes, dim);
        model.weights = uniform(&mut rng, 3 * dim, 1.0);
        model.bias = uniform(&mut rng, 3, 1.0);
        let x: Vec<f64> = model.weights.iter().chain(&model.bias).copied().collect();
        let (_, grad) = objective(&model, &data, l2);
        let mut work = model.clone();
        max_relative_error(
            &mut |p| {
                work.weights.copy_from_slice(&p[..3 * dim]);
                work.bias.copy_from_slice(&p[3 * dim..]);
                objective(&work, &data, l2).0
            },
            &x,
            &grad,
        )
    }

    /// Negative-sampling loss of one context vector, one positive and three
    /// negative output vectors, differentiated in all of them.
    pub fn negative_sampling(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 6;
        let x = uniform(&mut rng, d * 5, 1.0);
        let split = |p: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
            (p[..d].to_vec(), p[d..2 * d].to_vec(), p[2 * d..].chunks(d).map(|c| c.to_vec()).collect())
        };
        let (h, pos, negs) = split(&x);
        let nrefs: Vec<&[f64]> = negs.iter().map(|v| v.as_slice()).collect();
        let g = negative_sampling_gradients(&h, &pos, &nrefs);
        let analytic: Vec<f64> = g.h.iter().chain(&g.pos).chain(g.negs.iter().flatten()).copied().collect();
        max_relative_error(
            &mut |p| {
                let (h, pos, negs) = split(p);
                let nrefs: Vec<&[f64]> = negs.iter().map(|v| v.as_slice()).collect();
                negative_sampling_loss(&h, &pos, &nrefs)
            },
            &x,
            &analytic,
        )
    }
}

pub mod crf_oracle {
    use super::*;
    use dizi_core::tagger::{viterbi, CrfModel};

    /// A model over `t` tags with random transitions and a random emission
    /// lattice for `n` positions, values on a coarse grid so ties happen.
    pub fn instance(rng: &mut ChaCha8Rng, n: usize, t: usize, grid: bool) -> (CrfModel, Vec<Vec<f64>>) {
        let tags = TechniqueRegistry::default().techniques()[..t].to_vec();
        let mut model = CrfModel::new(tags, vec![]);
        let draw = |rng: &mut ChaCha8Rng| {
            if grid {
                rng.gen_range(-2..=2) as f64 * 0.5
            } else {
                rng.gen_range(-3.0..3.0)
            }
        };
        for a in 0..t {
            for b in 0..t {
                let w = draw(rng);
                model.set_transition(a, b, w);
            }
        }
        let em = (0..n).map(|_| (0..t).map(|_| draw(rng)).collect()).collect();
        (model, em)
    }

    /// All paths in lexicographic order; the first one reaching the maximum.
    pub fn brute_force(model: &CrfModel, em: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = em.len();
        let t = model.tags().len();
        let mut best = (vec![], f64::NEG_INFINITY);
        let mut path = vec![0usize; n];
        loop {
            let s = model.path_score(em, &path);
            if s > best.1 {
                best = (path.clone(), s);
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                path[i] += 1;
                if path[i] < t {
                    break;
                }
                path[i] = 0;
            }
        }
    }

    /// Runs `count` random instances; returns the number of mismatches.
    pub fn mismatches(seed: u64, count: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        for k in 0..count {
            let n = rng.gen_range(1..=6);
            let t = rng.gen_range(1..=4);
            let (model, em) = instance(&mut rng, n, t, k % 2 == 0);
            let fast = viterbi(&model, &em).unwrap();
            let (slow, _) = brute_force(&model, &em);
            bad += (fast != slow) as usize;
        }
        bad
    }
}

pub mod tagger_fixture {
    use super::*;
    use dizi_core::features::Vocabulary;
    use dizi_core::tagger::{tagged_vocabulary, CrfModel, TaggedSequence, TaggerScores};

    pub fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    /// Five test notes, two of them (G41, A41) unseen in training. The model
    /// tags C41 as tonguing and E41 as trill and everything else untagged,
    /// so four tags are right and one of the two unseen notes is.
    pub fn fixture() -> (CrfModel, Vec<TaggedSequence>, Vocabulary) {
        let train = vec![TaggedSequence::new(
            toks("C41 D41 E41"),
            vec![Technique::Tonguing, Technique::None, Technique::Trill],
        )];
        let vocab = tagged_vocabulary(&train).unwrap();
        let test = vec![TaggedSequence::new(
            toks("C41 D41 E41 G41 A41"),
            vec![Technique::Tonguing, Technique::None, Technique::Trill, Technique::None, Technique::Portamento],
        )];
        let mut model = CrfModel::new(TechniqueRegistry::default().techniques().to_vec(), vec![]);
        let tk = model.tag_index(&Technique::Tonguing).unwrap();
        let tr = model.tag_index(&Technique::Trill).unwrap();
        model.set_emission("w=C41", tk, 5.0);
        model.set_emission("w=E41", tr, 5.0);
        (model, test, vocab)
    }

    pub fn scores() -> TaggerScores {
        let (model, test, vocab) = fixture();
        dizi_core::tagger::evaluate_tagger(&model, None, &test, &vocab).unwrap()
    }
}

pub mod transfer_setup {
    use dizi_core::classify::{FeatureScheme, PipelineConfig, StyleClassifier};
    use dizi_core::notation::{School, Score};
    use dizi_core::represent::tokenize;
    use dizi_core::synth::{synth_corpus, SynthConfig};
    use dizi_core::tagger::{tagged_sequence, train_crf, CrfConfig, CrfModel};

    /// TF-IDF classifier and south tagger trained on one synthetic corpus,
    /// plus held-out pieces from another seed.
    pub fn setup() -> (StyleClassifier, CrfModel, Vec<Score>) {
        let train = synth_corpus(&SynthConfig { pieces: 200, measures: 4, seed: 1 });
        let seqs: Vec<_> = train.iter().map(tokenize).collect();
        let clf = StyleClassifier::train(&seqs, &PipelineConfig::new(FeatureScheme::Tfidf, 0)).unwrap();
        let south: Vec<_> = train.iter().filter(|s| s.school == School::South).map(tagged_sequence).collect();
        let tagger = train_crf(&south, &CrfConfig::default()).unwrap();
        let held_out = synth_corpus(&SynthConfig { pieces: 40, measures: 4, seed: 99 });
        (clf, tagger, held_out)
    }
}

pub mod cli {
    use std::path::Path;
    use std::process::{Command, Output};

    pub fn dizi(args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dizi"))
            .args(args)
            .env_remove("DIZI_CORPUS")
            .env_remove("DIZI_MODELS")
            .output()
            .expect("run dizi")
    }

    pub fn ok(args: &[&str]) -> String {
        let out = dizi(args);
        assert!(out.status.success(), "dizi {args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    }

    /// Runs eval and transfer twice each in `root` and reports whether the
    /// two runs of each produced byte-identical outputs.
    pub fn determinism(root: &Path) -> (bool, bool) {
        let s = |p: &Path| p.to_str().unwrap().to_string();
        let corpus = root.join("corpus");
        ok(&["synth", "--out", &s(&corpus), "--pieces", "60", "--seed", "3"]);
        let eval = |n: usize| {
            let report = root.join(format!("eval-{n}.json"));
            let stdout = ok(&["eval", "--corpus", &s(&corpus), "--folds", "5", "--seed", "3", "--report", &s(&report)]);
            (stdout, std::fs::read(&report).unwrap())
        };
        let eval_same = eval(1) == eval(2);

        let clf = root.join("classifier.model");
        let tagger = root.join("tagger.model");
        ok(&["train", "--corpus", &s(&corpus), "--out", &s(&clf)]);
        ok(&["tag-train", "--corpus", &s(&corpus), "--school", "south", "--out", &s(&tagger)]);
        let input = corpus.join("north-001.jp");
        let transfer = |n: usize| {
            let dir = root.join(format!("transfer-{n}"));
            let stdout = ok(&[
                "transfer", "--in", &s(&input), "--target", "south", "--classifier", &s(&clf),
                "--tagger", &s(&tagger), "--out-dir", &s(&dir), "--seed", "3",
            ]);
            (stdout.replace(&s(&dir), "OUT"), read_dir(&dir))
        };
        let transfer_same = transfer(1) == transfer(2);
        (eval_same, transfer_same)
    }
}
