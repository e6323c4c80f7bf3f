use std::fmt::Write;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_vocabulary, FeatureVector, Vocabulary};
use crate::error::{model_format, Error, Result};
use crate::represent::TokenSequence;

const FORMAT_HEADER: &str = "dizi-embedding 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    Cbow,
    SkipGram,
}

impl EmbeddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMode::Cbow => "cbow",
            EmbeddingMode::SkipGram => "skipgram",
        }
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbow" => Ok(EmbeddingMode::Cbow),
            "skipgram" | "skip-gram" => Ok(EmbeddingMode::SkipGram),
            _ => Err(Error::Config(format!("unknown embedding mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub mode: EmbeddingMode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly to near zero over training.
    pub learning_rate: f64,
    pub seed: u64,
}

impl EmbeddingConfig {
    pub fn new(mode: EmbeddingMode, seed: u64) -> Self {
        EmbeddingConfig {
            mode,
            dim: 32,
            window: 4,
            negatives: 5,
            epochs: 30,
            learning_rate: 0.025,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 {
            return Err(Error::Config("dim, window and negatives must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Trained input ("word") and output ("context") vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: EmbeddingConfig,
    vocab: Vocabulary,
    input: Vec<f64>,
    output: Vec<f64>,
    /// Mean negative-sampling loss per update, one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input_vector(&self, index: usize) -> &[f64] {
        let d = self.dim();
        &self.input[index * d..(index + 1) * d]
    }

    pub fn output_vector(&self, index: usize) -> &[f64] {
        let d = self.dim();
        &self.output[index * d..(index + 1) * d]
    }

    pub fn vector_for(&self, token: &str) -> Option<&[f64]> {
        self.vocab.index_of(token).map(|i| self.input_vector(i))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.vector_for(a)?, self.vector_for(b)?))
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(
            out,
            "config {} {} {} {} {} {} {}",
            c.mode.as_str(),
            c.dim,
            c.window,
            c.negatives,
            c.epochs,
            c.learning_rate,
            c.seed
        );
        self.vocab.write_text(&mut out);
        for (i, tok) in self.vocab.tokens().iter().enumerate() {
            let _ = write!(out, "{tok}");
            for x in self.input_vector(i).iter().chain(self.output_vector(i)) {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        let losses: Vec<String> = self.epoch_losses.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "losses {}", losses.join(" "));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        Self::read_text(&mut lines)
    }

    pub(crate) fn read_text<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            Some((n, _)) => return Err(model_format(n, "not an embedding model")),
            None => return Err(model_format(0, "empty input")),
        }
        let (n, cfg) = lines.next().ok_or_else(|| model_format(1, "missing config"))?;
        let f: Vec<&str> = cfg.split_whitespace().collect();
        if f.len() != 8 || f[0] != "config" {
            return Err(model_format(n, "expected `config <mode> <dim> <window> <neg> <epochs> <lr> <seed>`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| model_format(n, format!("bad number `{s}`")));
        let config = EmbeddingConfig {
            mode: f[1].parse().map_err(|_| model_format(n, "bad mode"))?,
            dim: num(f[2])?,
            window: num(f[3])?,
            negatives: num(f[4])?,
            epochs: num(f[5])?,
            learning_rate: f[6].parse().map_err(|_| model_format(n, "bad learning rate"))?,
            seed: f[7].parse().map_err(|_| model_format(n, "bad seed"))?,
        };
        config.check().map_err(|e| model_format(n, e.to_string()))?;
        let vocab = Vocabulary::read_text(lines)?;
        let d = config.dim;
        let mut input = Vec::with_capacity(vocab.len() * d);
        let mut output = Vec::with_capacity(vocab.len() * d);
        for tok in vocab.tokens() {
            let (n, line) = lines.next().ok_or_else(|| model_format(0, "truncated vectors"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(tok.as_str()) {
                return Err(model_format(n, format!("expected vectors for `{tok}`")));
            }
            let values: Vec<f64> = parts
                .map(|p| p.parse().map_err(|_| model_format(n, format!("bad value `{p}`"))))
                .collect::<Result<_>>()?;
            if values.len() != 2 * d {
                return Err(model_format(n, format!("expected {} values", 2 * d)));
            }
            input.extend_from_slice(&values[..d]);
            output.extend_from_slice(&values[d..]);
        }
        let epoch_losses = match lines.next() {
            Some((n, line)) => {
                let rest = line
                    .strip_prefix("losses")
                    .ok_or_else(|| model_format(n, "expected `losses`"))?;
                rest.split_whitespace()
                    .map(|p| p.parse().map_err(|_| model_format(n, "bad loss")))
                    .collect::<Result<_>>()?
            }
            None => Vec::new(),
        };
        Ok(EmbeddingModel {
            config,
            vocab,
            input,
            output,
            epoch_losses,
        })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`, stable for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Negative-sampling loss of one prediction:
/// `-ln σ(pos·h) - Σ ln σ(-neg·h)`, where `h` is the center input vector
/// (skip-gram) or the mean context vector (CBOW).
pub fn negative_sampling_loss(h: &[f64], pos: &[f64], negs: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(pos, h)) + negs.iter().map(|n| neg_log_sigmoid(-dot(n, h))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSamplingGradients {
    pub h: Vec<f64>,
    pub pos: Vec<f64>,
    pub negs: Vec<Vec<f64>>,
}

/// Analytic gradient of [`negative_sampling_loss`] with respect to each
/// argument.
pub fn negative_sampling_gradients(h: &[f64], pos: &[f64], negs: &[&[f64]]) -> NegativeSamplingGradients {
    let g_pos = sigmoid(dot(pos, h)) - 1.0;
    let mut gh: Vec<f64> = pos.iter().map(|p| g_pos * p).collect();
    let gpos: Vec<f64> = h.iter().map(|x| g_pos * x).collect();
    let mut gnegs = Vec::with_capacity(negs.len());
    for n in negs {
        let g = sigmoid(dot(n, h));
        for (acc, v) in gh.iter_mut().zip(n.iter()) {
            *acc += g * v;
        }
        gnegs.push(h.iter().map(|x| g * x).collect());
    }
    NegativeSamplingGradients {
        h: gh,
        pos: gpos,
        negs: gnegs,
    }
}

struct Trainer {
    d: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    rng: ChaCha8Rng,
    noise: WeightedIndex<f64>,
    negatives: usize,
}

impl Trainer {
    /// One SGD step on `h` predicting `target`; returns the loss and the
    /// gradient with respect to `h`. Output vectors are updated in place.
    fn step(&mut self, h: &[f64], target: usize, lr: f64) -> (f64, Vec<f64>) {
        let d = self.d;
        let mut negs: Vec<usize> = Vec::with_capacity(self.negatives);
        for _ in 0..self.negatives {
            let n = self.noise.sample(&mut self.rng);
            if n != target {
                negs.push(n);
            }
        }
        let pos = self.output[target * d..(target + 1) * d].to_vec();
        let neg_vecs: Vec<Vec<f64>> = negs.iter().map(|&n| self.output[n * d..(n + 1) * d].to_vec()).collect();
        let neg_refs: Vec<&[f64]> = neg_vecs.iter().map(Vec::as_slice).collect();
        let loss = negative_sampling_loss(h, &pos, &neg_refs);
        let g = negative_sampling_gradients(h, &pos, &neg_refs);
        for k in 0..d {
            self.output[target * d + k] -= lr * g.pos[k];
        }
        for (&n, gn) in negs.iter().zip(&g.negs) {
            for k in 0..d {
                self.output[n * d + k] -= lr * gn[k];
            }
        }
        (loss, g.h)
    }
}

/// Trains CBOW or skip-gram vectors with negative sampling. Single-threaded
/// and bit-reproducible for a given corpus and config.
pub fn train_embeddings(corpus: &[TokenSequence], config: &EmbeddingConfig) -> Result<EmbeddingModel> {
    config.check()?;
    let vocab = build_vocabulary(corpus)?;
    if vocab.len() < 2 {
        return Err(Error::DegenerateCorpus(format!(
            "vocabulary of {} token(s); need at least 2",
            vocab.len()
        )));
    }
    let d = config.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input: Vec<f64> = (0..v * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|p| p.tokens.iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect();
    let mut freq = vec![0.0f64; v];
    for s in &sentences {
        for &i in s {
            freq[i] += 1.0;
        }
    }
    let noise = WeightedIndex::new(freq.iter().map(|f| f.powf(0.75)))
        .map_err(|e| Error::DegenerateCorpus(e.to_string()))?;

    let mut t = Trainer {
        d,
        input,
        output: vec![0.0; v * d],
        rng,
        noise,
        negatives: config.negatives,
    };

    let total_words: usize = sentences.iter().map(Vec::len).sum();
    let total_steps = (config.epochs * total_words).max(1) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        for s in &sentences {
            for (i, &center) in s.iter().enumerate() {
                let lr = config.learning_rate * (1.0 - processed as f64 / total_steps).max(1e-4);
                processed += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(s.len());
                let context: Vec<usize> = (lo..hi).filter(|&j| j != i).map(|j| s[j]).collect();
                if context.is_empty() {
                    continue;
                }
                match config.mode {
                    EmbeddingMode::SkipGram => {
                        for &ctx in &context {
                            let h = t.input[center * d..(center + 1) * d].to_vec();
                            let (loss, gh) = t.step(&h, ctx, lr);
                            for k in 0..d {
                                t.input[center * d + k] -= lr * gh[k];
                            }
                            loss_sum += loss;
                            updates += 1;
                        }
                    }
                    EmbeddingMode::Cbow => {
                        let n = context.len() as f64;
                        let mut h = vec![0.0; d];
                        for &c in &context {
                            for k in 0..d {
                                h[k] += t.input[c * d + k] / n;
                            }
                        }
                        let (loss, gh) = t.step(&h, center, lr);
                        for &c in &context {
                            for k in 0..d {
                                t.input[c * d + k] -= lr * gh[k] / n;
                            }
                        }
                        loss_sum += loss;
                        updates += 1;
                    }
                }
            }
        }
        epoch_losses.push(if updates > 0 { loss_sum / updates as f64 } else { 0.0 });
    }

    Ok(EmbeddingModel {
        config: config.clone(),
        vocab,
        input: t.input,
        output: t.output,
        epoch_losses,
    })
}

/// Mean of the input vectors of in-vocabulary tokens; zero when none are.
pub fn embed_piece(piece: &TokenSequence, model: &EmbeddingModel) -> FeatureVector {
    let d = model.dim();
    let mut sum = vec![0.0; d];
    let mut n = 0usize;
    for v in piece.tokens.iter().filter_map(|t| model.vector_for(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    FeatureVector::Dense(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::School;

    fn piece(s: &str) -> TokenSequence {
        let toks: Vec<&str> = s.split_whitespace().collect();
        TokenSequence::from_tokens(&toks, School::North)
    }

    fn small_corpus() -> Vec<TokenSequence> {
        vec![
            piece("C41 D41 E41 G41 E41 D41 C41"),
            piece("A41 G41 E41 D41 C41 D41 E41"),
            piece("G41 A41 C51 A41 G41 E41"),
        ]
    }

    fn cfg(mode: EmbeddingMode) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 8,
            epochs: 5,
            ..EmbeddingConfig::new(mode, 11)
        }
    }

    #[test]
    fn deterministic_under_seed() {
        for mode in [EmbeddingMode::Cbow, EmbeddingMode::SkipGram] {
            let a = train_embeddings(&small_corpus(), &cfg(mode)).unwrap();
            let b = train_embeddings(&small_corpus(), &cfg(mode)).unwrap();
            assert_eq!(a, b);
            let c = train_embeddings(&small_corpus(), &EmbeddingConfig { seed: 12, ..cfg(mode) }).unwrap();
            assert_ne!(a.input, c.input);
        }
    }

    #[test]
    fn degenerate_vocabulary() {
        let r = train_embeddings(&[piece("C41 C41 C41")], &cfg(EmbeddingMode::SkipGram));
        assert!(matches!(r, Err(Error::DegenerateCorpus(_))));
        assert!(matches!(train_embeddings(&[], &cfg(EmbeddingMode::Cbow)), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn pooling() {
        let m = train_embeddings(&small_corpus(), &cfg(EmbeddingMode::SkipGram)).unwrap();
        let c = m.vector_for("C41").unwrap().to_vec();
        let d = m.vector_for("D41").unwrap().to_vec();
        assert_eq!(embed_piece(&piece("C41"), &m).to_dense(), c);
        let mean: Vec<f64> = c.iter().zip(&d).map(|(a, b)| (a + b) / 2.0).collect();
        let got = embed_piece(&piece("C41 D41"), &m).to_dense();
        for (g, w) in got.iter().zip(&mean) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(embed_piece(&piece("X99 Y99"), &m).to_dense(), vec![0.0; 8]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = train_embeddings(&small_corpus(), &cfg(EmbeddingMode::Cbow)).unwrap();
        let back = EmbeddingModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn stable_log_sigmoid() {
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(neg_log_sigmoid(800.0) >= 0.0);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-9);
    }
}
