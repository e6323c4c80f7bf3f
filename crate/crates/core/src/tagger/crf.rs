use std::collections::HashMap;
use std::fmt::Write;

use super::rules::RuleSet;
use crate::error::{model_format, Error, Result};
use crate::notation::{Technique, TechniqueRegistry};
use crate::optim;
use crate::represent::{split_token, token_pitch_class};

const FORMAT_HEADER: &str = "dizi-crf 1";

/// Tokens of one piece with the gold technique of every note.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSequence {
    pub tokens: Vec<String>,
    pub tags: Vec<Technique>,
}

impl TaggedSequence {
    pub fn new(tokens: Vec<String>, tags: Vec<Technique>) -> Self {
        assert_eq!(tokens.len(), tags.len(), "one tag per token");
        TaggedSequence { tokens, tags }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Observation features at position `i`: a bias, the token and its
/// neighbours, pitch class, duration text, and first/last flags.
pub fn observation_features(tokens: &[String], i: usize) -> Vec<String> {
    let tok = &tokens[i];
    let mut f = Vec::with_capacity(8);
    f.push("bias".to_string());
    f.push(format!("w={tok}"));
    f.push(match i.checked_sub(1) {
        Some(p) => format!("w-1={}", tokens[p]),
        None => "w-1=<s>".to_string(),
    });
    f.push(match tokens.get(i + 1) {
        Some(n) => format!("w+1={n}"),
        None => "w+1=</s>".to_string(),
    });
    f.push(format!("pc={}", token_pitch_class(tok)));
    f.push(format!("dur={}", split_token(tok).1));
    if i == 0 {
        f.push("first".to_string());
    }
    if i + 1 == tokens.len() {
        f.push("last".to_string());
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfConfig {
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub tags: Vec<Technique>,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            l2: 0.1,
            max_iterations: 200,
            tolerance: 1e-5,
            seed: 0,
            tags: TechniqueRegistry::default().techniques().to_vec(),
        }
    }
}

/// Linear-chain CRF over technique tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    tags: Vec<Technique>,
    features: Vec<String>,
    feature_index: HashMap<String, usize>,
    /// Row-major `features × tags`.
    emission: Vec<f64>,
    /// Row-major `tags × tags`, indexed `[previous][current]`.
    transition: Vec<f64>,
    pub config: CrfConfig,
}

impl CrfModel {
    /// A model with every weight zero.
    pub fn new(tags: Vec<Technique>, features: Vec<String>) -> Self {
        let t = tags.len();
        let feature_index = features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        CrfModel {
            emission: vec![0.0; features.len() * t],
            transition: vec![0.0; t * t],
            config: CrfConfig {
                tags: tags.clone(),
                ..Default::default()
            },
            tags,
            features,
            feature_index,
        }
    }

    pub fn tags(&self) -> &[Technique] {
        &self.tags
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn tag_index(&self, tag: &Technique) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn emission_weight(&self, feature: &str, tag: usize) -> f64 {
        self.feature_index
            .get(feature)
            .map(|&f| self.emission[f * self.tags.len() + tag])
            .unwrap_or(0.0)
    }

    /// Sets a feature weight, adding the feature if it is new.
    pub fn set_emission(&mut self, feature: &str, tag: usize, weight: f64) {
        let t = self.tags.len();
        let f = match self.feature_index.get(feature) {
            Some(&f) => f,
            None => {
                let f = self.features.len();
                self.features.push(feature.to_string());
                self.feature_index.insert(feature.to_string(), f);
                self.emission.extend(std::iter::repeat(0.0).take(t));
                f
            }
        };
        self.emission[f * t + tag] = weight;
    }

    pub fn transition_weight(&self, prev: usize, cur: usize) -> f64 {
        self.transition[prev * self.tags.len() + cur]
    }

    pub fn set_transition(&mut self, prev: usize, cur: usize, weight: f64) {
        let t = self.tags.len();
        self.transition[prev * t + cur] = weight;
    }

    /// Number of trainable parameters: emission then transition weights.
    pub fn param_count(&self) -> usize {
        self.emission.len() + self.transition.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.emission.iter().chain(&self.transition).copied().collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.emission.len();
        self.emission.copy_from_slice(&p[..n]);
        self.transition.copy_from_slice(&p[n..]);
    }

    fn compile(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        (0..tokens.len())
            .map(|i| {
                observation_features(tokens, i)
                    .iter()
                    .filter_map(|f| self.feature_index.get(f).copied())
                    .collect()
            })
            .collect()
    }

    /// Per-position, per-tag emission scores.
    pub fn emission_scores(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        let t = self.tags.len();
        self.compile(tokens)
            .iter()
            .map(|feats| {
                let mut row = vec![0.0; t];
                for &f in feats {
                    for (y, r) in row.iter_mut().enumerate() {
                        *r += self.emission[f * t + y];
                    }
                }
                row
            })
            .collect()
    }

    /// Unnormalized score of a tag path (tag indices).
    pub fn path_score(&self, emissions: &[Vec<f64>], path: &[usize]) -> f64 {
        let mut s = 0.0;
        for (i, &y) in path.iter().enumerate() {
            s += emissions[i][y];
            if i > 0 {
                s += self.transition_weight(path[i - 1], y);
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(out, "config {} {} {} {}", c.l2, c.max_iterations, c.tolerance, c.seed);
        let codes: Vec<&str> = self.tags.iter().map(|t| t.code()).collect();
        let _ = writeln!(out, "tags {}", codes.join(" "));
        let _ = writeln!(out, "features {}", self.features.len());
        let t = self.tags.len();
        for (i, f) in self.features.iter().enumerate() {
            let _ = write!(out, "{f}");
            for w in &self.emission[i * t..(i + 1) * t] {
                let _ = write!(out, " {w}");
            }
            out.push('\n');
        }
        out.push_str("transitions\n");
        for row in self.transition.chunks(t) {
            let vals: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }

    /// Reads a model; custom technique codes must exist in `registry`.
    pub fn from_text(text: &str, registry: &TechniqueRegistry) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| lines.next().ok_or_else(|| model_format(0, format!("missing {what}")));
        let (n, head) = next("header")?;
        if head != FORMAT_HEADER {
            return Err(model_format(n, "not a CRF model"));
        }
        let (n, cfg) = next("config")?;
        let f: Vec<&str> = cfg.split_whitespace().collect();
        if f.len() != 5 || f[0] != "config" {
            return Err(model_format(n, "expected `config <l2> <max_iter> <tol> <seed>`"));
        }
        let bad = |what: &str| model_format(n, format!("bad {what}"));
        let l2: f64 = f[1].parse().map_err(|_| bad("l2"))?;
        let max_iterations: usize = f[2].parse().map_err(|_| bad("iterations"))?;
        let tolerance: f64 = f[3].parse().map_err(|_| bad("tolerance"))?;
        let seed: u64 = f[4].parse().map_err(|_| bad("seed"))?;

        let (n, tags_line) = next("tags")?;
        let tags: Vec<Technique> = tags_line
            .strip_prefix("tags ")
            .ok_or_else(|| model_format(n, "expected `tags ...`"))?
            .split_whitespace()
            .map(|c| registry.lookup(c).ok_or_else(|| model_format(n, format!("unknown tag `{c}`"))))
            .collect::<Result<_>>()?;
        let t = tags.len();
        let (n, feat_line) = next("features")?;
        let count: usize = feat_line
            .strip_prefix("features ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| model_format(n, "expected `features <count>`"))?;
        let mut features = Vec::with_capacity(count);
        let mut emission = Vec::with_capacity(count * t);
        for _ in 0..count {
            let (n, line) = next("feature")?;
            let mut parts = line.split_whitespace();
            let name = parts.next().ok_or_else(|| model_format(n, "empty feature line"))?;
            let vals: Vec<f64> = parts
                .map(|v| v.parse().map_err(|_| model_format(n, format!("bad weight `{v}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != t {
                return Err(model_format(n, format!("expected {t} weights")));
            }
            features.push(name.to_string());
            emission.extend(vals);
        }
        let (n, marker) = next("transitions")?;
        if marker != "transitions" {
            return Err(model_format(n, "expected `transitions`"));
        }
        let mut transition = Vec::with_capacity(t * t);
        for _ in 0..t {
            let (n, line) = next("transition row")?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| model_format(n, format!("bad weight `{v}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != t {
                return Err(model_format(n, format!("expected {t} weights")));
            }
            transition.extend(vals);
        }
        let mut model = CrfModel::new(tags.clone(), features);
        if model.feature_index.len() != model.features.len() {
            return Err(model_format(0, "duplicate feature"));
        }
        model.emission = emission;
        model.transition = transition;
        model.config = CrfConfig {
            l2,
            max_iterations,
            tolerance,
            seed,
            tags,
        };
        Ok(model)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Forward-backward results in log space.
pub struct Lattice {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub log_z: f64,
}

impl Lattice {
    pub fn new(model: &CrfModel, emissions: &[Vec<f64>]) -> Self {
        let n = emissions.len();
        let t = model.tags.len();
        let mut alpha = vec![vec![0.0; t]; n];
        let mut beta = vec![vec![0.0; t]; n];
        if n == 0 {
            return Lattice { alpha, beta, log_z: 0.0 };
        }
        alpha[0].clone_from(&emissions[0]);
        let mut buf = vec![0.0; t];
        for i in 1..n {
            for y in 0..t {
                for (p, b) in buf.iter_mut().enumerate() {
                    *b = alpha[i - 1][p] + model.transition_weight(p, y);
                }
                alpha[i][y] = emissions[i][y] + log_sum_exp(&buf);
            }
        }
        for i in (0..n - 1).rev() {
            for y in 0..t {
                for (nx, b) in buf.iter_mut().enumerate() {
                    *b = model.transition_weight(y, nx) + emissions[i + 1][nx] + beta[i + 1][nx];
                }
                beta[i][y] = log_sum_exp(&buf);
            }
        }
        let log_z = log_sum_exp(&alpha[n - 1]);
        Lattice { alpha, beta, log_z }
    }

    /// Posterior probability of each tag at each position.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y - self.log_z).exp()).collect())
            .collect()
    }
}

/// Conditional log-likelihood `log p(tags | tokens)` for tag indices.
pub fn log_likelihood(model: &CrfModel, tokens: &[String], tags: &[usize]) -> f64 {
    let em = model.emission_scores(tokens);
    model.path_score(&em, tags) - Lattice::new(model, &em).log_z
}

struct Compiled {
    feats: Vec<Vec<usize>>,
    tags: Vec<usize>,
}

fn compile_data(model: &CrfModel, data: &[TaggedSequence]) -> Result<Vec<Compiled>> {
    data.iter()
        .map(|s| {
            if s.is_empty() {
                return Err(Error::EmptySequence);
            }
            let tags = s
                .tags
                .iter()
                .map(|t| model.tag_index(t).ok_or_else(|| Error::UnregisteredTag(t.code().to_string())))
                .collect::<Result<Vec<_>>>()?;
            Ok(Compiled {
                feats: model.compile(&s.tokens),
                tags,
            })
        })
        .collect()
}

fn objective_compiled(model: &CrfModel, data: &[Compiled], l2: f64) -> (f64, Vec<f64>) {
    let t = model.tags.len();
    let ne = model.emission.len();
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for seq in data {
        let em: Vec<Vec<f64>> = seq
            .feats
            .iter()
            .map(|fs| {
                let mut row = vec![0.0; t];
                for &f in fs {
                    for (y, r) in row.iter_mut().enumerate() {
                        *r += model.emission[f * t + y];
                    }
                }
                row
            })
            .collect();
        let lat = Lattice::new(model, &em);
        loss -= model.path_score(&em, &seq.tags) - lat.log_z;

        // observed counts enter negatively, expectations positively
        for (i, &y) in seq.tags.iter().enumerate() {
            for &f in &seq.feats[i] {
                grad[f * t + y] -= 1.0 / n;
            }
            if i > 0 {
                grad[ne + seq.tags[i - 1] * t + y] -= 1.0 / n;
            }
        }
        let marg = lat.marginals();
        for (i, fs) in seq.feats.iter().enumerate() {
            for &f in fs {
                for y in 0..t {
                    grad[f * t + y] += marg[i][y] / n;
                }
            }
        }
        for i in 1..em.len() {
            for p in 0..t {
                for y in 0..t {
                    let lp = lat.alpha[i - 1][p] + model.transition_weight(p, y) + em[i][y] + lat.beta[i][y] - lat.log_z;
                    grad[ne + p * t + y] += lp.exp() / n;
                }
            }
        }
    }
    loss /= n;
    let params = model.params();
    for (g, w) in grad.iter_mut().zip(&params) {
        loss += 0.5 * l2 * w * w;
        *g += l2 * w;
    }
    (loss, grad)
}

/// Mean negative conditional log-likelihood plus `l2/2 · ‖θ‖²` and its
/// gradient over [`CrfModel::params`].
pub fn crf_objective(model: &CrfModel, data: &[TaggedSequence], l2: f64) -> Result<(f64, Vec<f64>)> {
    let compiled = compile_data(model, data)?;
    Ok(objective_compiled(model, &compiled, l2))
}

/// Fits a CRF by maximizing the regularized conditional log-likelihood. The
/// feature set is every observation feature seen in `data`.
pub fn train_crf(data: &[TaggedSequence], config: &CrfConfig) -> Result<CrfModel> {
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.tags.is_empty() {
        return Err(Error::Config("empty tag set".into()));
    }
    let mut features: Vec<String> = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    for s in data {
        for i in 0..s.len() {
            for f in observation_features(&s.tokens, i) {
                if seen.insert(f.clone(), ()).is_none() {
                    features.push(f);
                }
            }
        }
    }
    let mut model = CrfModel::new(config.tags.clone(), features);
    model.config = config.clone();
    let compiled = compile_data(&model, data)?;

    let opts = optim::Options {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.tolerance,
        ..Default::default()
    };
    let mut work = model.clone();
    let out = optim::minimize(
        |p| {
            work.set_params(p);
            objective_compiled(&work, &compiled, config.l2)
        },
        model.params(),
        &opts,
    );
    model.set_params(&out.x);
    Ok(model)
}

/// Best tag path under the model, optionally with rules applied: forbidden
/// tags score −∞ and boosts are added before maximizing. Ties go to the
/// lexicographically smallest path (lowest tag index first).
pub fn decode(model: &CrfModel, tokens: &[String], rules: Option<&RuleSet>) -> Result<Vec<Technique>> {
    decode_indices(model, tokens, rules).map(|p| p.into_iter().map(|i| model.tags[i].clone()).collect())
}

pub fn decode_indices(model: &CrfModel, tokens: &[String], rules: Option<&RuleSet>) -> Result<Vec<usize>> {
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut em = model.emission_scores(tokens);
    if let Some(rules) = rules {
        rules.apply(tokens, model.tags(), &mut em)?;
    }
    viterbi(model, &em)
}

/// Max-sum over a score lattice. Runs the max pass from the end so that
/// choosing tags left to right with lowest-index tie-breaks yields the
/// lexicographically smallest optimal path.
pub fn viterbi(model: &CrfModel, emissions: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = emissions.len();
    let t = model.tags.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    for (i, row) in emissions.iter().enumerate() {
        if row.iter().all(|s| *s == f64::NEG_INFINITY) {
            return Err(Error::AllTagsForbidden(i));
        }
    }
    // best[i][y]: best score of positions i.. given tag y at i
    let mut best = vec![vec![0.0; t]; n];
    best[n - 1].clone_from(&emissions[n - 1]);
    for i in (0..n - 1).rev() {
        for y in 0..t {
            let tail = (0..t)
                .map(|nx| model.transition_weight(y, nx) + best[i + 1][nx])
                .fold(f64::NEG_INFINITY, f64::max);
            best[i][y] = emissions[i][y] + tail;
        }
    }
    let pick = |scores: &mut dyn Iterator<Item = f64>| -> usize {
        let mut arg = 0;
        let mut max = f64::NEG_INFINITY;
        for (y, s) in scores.enumerate() {
            if s > max {
                max = s;
                arg = y;
            }
        }
        arg
    };
    let mut path = Vec::with_capacity(n);
    path.push(pick(&mut best[0].iter().copied()));
    for i in 1..n {
        let prev = path[i - 1];
        let y = pick(&mut (0..t).map(|y| model.transition_weight(prev, y) + best[i][y]));
        path.push(y);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn features_template() {
        let t = toks("C41 D40.5");
        assert_eq!(
            observation_features(&t, 0),
            ["bias", "w=C41", "w-1=<s>", "w+1=D40.5", "pc=C", "dur=1", "first"]
        );
        assert_eq!(
            observation_features(&t, 1),
            ["bias", "w=D40.5", "w-1=C41", "w+1=</s>", "pc=D", "dur=0.5", "last"]
        );
    }

    #[test]
    fn zero_iterations_give_lowest_index_path() {
        let data = vec![TaggedSequence::new(
            toks("C41 D41 E41"),
            vec![Technique::Tonguing, Technique::Trill, Technique::Tonguing],
        )];
        let cfg = CrfConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let m = train_crf(&data, &cfg).unwrap();
        assert!(m.params().iter().all(|w| *w == 0.0));
        assert_eq!(decode(&m, &data[0].tokens, None).unwrap(), vec![Technique::None; 3]);
    }

    #[test]
    fn marginals_sum_to_one() {
        let data = vec![
            TaggedSequence::new(toks("C41 D41 E41 C41"), vec![Technique::Tonguing, Technique::None, Technique::Trill, Technique::Tonguing]),
            TaggedSequence::new(toks("E41 D41"), vec![Technique::Trill, Technique::None]),
        ];
        let m = train_crf(&data, &CrfConfig { max_iterations: 5, ..Default::default() }).unwrap();
        let em = m.emission_scores(&toks("C41 E41 G41 D41"));
        for row in Lattice::new(&m, &em).marginals() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let cfg = CrfConfig::default();
        assert!(matches!(train_crf(&[], &cfg), Err(Error::EmptyCorpus)));
        let empty = vec![TaggedSequence::new(vec![], vec![])];
        assert!(matches!(train_crf(&empty, &cfg), Err(Error::EmptySequence)));
        let custom = vec![TaggedSequence::new(toks("C41"), vec![Technique::Custom("vib".into())])];
        assert!(matches!(train_crf(&custom, &cfg), Err(Error::UnregisteredTag(_))));
        let m = CrfModel::new(cfg.tags.clone(), vec![]);
        assert!(matches!(decode(&m, &[], None), Err(Error::EmptySequence)));
    }

    #[test]
    fn text_round_trip() {
        let data = vec![TaggedSequence::new(toks("C41 D41"), vec![Technique::Tonguing, Technique::None])];
        let m = train_crf(&data, &CrfConfig { max_iterations: 3, ..Default::default() }).unwrap();
        let back = CrfModel::from_text(&m.to_text(), &TechniqueRegistry::default()).unwrap();
        assert_eq!(back, m);
    }
}
