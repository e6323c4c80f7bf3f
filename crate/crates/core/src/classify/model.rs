use std::fmt::Write;

use crate::error::{model_format, Error, Result};
use crate::features::FeatureVector;
use crate::notation::School;
use crate::optim;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// L2 penalty on the weights (biases are not penalized).
    pub l2: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-3,
            max_iterations: 300,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression: one weight row and bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearModel {
    pub classes: Vec<School>,
    pub dim: usize,
    /// Row-major `classes.len() × dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub seed: u64,
}

/// A predicted label with the full class distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: School,
    pub probabilities: Vec<(School, f64)>,
}

impl Prediction {
    pub fn probability_of(&self, school: School) -> f64 {
        self.probabilities
            .iter()
            .find(|(s, _)| *s == school)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl LogLinearModel {
    pub fn zeros(classes: Vec<School>, dim: usize) -> Self {
        let k = classes.len();
        LogLinearModel {
            classes,
            dim,
            weights: vec![0.0; k * dim],
            bias: vec![0.0; k],
            l2: 0.0,
            seed: 0,
        }
    }

    pub fn scores(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok((0..self.classes.len())
            .map(|c| self.bias[c] + x.dot(&self.weights[c * self.dim..(c + 1) * self.dim]))
            .collect())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        let probs = softmax(&self.scores(x)?);
        let label = self.classes[argmax(&probs)];
        Ok(Prediction {
            label,
            probabilities: self.classes.iter().copied().zip(probs).collect(),
        })
    }

    fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    fn set_params(&mut self, p: &[f64]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&p[..n]);
        self.bias.copy_from_slice(&p[n..]);
    }

    pub fn write_text(&self, out: &mut String) {
        let classes: Vec<&str> = self.classes.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(out, "loglinear {} {} {} {}", classes.join(","), self.dim, self.l2, self.seed);
        for c in 0..self.classes.len() {
            let _ = write!(out, "{}", self.bias[c]);
            for w in &self.weights[c * self.dim..(c + 1) * self.dim] {
                let _ = write!(out, " {w}");
            }
            out.push('\n');
        }
    }

    pub(crate) fn read_text<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (n, header) = lines.next().ok_or_else(|| model_format(0, "missing classifier weights"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 || f[0] != "loglinear" {
            return Err(model_format(n, "expected `loglinear <classes> <dim> <l2> <seed>`"));
        }
        let classes: Vec<School> = f[1]
            .split(',')
            .map(|s| s.parse().map_err(|_| model_format(n, format!("bad class `{s}`"))))
            .collect::<Result<_>>()?;
        let dim: usize = f[2].parse().map_err(|_| model_format(n, "bad dimension"))?;
        let mut m = LogLinearModel::zeros(classes, dim);
        m.l2 = f[3].parse().map_err(|_| model_format(n, "bad l2"))?;
        m.seed = f[4].parse().map_err(|_| model_format(n, "bad seed"))?;
        for c in 0..m.classes.len() {
            let (n, line) = lines.next().ok_or_else(|| model_format(n, "truncated weights"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| model_format(n, format!("bad weight `{v}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != dim + 1 {
                return Err(model_format(n, format!("expected {} values", dim + 1)));
            }
            m.bias[c] = vals[0];
            m.weights[c * dim..(c + 1) * dim].copy_from_slice(&vals[1..]);
        }
        Ok(m)
    }
}

/// A labelled training example.
pub type Example = (FeatureVector, School);

/// Mean negative log-likelihood plus `l2/2 · ‖W‖²`, and its gradient with
/// respect to `[weights..., bias...]`.
pub fn objective(model: &LogLinearModel, data: &[Example], l2: f64) -> (f64, Vec<f64>) {
    let k = model.classes.len();
    let d = model.dim;
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; k * d + k];
    for (x, y) in data {
        let scores = model.scores(x).expect("dimensions checked before training");
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        let yi = model.classes.iter().position(|c| c == y).expect("label among classes");
        loss += lse - scores[yi];
        for c in 0..k {
            let p = (scores[c] - lse).exp();
            let r = (p - if c == yi { 1.0 } else { 0.0 }) / n;
            for (j, v) in x.iter() {
                grad[c * d + j] += r * v;
            }
            grad[k * d + c] += r;
        }
    }
    loss /= n;
    for (i, w) in model.weights.iter().enumerate() {
        loss += 0.5 * l2 * w * w;
        grad[i] += l2 * w;
    }
    (loss, grad)
}

/// Fits an L2-regularized multinomial logistic model by L-BFGS from zero
/// weights.
pub fn train_classifier(data: &[Example], config: &ClassifierConfig) -> Result<LogLinearModel> {
    let mut classes: Vec<School> = data.iter().map(|(_, y)| *y).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let dim = data[0].0.dim();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
    }
    let mut model = LogLinearModel::zeros(classes, dim);
    model.l2 = config.l2;
    model.seed = config.seed;

    let opts = optim::Options {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.tolerance,
        ..Default::default()
    };
    let mut work = model.clone();
    let out = optim::minimize(
        |p| {
            work.set_params(p);
            objective(&work, data, config.l2)
        },
        model.params(),
        &opts,
    );
    model.set_params(&out.x);
    Ok(model)
}
