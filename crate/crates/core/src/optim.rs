//! Limited-memory BFGS with backtracking (Armijo) line search, used to fit
//! the log-linear classifier and the CRF. Fully deterministic.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    pub history: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            history: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the objective value and its gradient.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &Options) -> Outcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history);

    for iter in 0..opts.max_iterations {
        if inf_norm(&g) < opts.gradient_tolerance {
            return Outcome {
                x,
                value: fx,
                iterations: iter,
                converged: true,
            };
        }

        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in &mut q {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction; fall back to steepest descent
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if pairs.is_empty() {
            (1.0 / inf_norm(&g).max(1.0)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return Outcome {
                x,
                value: fx,
                iterations: iter,
                converged: false,
            };
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if pairs.len() == opts.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let done = (fx - fn_).abs() <= 1e-14 * fx.abs().max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if done {
            return Outcome {
                x,
                value: fx,
                iterations: iter + 1,
                converged: inf_norm(&g) < opts.gradient_tolerance.sqrt(),
            };
        }
    }
    Outcome {
        converged: inf_norm(&g) < opts.gradient_tolerance,
        x,
        value: fx,
        iterations: opts.max_iterations,
    }
}
