//! L2-regularized multinomial logistic regression, fit by full-batch L-BFGS
//! with Armijo backtracking. Everything is sequential and seed-free, so a
//! given input always yields bit-identical parameters.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    pub memory: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 1000,
            tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub fold: Option<usize>,
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    /// Objective value at the start and after every accepted step.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// classes x features
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub lambda: f64,
    pub meta: TrainingMeta,
}

impl LogisticModel {
    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn logits(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + dot(w, row))
            .collect()
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits(row))
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba(row))
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_inputs(x: &[Vec<f64>], y: &[usize], n_classes: usize, lambda: f64) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::validation("X", "no rows"));
    }
    if x.len() != y.len() {
        return Err(Error::validation(
            "y",
            format!("{} labels for {} rows", y.len(), x.len()),
        ));
    }
    if n_classes < 2 {
        return Err(Error::validation("n_classes", "need at least two classes"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::validation("lambda", format!("{lambda} is not a non-negative real")));
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::validation(format!("X[{i}]"), "ragged row"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("X[{i}]"), "non-finite value"));
        }
    }
    if let Some(i) = y.iter().position(|&c| c >= n_classes) {
        return Err(Error::validation(format!("y[{i}]"), "class index out of range"));
    }
    Ok(d)
}

/// Objective and gradient at `theta`.
///
/// `theta` holds one block of `d + 1` values per class: the `d` weights
/// followed by the bias. The objective is the summed cross-entropy plus
/// `lambda / 2` times the squared norm of the weights (biases excluded).
pub fn objective(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let stride = d + 1;
    debug_assert_eq!(theta.len(), n_classes * stride);
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; n_classes];
    for (row, &label) in x.iter().zip(y) {
        for (c, zc) in z.iter_mut().enumerate() {
            let block = &theta[c * stride..(c + 1) * stride];
            *zc = block[d] + dot(&block[..d], row);
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[label];
        for c in 0..n_classes {
            let r = (z[c] - lse).exp() - if c == label { 1.0 } else { 0.0 };
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (gj, xj) in g[..d].iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    for c in 0..n_classes {
        for j in 0..d {
            let w = theta[c * stride + j];
            loss += 0.5 * lambda * w * w;
            grad[c * stride + j] += lambda * w;
        }
    }
    (loss, grad)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn fit_logistic(x: &[Vec<f64>], y: &[usize], n_classes: usize, lambda: f64) -> Result<LogisticModel> {
    fit_logistic_with(x, y, n_classes, lambda, &FitOptions::default())
}

pub fn fit_logistic_with(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    lambda: f64,
    opts: &FitOptions,
) -> Result<LogisticModel> {
    let d = check_inputs(x, y, n_classes, lambda)?;
    let stride = d + 1;
    let eval = |t: &[f64]| objective(x, y, n_classes, lambda, t);

    let mut theta = vec![0.0; n_classes * stride];
    let (mut f, mut g) = eval(&theta);
    let mut history = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if max_abs(&g) < opts.tol {
            converged = true;
            break;
        }
        let mut steepest = memory.is_empty();
        let mut dir = two_loop(&g, &memory);
        if dot(&dir, &g) >= 0.0 {
            memory.clear();
            steepest = true;
            dir = g.iter().map(|v| -v).collect();
        }
        let step = loop {
            let t0 = if steepest {
                1.0 / max_abs(&g).max(1.0)
            } else {
                1.0
            };
            match backtrack(&eval, &theta, f, &g, &dir, t0) {
                Some(found) => break Some(found),
                None if !steepest => {
                    memory.clear();
                    steepest = true;
                    dir = g.iter().map(|v| -v).collect();
                }
                None => break None,
            }
        };
        let Some((t, f_new, g_new)) = step else {
            // no decrease possible at working precision
            break;
        };
        let s: Vec<f64> = dir.iter().map(|v| t * v).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s.clone(), yv, 1.0 / sy));
        }
        for (th, si) in theta.iter_mut().zip(&s) {
            *th += si;
        }
        f = f_new;
        g = g_new;
        history.push(f);
        iterations += 1;
    }
    if !converged && max_abs(&g) < opts.tol {
        converged = true;
    }
    if !converged {
        log::warn!(
            "logistic fit stopped after {iterations} iterations with gradient max-norm {:.3e}",
            max_abs(&g)
        );
    }

    let weights = (0..n_classes)
        .map(|c| theta[c * stride..c * stride + d].to_vec())
        .collect();
    let bias = (0..n_classes).map(|c| theta[c * stride + d]).collect();
    Ok(LogisticModel {
        weights,
        bias,
        lambda,
        meta: TrainingMeta {
            fold: None,
            iterations,
            final_loss: f,
            converged,
            loss_history: history,
        },
    })
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

fn backtrack<F>(
    eval: &F,
    theta: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
    t0: f64,
) -> Option<(f64, f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    let slope = dot(g, dir);
    let mut t = t0;
    for _ in 0..60 {
        let trial: Vec<f64> = theta.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        let (ft, gt) = eval(&trial);
        if ft.is_finite() && ft <= f + C1 * t * slope && ft < f {
            return Some((t, ft, gt));
        }
        t *= 0.5;
    }
    None
}
