//! Multinomial (softmax) logistic regression fit by gradient ascent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ModelError};

/// Rows per parallel chunk of the likelihood sums. Fixed so the summation
/// order, and therefore every bit of the result, is independent of threads.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlrConfig {
    /// Largest step taken; the step backs off when the objective would drop.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Penalty on non-bias weights.
    pub l2: f64,
    /// Unused by the deterministic optimizer; recorded for provenance.
    pub seed: u64,
    /// Stop when the largest gradient component falls below this.
    pub tol: f64,
}

impl Default for MlrConfig {
    fn default() -> Self {
        MlrConfig {
            learning_rate: 0.1,
            max_iters: 2000,
            l2: 1e-4,
            seed: 0,
            tol: 1e-8,
        }
    }
}

impl MlrConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::InvalidParams(format!("l2 {} must be >= 0", self.l2)));
        }
        if !(self.tol >= 0.0) {
            return Err(ModelError::InvalidParams(format!("tol {} must be >= 0", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub iterations: usize,
    pub converged: bool,
    /// Mean penalized log-likelihood after each accepted step, starting
    /// with the zero-weight value.
    pub objective: Vec<f64>,
}

impl TrainingLog {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().unwrap_or(&f64::NAN)
    }
}

/// Row-major `n_classes × (n_features + 1)`; column 0 is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub weights: Vec<f64>,
    pub config: MlrConfig,
    pub training_log: TrainingLog,
}

fn scores(w: &[f64], k: usize, x: &[f64], out: &mut [f64]) {
    let stride = x.len() + 1;
    for (c, o) in out.iter_mut().enumerate().take(k) {
        let row = &w[c * stride..(c + 1) * stride];
        *o = row[0] + row[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Log-softmax of `s` in place.
fn log_softmax(s: &mut [f64]) {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    for v in s {
        *v -= lse;
    }
}

fn penalty(w: &[f64], stride: usize, l2: f64) -> f64 {
    let sq: f64 = w
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride != 0)
        .map(|(_, v)| v * v)
        .sum();
    0.5 * l2 * sq
}

/// Mean log-likelihood minus `l2/2 · ‖W‖²` over non-bias weights.
pub fn penalized_log_likelihood(w: &[f64], x: &[&[f64]], y: &[u32], k: usize, l2: f64) -> f64 {
    let d = x.first().map_or(0, |r| r.len());
    let total: f64 = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(xs, ys)| {
            let mut s = vec![0.0; k];
            xs.iter()
                .zip(ys)
                .map(|(xi, &yi)| {
                    scores(w, k, xi, &mut s);
                    log_softmax(&mut s);
                    s[yi as usize]
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / x.len() as f64 - penalty(w, d + 1, l2)
}

/// Gradient of [`penalized_log_likelihood`] with respect to `w`.
pub fn gradient(w: &[f64], x: &[&[f64]], y: &[u32], k: usize, l2: f64) -> Vec<f64> {
    let d = x.first().map_or(0, |r| r.len());
    let stride = d + 1;
    let partials: Vec<Vec<f64>> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(xs, ys)| {
            let mut g = vec![0.0; k * stride];
            let mut s = vec![0.0; k];
            for (xi, &yi) in xs.iter().zip(ys) {
                scores(w, k, xi, &mut s);
                log_softmax(&mut s);
                for c in 0..k {
                    let r = f64::from(u8::from(c == yi as usize)) - s[c].exp();
                    let row = &mut g[c * stride..(c + 1) * stride];
                    row[0] += r;
                    for (gj, xj) in row[1..].iter_mut().zip(xi.iter()) {
                        *gj += r * xj;
                    }
                }
            }
            g
        })
        .collect();
    let n = x.len() as f64;
    let mut g = vec![0.0; k * stride];
    for p in &partials {
        for (a, b) in g.iter_mut().zip(p) {
            *a += b;
        }
    }
    for (i, gi) in g.iter_mut().enumerate() {
        *gi /= n;
        if i % stride != 0 {
            *gi -= l2 * w[i];
        }
    }
    g
}

pub fn mlr_train(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    config: &MlrConfig,
) -> Result<LogisticModel, ModelError> {
    let d = check_training_set(x, y, n_classes)?;
    config.validate()?;
    if y.iter().all(|&c| c == y[0]) {
        return Err(ModelError::SingleClass(y[0]));
    }
    let k = n_classes;
    let mut w = vec![0.0; k * (d + 1)];
    let mut obj = penalized_log_likelihood(&w, x, y, k, config.l2);
    let mut log = TrainingLog {
        iterations: 0,
        converged: false,
        objective: vec![obj],
    };
    let mut step = config.learning_rate;
    let mut trial = vec![0.0; w.len()];
    for it in 0..config.max_iters {
        let g = gradient(&w, x, y, k, config.l2);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { iteration: it });
        }
        if g.iter().all(|v| v.abs() < config.tol) {
            log.converged = true;
            break;
        }
        let accepted = loop {
            for ((t, wi), gi) in trial.iter_mut().zip(&w).zip(&g) {
                *t = wi + step * gi;
            }
            let o = penalized_log_likelihood(&trial, x, y, k, config.l2);
            if o.is_finite() && o >= obj {
                break Some(o);
            }
            step *= 0.5;
            if step < 1e-18 {
                break None;
            }
        };
        log.iterations = it + 1;
        let Some(o) = accepted else {
            // no ascent direction left at machine precision
            log.converged = true;
            break;
        };
        std::mem::swap(&mut w, &mut trial);
        obj = o;
        log.objective.push(obj);
        step = (step * 1.25).min(config.learning_rate);
    }
    if !obj.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite {
            iteration: log.iterations,
        });
    }
    Ok(LogisticModel {
        n_features: d,
        n_classes: k,
        weights: w,
        config: *config,
        training_log: log,
    })
}

impl LogisticModel {
    /// All-zero weights: uniform probabilities.
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        LogisticModel {
            n_features,
            n_classes,
            weights: vec![0.0; n_classes * (n_features + 1)],
            config: MlrConfig::default(),
            training_log: TrainingLog {
                iterations: 0,
                converged: false,
                objective: vec![],
            },
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::FeatureLength {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn log_probabilities(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_len(x)?;
        let mut s = vec![0.0; self.n_classes];
        scores(&self.weights, self.n_classes, x, &mut s);
        log_softmax(&mut s);
        Ok(s)
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.log_probabilities(x)?.into_iter().map(f64::exp).collect())
    }

    /// Sum of log p(y_i | x_i), unpenalized.
    pub fn log_likelihood(&self, x: &[&[f64]], y: &[u32]) -> Result<f64, ModelError> {
        let mut ll = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            ll += self.log_probabilities(xi)?[yi as usize];
        }
        Ok(ll)
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Argmax of the scores; ties go to the smallest class code.
    fn predict(&self, x: &[f64]) -> Result<u32, ModelError> {
        self.check_len(x)?;
        let mut s = vec![0.0; self.n_classes];
        scores(&self.weights, self.n_classes, x, &mut s);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        Ok(best as u32)
    }
}

/// McFadden's pseudo-R²: `1 − LL(model) / LL(null)`, where the null model
/// predicts the empirical class frequencies of `y`.
pub fn mcfadden_pseudo_r2(model: &LogisticModel, x: &[&[f64]], y: &[u32]) -> Result<f64, ModelError> {
    if y.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut counts = vec![0usize; model.n_classes];
    for &c in y {
        *counts
            .get_mut(c as usize)
            .ok_or(ModelError::TargetOutOfRange { target: c, n_classes: model.n_classes })? += 1;
    }
    let n = y.len() as f64;
    let ll_null: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / n).ln())
        .sum();
    if ll_null == 0.0 {
        return Err(ModelError::SingleClass(y[0]));
    }
    Ok(1.0 - model.log_likelihood(x, y)? / ll_null)
}
