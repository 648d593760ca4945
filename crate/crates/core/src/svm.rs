//! C-SVC binary classifier with an RBF kernel, trained by sequential minimal
//! optimization with maximal-violating-pair working-set selection, plus
//! stratified cross-validated hyperparameter grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::stratified_folds;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },
    #[error("training data contains a single class")]
    DegenerateLabels,
    #[error("non-finite feature value in row {row}")]
    NonFinite { row: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// RBF bandwidth: K(x, y) = exp(-gamma * ||x - y||^2).
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint.
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Guard on the number of working-set updates.
    pub max_iter: usize,
    pub kernel: KernelParams,
}

impl TrainConfig {
    pub fn new(c: f64, gamma: f64) -> TrainConfig {
        TrainConfig {
            c,
            tol: 1e-3,
            max_iter: 1_000_000,
            kernel: KernelParams { gamma },
        }
    }
}

/// Trained C-SVC model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Training rows with nonzero dual coefficient.
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed alphas (alpha_i * y_i), parallel to `support_vectors`.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelParams,
    /// Class names for the -1 and +1 sides.
    pub label_map: [String; 2],
    pub converged: bool,
    /// Maximal violating-pair gap at termination.
    pub kkt_violation: f64,
    /// Final dual objective sum(alpha) - 0.5 * alpha' Q alpha.
    pub dual_objective: f64,
}

/// RBF kernel value exp(-gamma * ||x - y||^2).
pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::Shape {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(rbf_unchecked(x, y, gamma))
}

fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * sq).exp()
}

/// Trains a C-SVC by SMO on the dual problem.
///
/// `labels` must be -1 or +1. Terminates when the maximal violating-pair gap
/// drops below `cfg.tol`, or after `cfg.max_iter` updates (the model is still
/// returned with `converged = false`). The bias is averaged over free support
/// vectors, falling back to the violating-pair midpoint when none are free.
pub fn train(
    x: &[Vec<f64>],
    labels: &[i8],
    cfg: &TrainConfig,
    label_map: [String; 2],
) -> Result<SvmModel, SvmError> {
    let n = x.len();
    if n < 2 {
        return Err(SvmError::TooFewSamples { min: 2, got: n });
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(SvmError::DegenerateLabels);
    }
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != x[0].len() {
            return Err(SvmError::Shape {
                left: x[0].len(),
                right: xi.len(),
            });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite { row });
        }
    }
    let gamma = cfg.kernel.gamma;
    let c = cfg.c;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();

    // full Gram matrix; problem sizes here are small
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf_unchecked(&x[i], &x[j], gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a'Qa - e'a, Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let mut converged = false;
    let mut gap = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        // maximal violating pair: i in I_up maximizing -y_i g_i,
        // j in I_low minimizing -y_j g_j
        let mut i_up = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_low = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = t;
            }
        }
        gap = m_up - m_low;
        if gap < cfg.tol {
            converged = true;
            break;
        }
        let (i, j) = (i_up, j_low);
        let quad = (gram[i * n + i] + gram[j * n + j] - 2.0 * gram[i * n + j]).max(1e-12);
        // unconstrained step along the pair direction
        let delta = (-y[i] * grad[i] + y[j] * grad[j]) / quad;
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut ai = old_ai + y[i] * delta;
        // project onto the box while keeping y'a constant
        let zeta = y[i] * old_ai + y[j] * old_aj;
        ai = ai.clamp(0.0, c);
        let mut aj = y[j] * (zeta - y[i] * ai);
        if aj < 0.0 {
            aj = 0.0;
            ai = y[i] * (zeta - y[j] * aj);
            ai = ai.clamp(0.0, c);
        } else if aj > c {
            aj = c;
            ai = y[i] * (zeta - y[j] * aj);
            ai = ai.clamp(0.0, c);
        }
        let (di, dj) = (ai - old_ai, aj - old_aj);
        if di == 0.0 && dj == 0.0 {
            // numerically stuck pair; the gap cannot shrink further
            break;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        for t in 0..n {
            grad[t] += y[t] * y[i] * gram[i * n + t] * di + y[t] * y[j] * gram[j * n + t] * dj;
        }
    }

    let dual_objective = {
        // 0.5 a'(g - e) reuses the gradient: a'g = a'Qa - a'e
        let ag: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * g).sum();
        let ae: f64 = alpha.iter().sum();
        -(0.5 * (ag - ae))
    };

    // bias from free support vectors; -y_i g_i equals y_i - f(x_i) there
    let free: Vec<usize> = (0..n)
        .filter(|&t| alpha[t] > 0.0 && alpha[t] < c)
        .collect();
    let bias = if !free.is_empty() {
        free.iter().map(|&t| -y[t] * grad[t]).sum::<f64>() / free.len() as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0) {
                m_up = m_up.max(v);
            }
            if (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c) {
                m_low = m_low.min(v);
            }
        }
        (m_up + m_low) / 2.0
    };

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coefs.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        kernel: cfg.kernel,
        label_map,
        converged,
        kkt_violation: gap,
        dual_objective,
    })
}

impl SvmModel {
    /// Raw decision value sum_i dual_coefs_i K(sv_i, x) + bias.
    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        if let Some(sv) = self.support_vectors.first() {
            if sv.len() != x.len() {
                return Err(SvmError::Shape {
                    left: sv.len(),
                    right: x.len(),
                });
            }
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| a * rbf_unchecked(sv, x, self.kernel.gamma))
            .sum::<f64>()
            + self.bias)
    }

    /// Predicted side: -1 or +1; an exact zero maps to +1.
    pub fn predict(&self, x: &[f64]) -> Result<i8, SvmError> {
        Ok(if self.decision(x)? < 0.0 { -1 } else { 1 })
    }

    /// Predicted class name through the label map.
    pub fn predict_label(&self, x: &[f64]) -> Result<&str, SvmError> {
        let idx = if self.predict(x)? < 0 { 0 } else { 1 };
        Ok(&self.label_map[idx])
    }
}

/// Hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
}

impl Default for Grid {
    /// The conventional coarse log grid: C in 2^-5..2^15, gamma in 2^-15..2^3,
    /// both in steps of 2^2.
    fn default() -> Grid {
        Grid {
            c_values: (-5..=15).step_by(2).map(|e| (e as f64).exp2()).collect(),
            gamma_values: (-15..=3).step_by(2).map(|e| (e as f64).exp2()).collect(),
        }
    }
}

/// Stratified k-fold CV accuracy of an SVM with the given config.
pub fn cv_accuracy(
    x: &[Vec<f64>],
    labels: &[i8],
    cfg: &TrainConfig,
    folds: usize,
    seed: u64,
) -> f64 {
    let assignment = stratified_folds(labels, folds, seed);
    let mut correct = 0usize;
    for fold in 0..folds {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut test_idx = Vec::new();
        for i in 0..x.len() {
            if assignment[i] == fold {
                test_idx.push(i);
            } else {
                train_x.push(x[i].clone());
                train_y.push(labels[i]);
            }
        }
        if test_idx.is_empty() {
            continue;
        }
        match train(&train_x, &train_y, cfg, ["neg".into(), "pos".into()]) {
            Ok(model) => {
                for &i in &test_idx {
                    if model.predict(&x[i]).unwrap_or(1) == labels[i] {
                        correct += 1;
                    }
                }
            }
            Err(_) => {
                // single-class training fold: predict that class
                let majority = train_y.first().copied().unwrap_or(1);
                for &i in &test_idx {
                    if majority == labels[i] {
                        correct += 1;
                    }
                }
            }
        }
    }
    correct as f64 / x.len() as f64
}

/// Grid search over (C, gamma) by stratified k-fold CV accuracy.
///
/// Ties are broken toward smaller C, then smaller gamma.
pub fn grid_search(
    x: &[Vec<f64>],
    labels: &[i8],
    grid: &Grid,
    folds: usize,
    seed: u64,
) -> Result<(TrainConfig, f64), SvmError> {
    if folds < 2 || folds > x.len() {
        return Err(SvmError::Config(format!(
            "folds must satisfy 2 <= folds <= n ({} samples), got {folds}",
            x.len()
        )));
    }
    if grid.c_values.is_empty() || grid.gamma_values.is_empty() {
        return Err(SvmError::Config("empty grid".into()));
    }
    let mut cells = Vec::new();
    for &c in &grid.c_values {
        for &gamma in &grid.gamma_values {
            cells.push((c, gamma));
        }
    }
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(c, gamma)| {
            let mut cfg = TrainConfig::new(c, gamma);
            cfg.tol = 1e-3;
            cv_accuracy(x, labels, &cfg, folds, seed)
        })
        .collect();
    // first cell wins ties: cells are ordered by (C asc, gamma asc)
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let (c, gamma) = cells[best];
    Ok((TrainConfig::new(c, gamma), scores[best]))
}
