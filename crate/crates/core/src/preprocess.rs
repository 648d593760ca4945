//! Z-score standardization fitted on training rows only, deterministic
//! stratified fold assignment, and greedy forward feature selection wrapped
//! around a cross-validated classifier score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },
    #[error("row {row} has {got} columns, expected {expected}")]
    Shape { row: usize, expected: usize, got: usize },
    #[error("training labels contain a single class")]
    DegenerateLabels,
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fits per-dimension mean and population std over training rows.
pub fn fit_zscore(train: &[Vec<f64>]) -> Result<ZScoreParams, PreprocessError> {
    if train.len() < 2 {
        return Err(PreprocessError::TooFewRows { min: 2, got: train.len() });
    }
    let d = train[0].len();
    for (row, r) in train.iter().enumerate() {
        if r.len() != d {
            return Err(PreprocessError::Shape { row, expected: d, got: r.len() });
        }
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for row in train {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for row in train {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let dlt = v - m;
            *s += dlt * dlt;
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(ZScoreParams { mean, std })
}

impl ZScoreParams {
    /// Standardizes one row; zero-variance dimensions map to 0.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if row.len() != self.mean.len() {
            return Err(PreprocessError::Shape {
                row: 0,
                expected: self.mean.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect())
    }
}

/// Standardizes a matrix with previously fitted parameters.
pub fn apply_zscore(
    params: &ZScoreParams,
    matrix: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, PreprocessError> {
    matrix.iter().map(|row| params.apply_row(row)).collect()
}

/// Deterministic stratified fold assignment: per-class shuffle with a seeded
/// generator, then round-robin dealing into `folds` folds.
pub fn stratified_folds(labels: &[i8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut classes: Vec<i8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    for class in classes {
        let mut indices: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        indices.shuffle(&mut rng);
        for (k, &i) in indices.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

/// Forward-selection configuration (External Interfaces: JSON keys
/// `max_features`, `inner_folds`, `fold_seed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    #[serde(default = "default_max_features")]
    pub max_features: usize,
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
    #[serde(default)]
    pub fold_seed: u64,
}

fn default_max_features() -> usize {
    30
}
fn default_inner_folds() -> usize {
    5
}

impl Default for SelectionConfig {
    fn default() -> SelectionConfig {
        SelectionConfig {
            max_features: default_max_features(),
            inner_folds: default_inner_folds(),
            fold_seed: 0,
        }
    }
}

/// Outcome of a greedy forward selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected dimension indices, in selection order.
    pub selected: Vec<usize>,
    /// Best inner-CV accuracy after each addition.
    pub scores: Vec<f64>,
}

/// Greedy forward feature selection.
///
/// Each step adds the single dimension maximizing the scorer's accuracy on
/// the selected set extended with that dimension; ties break toward the
/// lowest dimension index. Stops when no candidate strictly improves the best
/// score or `max_features` is reached. Deterministic given inputs, config,
/// and whatever fold seed the scorer closes over.
pub fn forward_select<F>(
    x: &[Vec<f64>],
    labels: &[i8],
    config: &SelectionConfig,
    scorer: F,
) -> Result<SelectionResult, PreprocessError>
where
    F: Fn(&[Vec<f64>], &[i8]) -> f64 + Sync,
{
    if x.len() < 4 {
        return Err(PreprocessError::TooFewRows { min: 4, got: x.len() });
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(PreprocessError::DegenerateLabels);
    }
    let d = x[0].len();
    let mut selected: Vec<usize> = Vec::new();
    let mut scores: Vec<f64> = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    while selected.len() < config.max_features && selected.len() < d {
        let candidates: Vec<usize> = (0..d).filter(|i| !selected.contains(i)).collect();
        let step_scores: Vec<(usize, f64)> = candidates
            .par_iter()
            .map(|&dim| {
                let subset: Vec<Vec<f64>> = x
                    .iter()
                    .map(|row| {
                        let mut r: Vec<f64> =
                            selected.iter().map(|&s| row[s]).collect();
                        r.push(row[dim]);
                        r
                    })
                    .collect();
                (dim, scorer(&subset, labels))
            })
            .collect();
        // lowest index wins ties; candidates are in ascending order
        let mut step_best: Option<(usize, f64)> = None;
        for &(dim, score) in &step_scores {
            match step_best {
                Some((_, s)) if score <= s => {}
                _ => step_best = Some((dim, score)),
            }
        }
        let (dim, score) = step_best.expect("at least one candidate");
        if score <= best_score {
            break;
        }
        best_score = score;
        selected.push(dim);
        scores.push(score);
    }
    Ok(SelectionResult { selected, scores })
}
