//! Leave-one-subject-out evaluation, the two-stage classification protocol,
//! confusion/accuracy reporting, and cross-fold top-feature ranking.
//!
//! Every fitted quantity (z-score parameters, selected dimensions,
//! hyperparameters, the SVM itself) is computed from the training rows of a
//! fold only; the held-out subject never influences any of them. An optional
//! paper-mode runs feature selection once on all data instead and is labeled
//! leaky in the report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::feature_names;
use crate::preprocess::{
    apply_zscore, fit_zscore, forward_select, SelectionConfig, SelectionResult, ZScoreParams,
};
use crate::session::Group;
use crate::svm::{cv_accuracy, grid_search, train, Grid, SvmModel, TrainConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("stage {stage:?}: class {class:?} has {got} subjects, need at least 2")]
    Protocol {
        stage: String,
        class: String,
        got: usize,
    },
    #[error("confusion table is empty")]
    EmptyTable,
    #[error("stage {stage:?}: {source}")]
    Preprocess {
        stage: String,
        source: crate::preprocess::PreprocessError,
    },
    #[error("stage {stage:?}: {source}")]
    Svm {
        stage: String,
        source: crate::svm::SvmError,
    },
}

/// One subject's feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow {
    pub subject_id: String,
    pub group: Group,
    pub features: Vec<f64>,
}

/// Binary stage definition over cohort groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    /// Class mapped to the SVM's +1 side; listed first in tables.
    pub positive_name: String,
    pub positive_groups: Vec<Group>,
    /// Class mapped to the -1 side.
    pub negative_name: String,
    pub negative_groups: Vec<Group>,
}

/// Stage 1: healthy controls against the pooled condition group.
pub fn stage1() -> StageSpec {
    StageSpec {
        name: "stage1".into(),
        positive_name: "Controls".into(),
        positive_groups: vec![Group::Control],
        negative_name: "Condition".into(),
        negative_groups: vec![Group::Asd, Group::Adhd, Group::Comorbid],
    }
}

/// Stage 2: comorbid against ASD-only; the ADHD-only group is excluded
/// (too few subjects to learn from).
pub fn stage2() -> StageSpec {
    StageSpec {
        name: "stage2".into(),
        positive_name: "Comorbid".into(),
        positive_groups: vec![Group::Comorbid],
        negative_name: "ASD only".into(),
        negative_groups: vec![Group::Asd],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub name: String,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub classes: Vec<ClassCounts>,
}

impl ConfusionTable {
    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.correct + c.incorrect).sum()
    }
}

/// Overall accuracy: total correct over total evaluated.
pub fn accuracy_from_confusion(table: &ConfusionTable) -> Result<f64, EvalError> {
    let total = table.total();
    if total == 0 {
        return Err(EvalError::EmptyTable);
    }
    let correct: usize = table.classes.iter().map(|c| c.correct).sum();
    Ok(correct as f64 / total as f64)
}

/// Pipeline configuration shared by all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_grid_folds")]
    pub grid_folds: usize,
    #[serde(default)]
    pub grid_seed: u64,
    /// Run feature selection once on all data (leaky; off by default).
    #[serde(default)]
    pub paper_mode: bool,
}

fn default_grid_folds() -> usize {
    5
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            selection: SelectionConfig::default(),
            grid: Grid::default(),
            grid_folds: default_grid_folds(),
            grid_seed: 0,
            paper_mode: false,
        }
    }
}

/// Everything fitted on one fold's training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub zscore: ZScoreParams,
    pub selection: SelectionResult,
    pub config: TrainConfig,
    pub grid_score: f64,
    pub model: SvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub held_out: String,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub selection_scores: Vec<f64>,
    pub c: f64,
    pub gamma: f64,
    pub grid_score: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSubject {
    pub subject_id: String,
    pub truth: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub stage: StageSpec,
    pub confusion: ConfusionTable,
    pub accuracy: f64,
    pub per_subject: Vec<PerSubject>,
    pub fold_details: Vec<FoldDetail>,
    /// True when selection ran outside the folds (paper-mode).
    pub leaky_selection: bool,
}

fn select_columns(rows: &[Vec<f64>], dims: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| dims.iter().map(|&d| row[d]).collect())
        .collect()
}

/// Inner-CV scorer used while selecting features: fixed C = 1 and
/// gamma = 1 / (current dimensionality) on standardized data.
fn selection_scorer(selection: &SelectionConfig) -> impl Fn(&[Vec<f64>], &[i8]) -> f64 + Sync {
    let folds = selection.inner_folds;
    let seed = selection.fold_seed;
    move |x: &[Vec<f64>], y: &[i8]| {
        let gamma = 1.0 / x[0].len() as f64;
        cv_accuracy(x, y, &TrainConfig::new(1.0, gamma), folds, seed)
    }
}

/// Fits all per-fold artifacts from training rows only.
///
/// With `preselected` (paper-mode), the given standardization and dimension
/// set are reused instead of being re-fitted per fold.
pub fn fit_fold(
    train_x: &[Vec<f64>],
    train_y: &[i8],
    cfg: &PipelineConfig,
    preselected: Option<&(ZScoreParams, SelectionResult)>,
    label_map: [String; 2],
) -> Result<FoldModel, EvalError> {
    let stage = "fold".to_string();
    let (zscore, selection) = match preselected {
        Some((z, s)) => (z.clone(), s.clone()),
        None => {
            let z = fit_zscore(train_x).map_err(|e| EvalError::Preprocess {
                stage: stage.clone(),
                source: e,
            })?;
            let standardized = apply_zscore(&z, train_x).expect("shapes match after fit");
            let s = forward_select(
                &standardized,
                train_y,
                &cfg.selection,
                selection_scorer(&cfg.selection),
            )
            .map_err(|e| EvalError::Preprocess {
                stage: stage.clone(),
                source: e,
            })?;
            (z, s)
        }
    };
    let standardized = apply_zscore(&zscore, train_x).expect("shapes match after fit");
    let subset = select_columns(&standardized, &selection.selected);
    let (train_cfg, grid_score) = grid_search(
        &subset,
        train_y,
        &cfg.grid,
        cfg.grid_folds.min(train_x.len()),
        cfg.grid_seed,
    )
    .map_err(|e| EvalError::Svm {
        stage: stage.clone(),
        source: e,
    })?;
    let model = train(&subset, train_y, &train_cfg, label_map).map_err(|e| EvalError::Svm {
        stage,
        source: e,
    })?;
    Ok(FoldModel {
        zscore,
        selection,
        config: train_cfg,
        grid_score,
        model,
    })
}

impl FoldModel {
    /// Standardizes, projects, and classifies one raw feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<i8, EvalError> {
        let z = self.zscore.apply_row(row).map_err(|e| EvalError::Preprocess {
            stage: "predict".into(),
            source: e,
        })?;
        let projected: Vec<f64> = self.selection.selected.iter().map(|&d| z[d]).collect();
        self.model.predict(&projected).map_err(|e| EvalError::Svm {
            stage: "predict".into(),
            source: e,
        })
    }
}

fn stage_label(stage: &StageSpec, group: Group) -> Option<i8> {
    if stage.positive_groups.contains(&group) {
        Some(1)
    } else if stage.negative_groups.contains(&group) {
        Some(-1)
    } else {
        None
    }
}

/// Leave-one-subject-out evaluation of one stage.
pub fn loso(
    dataset: &[SubjectRow],
    stage: &StageSpec,
    cfg: &PipelineConfig,
) -> Result<LosoReport, EvalError> {
    let mut subjects: Vec<(&SubjectRow, i8)> = dataset
        .iter()
        .filter_map(|row| stage_label(stage, row.group).map(|y| (row, y)))
        .collect();
    subjects.sort_by(|a, b| a.0.subject_id.cmp(&b.0.subject_id));
    for (class, name) in [(1i8, &stage.positive_name), (-1i8, &stage.negative_name)] {
        let count = subjects.iter().filter(|(_, y)| *y == class).count();
        if count < 2 {
            return Err(EvalError::Protocol {
                stage: stage.name.clone(),
                class: name.clone(),
                got: count,
            });
        }
    }
    let label_map = [stage.negative_name.clone(), stage.positive_name.clone()];
    let x: Vec<Vec<f64>> = subjects.iter().map(|(r, _)| r.features.clone()).collect();
    let y: Vec<i8> = subjects.iter().map(|(_, l)| *l).collect();

    let preselected = if cfg.paper_mode {
        let z = fit_zscore(&x).map_err(|e| EvalError::Preprocess {
            stage: stage.name.clone(),
            source: e,
        })?;
        let standardized = apply_zscore(&z, &x).expect("shapes match after fit");
        let s = forward_select(&standardized, &y, &cfg.selection, selection_scorer(&cfg.selection))
            .map_err(|e| EvalError::Preprocess {
                stage: stage.name.clone(),
                source: e,
            })?;
        Some((z, s))
    } else {
        None
    };

    let folds: Vec<Result<(FoldDetail, i8), EvalError>> = (0..subjects.len())
        .into_par_iter()
        .map(|held| {
            let mut train_x = Vec::with_capacity(x.len() - 1);
            let mut train_y = Vec::with_capacity(y.len() - 1);
            for i in 0..x.len() {
                if i != held {
                    train_x.push(x[i].clone());
                    train_y.push(y[i]);
                }
            }
            let fitted = fit_fold(
                &train_x,
                &train_y,
                cfg,
                preselected.as_ref(),
                label_map.clone(),
            )?;
            let predicted = fitted.predict_row(&x[held])?;
            let names = feature_names();
            let selected_names = fitted
                .selection
                .selected
                .iter()
                .map(|&d| names.get(d).cloned().unwrap_or_else(|| format!("dim{d}")))
                .collect();
            Ok((
                FoldDetail {
                    held_out: subjects[held].0.subject_id.clone(),
                    selected: fitted.selection.selected.clone(),
                    selected_names,
                    selection_scores: fitted.selection.scores.clone(),
                    c: fitted.config.c,
                    gamma: fitted.config.kernel.gamma,
                    grid_score: fitted.grid_score,
                    converged: fitted.model.converged,
                },
                predicted,
            ))
        })
        .collect();

    let mut fold_details = Vec::with_capacity(subjects.len());
    let mut per_subject = Vec::with_capacity(subjects.len());
    let mut counts = [
        ClassCounts { name: stage.positive_name.clone(), correct: 0, incorrect: 0 },
        ClassCounts { name: stage.negative_name.clone(), correct: 0, incorrect: 0 },
    ];
    for (i, fold) in folds.into_iter().enumerate() {
        let (detail, predicted) = fold?;
        let truth = y[i];
        let class = if truth == 1 { &mut counts[0] } else { &mut counts[1] };
        if predicted == truth {
            class.correct += 1;
        } else {
            class.incorrect += 1;
        }
        per_subject.push(PerSubject {
            subject_id: subjects[i].0.subject_id.clone(),
            truth: if truth == 1 {
                stage.positive_name.clone()
            } else {
                stage.negative_name.clone()
            },
            predicted: if predicted == 1 {
                stage.positive_name.clone()
            } else {
                stage.negative_name.clone()
            },
        });
        fold_details.push(detail);
    }
    let confusion = ConfusionTable { classes: counts.to_vec() };
    let accuracy = accuracy_from_confusion(&confusion)?;
    Ok(LosoReport {
        stage: stage.clone(),
        confusion,
        accuracy,
        per_subject,
        fold_details,
        leaky_selection: cfg.paper_mode,
    })
}

/// Runs both stages; each stage fails independently.
pub fn two_stage(
    dataset: &[SubjectRow],
    cfg: &PipelineConfig,
) -> (Result<LosoReport, EvalError>, Result<LosoReport, EvalError>) {
    (loso(dataset, &stage1(), cfg), loso(dataset, &stage2(), cfg))
}

/// One entry of the cross-fold feature ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    /// Number of folds that selected the feature.
    pub frequency: usize,
    /// Mean 0-based selection step across those folds.
    pub mean_step: f64,
}

/// Ranks features by selection frequency across folds, then by mean
/// selection step, then by dimension index.
pub fn top_features(fold_details: &[FoldDetail], k: usize) -> Vec<RankedFeature> {
    let mut stats: std::collections::BTreeMap<usize, (usize, f64)> = Default::default();
    for fold in fold_details {
        for (step, &dim) in fold.selected.iter().enumerate() {
            let entry = stats.entry(dim).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += step as f64;
        }
    }
    let names = feature_names();
    let mut ranked: Vec<RankedFeature> = stats
        .into_iter()
        .map(|(index, (frequency, step_sum))| RankedFeature {
            index,
            name: names
                .get(index)
                .cloned()
                .unwrap_or_else(|| format!("dim{index}")),
            frequency,
            mean_step: step_sum / frequency as f64,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then(a.mean_step.partial_cmp(&b.mean_step).unwrap())
            .then(a.index.cmp(&b.index))
    });
    ranked.truncate(k);
    ranked
}
