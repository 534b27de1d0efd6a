//! Stratified cross-validation, out-of-fold predictions and threshold search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, f1_at, Metrics};
use super::{check_dataset, derive_seed, train_rows, TrainedForest, TreeParams};
use crate::error::ForestError;
use crate::features::{FeatureGroup, FeatureTable, N_FEATURES};

pub const FOLDS: usize = 5;

const FOLD_STREAM: u64 = 0x464f_4c44;
const COMPANION_STREAM: u64 = 0x434f_4d50;

/// Fold index per row. Each class is shuffled independently and dealt
/// round-robin, continuing where the previous class stopped, so every fold
/// holds within one row of its share of each class.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>, ForestError> {
    let mut folds = vec![0usize; labels.len()];
    let mut offset = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(ForestError::Stratification { class, count: members.len(), folds: k });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM + class as u64));
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            folds[i] = (offset + j) % k;
        }
        offset += members.len();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofResult {
    pub probabilities: Vec<f64>,
    pub folds: Vec<usize>,
}

/// One model per fold, each trained on the rows outside that fold.
pub fn fit_fold_models(
    table: &FeatureTable,
    folds: &[usize],
    feature_subset: &[usize],
    params: &TreeParams,
    seed: u64,
) -> Result<Vec<TrainedForest>, ForestError> {
    let k = folds.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|f| {
            let rows: Vec<u32> = (0..table.len()).filter(|&i| folds[i] != f).map(|i| i as u32).collect();
            train_rows(table, &rows, feature_subset, params, derive_seed(seed, f as u64))
        })
        .collect()
}

/// Predicts each row with the model of its own fold. `rows` may differ from
/// the training rows (e.g. perturbed copies) as long as fold order matches.
pub fn predict_folds(models: &[TrainedForest], folds: &[usize], rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
    rows.iter().zip(folds).map(|(x, &f)| models[f].predict_proba(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub params: TreeParams,
    pub oof: OofResult,
    /// Mean per-fold F1 at 0.5 for every grid point, in grid order.
    pub grid_scores: Vec<(TreeParams, f64)>,
}

fn mean_fold_f1(probs: &[f64], labels: &[u8], folds: &[usize], k: usize) -> f64 {
    let total: f64 = (0..k)
        .map(|f| {
            let (p, y): (Vec<f64>, Vec<u8>) =
                probs.iter().zip(labels).zip(folds).filter(|(_, &g)| g == f).map(|((p, y), _)| (*p, *y)).unzip();
            f1_at(&p, &y, 0.5)
        })
        .sum();
    total / k as f64
}

/// Picks the grid point with the highest mean per-fold F1 at threshold 0.5
/// (earliest wins ties) and returns its out-of-fold probabilities.
pub fn cross_validate(
    table: &FeatureTable,
    feature_subset: &[usize],
    grid: &[TreeParams],
    seed: u64,
) -> Result<CvOutcome, ForestError> {
    if grid.is_empty() {
        return Err(ForestError::EmptyGrid);
    }
    check_dataset(table)?;
    let folds = stratified_folds(&table.labels, FOLDS, seed)?;
    let mut best: Option<(TreeParams, f64, Vec<f64>)> = None;
    let mut grid_scores = Vec::with_capacity(grid.len());
    for params in grid {
        let models = fit_fold_models(table, &folds, feature_subset, params, seed)?;
        let probs = predict_folds(&models, &folds, &table.rows);
        let score = mean_fold_f1(&probs, &table.labels, &folds, FOLDS);
        log::debug!("cv {params:?}: mean F1 {score:.4}");
        grid_scores.push((*params, score));
        if best.as_ref().map_or(true, |b| score > b.1) {
            best = Some((*params, score, probs));
        }
    }
    let (params, _, probabilities) = best.expect("grid is non-empty");
    Ok(CvOutcome { params, oof: OofResult { probabilities, folds }, grid_scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub f1: f64,
}

/// Scans 0.01..=0.99 in steps of 0.01 for the F1-maximizing threshold,
/// lowest threshold on ties.
pub fn threshold_search(probs: &[f64], labels: &[u8]) -> ThresholdResult {
    let mut best = ThresholdResult { threshold: 0.01, f1: f64::NEG_INFINITY };
    for i in 1..=99 {
        let t = i as f64 / 100.0;
        let f1 = f1_at(probs, labels, t);
        if f1 > best.f1 {
            best = ThresholdResult { threshold: t, f1 };
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedForest,
    pub cv: CvOutcome,
    pub threshold: ThresholdResult,
    /// Out-of-fold metrics at the searched threshold.
    pub oof_metrics: Metrics,
    pub companion_cv: Option<CvOutcome>,
}

fn fit_with_threshold(
    table: &FeatureTable,
    subset: &[usize],
    grid: &[TreeParams],
    seed: u64,
) -> Result<(TrainedForest, CvOutcome, ThresholdResult), ForestError> {
    let cv = cross_validate(table, subset, grid, seed)?;
    let threshold = threshold_search(&cv.oof.probabilities, &table.labels);
    let rows: Vec<u32> = (0..table.len() as u32).collect();
    let mut model = train_rows(table, &rows, subset, &cv.params, seed)?;
    model.threshold = threshold.threshold;
    Ok((model, cv, threshold))
}

/// Full training run: CV over the grid, threshold search on the OOF
/// probabilities, refit on all rows. When the subset uses content features
/// a metadata-only companion is fitted the same way.
pub fn train_with_cv(
    table: &FeatureTable,
    feature_subset: &[usize],
    grid: &[TreeParams],
    seed: u64,
) -> Result<TrainOutcome, ForestError> {
    let (mut model, cv, threshold) = fit_with_threshold(table, feature_subset, grid, seed)?;
    let pc = FeatureGroup::PC.indices();
    let metadata: Vec<usize> = feature_subset.iter().copied().filter(|i| !pc.contains(i)).collect();
    let mut companion_cv = None;
    if metadata.len() < feature_subset.len() && !metadata.is_empty() {
        let (companion, ccv, _) = fit_with_threshold(table, &metadata, grid, derive_seed(seed, COMPANION_STREAM))?;
        model.companion = Some(Box::new(companion));
        companion_cv = Some(ccv);
    }
    let oof_metrics = evaluate(&cv.oof.probabilities, &table.labels, threshold.threshold);
    Ok(TrainOutcome { model, cv, threshold, oof_metrics, companion_cv })
}
