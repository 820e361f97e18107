//! One split/train/evaluate run, shared by `train`, `eval --repeat` and `sweep`.

use serde::{Deserialize, Serialize};
use smtad_core::metrics::{auprc, auroc, to_anomaly_score, ScoredTestSet};
use smtad_core::preprocess::{prepare, FitScope, NormalizedDataset, RankNormalizer, RawDataset};
use smtad_core::training::{train, TrainConfig, TrainOutcome};
use smtad_core::{Matrix, ModelParams, ScoreBreakdown};

use crate::data::selection_columns;
use crate::error::Result;

/// Preprocessing choices that fix the test split for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataProtocol {
    pub split: f64,
    pub discrete_threshold: usize,
    pub fit_scope: FitScope,
    /// 1-based feature indices to keep.
    pub selection: Option<Vec<usize>>,
}

impl Default for DataProtocol {
    fn default() -> Self {
        DataProtocol {
            split: 0.5,
            discrete_threshold: smtad_core::preprocess::DEFAULT_DISCRETE_THRESHOLD,
            fit_scope: FitScope::Full,
            selection: None,
        }
    }
}

/// Normalized, split (and possibly feature-selected) data for one seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub normalizer: RankNormalizer,
    pub data: NormalizedDataset,
    pub feature_names: Vec<String>,
}

pub fn prepare_seed(raw: &RawDataset, protocol: &DataProtocol, seed: u64) -> Result<Prepared> {
    let (normalizer, data) =
        prepare(raw, protocol.split, seed, protocol.discrete_threshold, protocol.fit_scope)?;
    let names = raw
        .feature_names
        .clone()
        .unwrap_or_else(|| (1..=raw.n_features()).map(|j| format!("x{j}")).collect());
    Ok(match &protocol.selection {
        None => Prepared { seed, normalizer, data, feature_names: names },
        Some(sel) => {
            let cols = selection_columns(sel, raw.n_features())?;
            Prepared {
                seed,
                normalizer: normalizer.select(&cols)?,
                data: data.select_features(&cols),
                feature_names: cols.iter().map(|&c| names[c].clone()).collect(),
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub auprc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Master seed of the run, when the scores came from one.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcome: TrainOutcome,
    pub test_labels: Vec<u8>,
    pub test_scores: Vec<ScoreBreakdown>,
    /// `None` when the test split lacks one of the classes.
    pub metrics: Option<Metrics>,
}

pub fn score_rows(params: &ModelParams, rows: &Matrix) -> Result<Vec<ScoreBreakdown>> {
    Ok(rows.iter_rows().map(|x| params.normality_score(x)).collect::<smtad_core::Result<_>>()?)
}

pub fn evaluate(scores: &[ScoreBreakdown], labels: &[u8], seed: Option<u64>) -> Result<Option<Metrics>> {
    evaluate_anomaly_scores(scores.iter().map(to_anomaly_score).collect(), labels, seed)
}

/// Metrics of raw anomaly scores (higher = more anomalous); `None` unless both classes occur.
pub fn evaluate_anomaly_scores(scores: Vec<f64>, labels: &[u8], seed: Option<u64>) -> Result<Option<Metrics>> {
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Ok(None);
    }
    let set = ScoredTestSet::new(scores, labels.to_vec())?;
    Ok(Some(Metrics { auroc: auroc(&set)?, auprc: auprc(&set)?, n_pos: set.n_pos(), n_neg: set.n_neg(), seed }))
}

/// Trains `(M, P)` on the prepared training rows with `config.seed` replaced by
/// the data seed, then scores the test split.
pub fn run(prepared: &Prepared, components: usize, resolutions: usize, config: &TrainConfig) -> Result<RunOutput> {
    let config = TrainConfig { seed: prepared.seed, ..config.clone() };
    let outcome = train(&prepared.data.train_matrix(), components, resolutions, &config)?;
    let (test_rows, test_labels) = prepared.data.test_set();
    let test_scores = score_rows(&outcome.params, &test_rows)?;
    let metrics = evaluate(&test_scores, &test_labels, Some(prepared.seed))?;
    Ok(RunOutput { outcome, test_labels, test_scores, metrics })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Summary { mean, std: var.sqrt() })
    }
}
