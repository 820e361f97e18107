//! Rank normalization, discrete-feature handling and the one-class split.
//!
//! Each feature gets its own empirical CDF. Continuous values map to
//! `average_rank / N_ref` (ties share the mean of their positions); a feature with
//! few distinct values is treated as `D` ordered levels mapped to `rank / D`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{stream_rng, Stream};

/// Features with at most this many distinct values are treated as discrete.
pub const DEFAULT_DISCRETE_THRESHOLD: usize = 12;

/// Raw samples with binary labels (`1` = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub values: Matrix,
    pub labels: Vec<u8>,
    pub feature_names: Option<Vec<alloc::string::String>>,
}

impl RawDataset {
    pub fn new(values: Matrix, labels: Vec<u8>) -> Result<Self> {
        let ds = RawDataset { values, labels, feature_names: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.values.rows() {
            return Err(Error::LengthMismatch { expected: self.values.rows(), found: self.labels.len() });
        }
        if self.values.rows() < 2 {
            return Err(Error::domain("dataset needs at least two rows"));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::domain("labels must be 0 (normal) or 1 (anomalous)"));
        }
        if self.values.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.values.cols() {
                return Err(Error::LengthMismatch { expected: self.values.cols(), found: names.len() });
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureMode {
    Continuous,
    Discrete { levels: usize },
}

/// Empirical CDF of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCdf {
    pub mode: FeatureMode,
    /// Distinct reference values, ascending.
    pub values: Vec<f64>,
    /// Normalized value of each entry of `values`.
    pub cdf: Vec<f64>,
    /// Number of reference rows.
    pub n_ref: usize,
}

impl FeatureCdf {
    fn fit(column: impl Iterator<Item = f64>, discrete_threshold: usize) -> Result<Self> {
        let mut sorted: Vec<f64> = column.collect();
        if sorted.is_empty() {
            return Err(Error::domain("cannot fit a normalizer on zero rows"));
        }
        if sorted.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("reference contains non-finite values"));
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();

        let mut values = Vec::new();
        let mut avg_ranks = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && sorted[end] == sorted[start] {
                end += 1;
            }
            values.push(sorted[start]);
            // positions start+1 ..= end, 1-based
            avg_ranks.push((start + 1 + end) as f64 / 2.0);
            start = end;
        }

        let distinct = values.len();
        if distinct == 1 || distinct <= discrete_threshold {
            let cdf = (1..=distinct).map(|r| r as f64 / distinct as f64).collect();
            Ok(FeatureCdf { mode: FeatureMode::Discrete { levels: distinct }, values, cdf, n_ref: n })
        } else {
            let cdf = avg_ranks.iter().map(|r| r / n as f64).collect();
            Ok(FeatureCdf { mode: FeatureMode::Continuous, values, cdf, n_ref: n })
        }
    }

    /// Maps one raw value into `[0, 1]`.
    pub fn transform(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::domain("non-finite value"));
        }
        let vals = &self.values;
        let last = vals.len() - 1;
        let idx = match vals.binary_search_by(|probe| probe.total_cmp(&v)) {
            Ok(i) => return Ok(self.cdf[i]),
            Err(i) => i,
        };
        match self.mode {
            FeatureMode::Continuous => {
                if idx == 0 {
                    Ok(0.5 / self.n_ref as f64)
                } else if idx > last {
                    Ok(1.0)
                } else {
                    let (lo, hi) = (vals[idx - 1], vals[idx]);
                    let t = (v - lo) / (hi - lo);
                    Ok(self.cdf[idx - 1] + t * (self.cdf[idx] - self.cdf[idx - 1]))
                }
            }
            FeatureMode::Discrete { .. } => {
                if idx == 0 {
                    Ok(self.cdf[0])
                } else if idx > last {
                    Ok(self.cdf[last])
                } else if v - vals[idx - 1] <= vals[idx] - v {
                    Ok(self.cdf[idx - 1])
                } else {
                    Ok(self.cdf[idx])
                }
            }
        }
    }
}

/// One empirical CDF per feature, fitted on a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankNormalizer {
    pub features: Vec<FeatureCdf>,
}

impl RankNormalizer {
    /// Fits a normalizer on `reference`. A feature with at most `discrete_threshold`
    /// distinct values is discrete; a constant feature is always discrete with one level.
    pub fn fit(reference: &Matrix, discrete_threshold: usize) -> Result<Self> {
        if reference.rows() == 0 {
            return Err(Error::domain("cannot fit a normalizer on zero rows"));
        }
        let features = (0..reference.cols())
            .map(|j| FeatureCdf::fit(reference.column(j), discrete_threshold))
            .collect::<Result<Vec<_>>>()?;
        Ok(RankNormalizer { features })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::LengthMismatch { expected: self.features.len(), found: row.len() });
        }
        for ((f, &v), o) in self.features.iter().zip(row).zip(out.iter_mut()) {
            *o = f.transform(v)?;
        }
        Ok(())
    }

    pub fn transform(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.features.len() {
            return Err(Error::LengthMismatch { expected: self.features.len(), found: values.cols() });
        }
        let mut out = Matrix::zeros(values.rows(), values.cols());
        for i in 0..values.rows() {
            self.transform_row(values.row(i), out.row_mut(i))?;
        }
        Ok(out)
    }

    /// Keeps only the listed features (0-based, in the given order).
    pub fn select(&self, features: &[usize]) -> Result<RankNormalizer> {
        let mut out = Vec::with_capacity(features.len());
        for &j in features {
            let f = self.features.get(j).ok_or_else(|| Error::domain(alloc::format!("feature {j} out of range")))?;
            out.push(f.clone());
        }
        Ok(RankNormalizer { features: out })
    }
}

/// Role of a row in the one-class protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    TestNormal,
    TestAnomalous,
}

/// Tags `⌊fraction · |normal|⌋` normal rows as training, chosen uniformly under
/// `seed`; the other normal rows become test-normal and every anomalous row
/// test-anomalous.
pub fn split(labels: &[u8], train_fraction: f64, seed: u64) -> Result<Vec<SplitTag>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain("train fraction must lie strictly between 0 and 1"));
    }
    let mut normals: Vec<usize> = labels.iter().enumerate().filter(|(_, &y)| y == 0).map(|(i, _)| i).collect();
    let n_train = (train_fraction * normals.len() as f64) as usize;
    if n_train == 0 {
        return Err(Error::EmptyTraining);
    }
    let mut rng = stream_rng(seed, Stream::Split);
    normals.shuffle(&mut rng);

    let mut tags: Vec<SplitTag> = labels
        .iter()
        .map(|&y| if y == 0 { SplitTag::TestNormal } else { SplitTag::TestAnomalous })
        .collect();
    for &i in &normals[..n_train] {
        tags[i] = SplitTag::Train;
    }
    Ok(tags)
}

/// Where the rank reference comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Every row, normal and anomalous, before splitting.
    #[default]
    Full,
    /// Training rows only (no test information in the CDF).
    TrainOnly,
}

/// Rank-normalized samples with labels and split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub values: Matrix,
    pub labels: Vec<u8>,
    pub tags: Vec<SplitTag>,
}

impl NormalizedDataset {
    pub fn new(values: Matrix, labels: Vec<u8>, tags: Vec<SplitTag>) -> Result<Self> {
        if labels.len() != values.rows() || tags.len() != values.rows() {
            return Err(Error::LengthMismatch { expected: values.rows(), found: labels.len().min(tags.len()) });
        }
        if values.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("normalized values must lie in [0, 1]"));
        }
        if tags.iter().zip(&labels).any(|(t, &y)| *t == SplitTag::Train && y != 0) {
            return Err(Error::domain("anomalous row tagged for training"));
        }
        Ok(NormalizedDataset { values, labels, tags })
    }

    pub fn indices_with(&self, tag: SplitTag) -> Vec<usize> {
        self.tags.iter().enumerate().filter(|(_, t)| **t == tag).map(|(i, _)| i).collect()
    }

    pub fn train_matrix(&self) -> Matrix {
        self.values.select_rows(&self.indices_with(SplitTag::Train))
    }

    /// Test rows (normal then anomalous, each in file order) with their labels.
    pub fn test_set(&self) -> (Matrix, Vec<u8>) {
        let idx: Vec<usize> = self
            .indices_with(SplitTag::TestNormal)
            .into_iter()
            .chain(self.indices_with(SplitTag::TestAnomalous))
            .collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (self.values.select_rows(&idx), labels)
    }

    /// Restricts every row to the listed features.
    pub fn select_features(&self, features: &[usize]) -> NormalizedDataset {
        NormalizedDataset {
            values: self.values.select_columns(features),
            labels: self.labels.clone(),
            tags: self.tags.clone(),
        }
    }
}

/// Splits `raw`, fits the normalizer on the requested scope and transforms every row.
pub fn prepare(
    raw: &RawDataset,
    train_fraction: f64,
    seed: u64,
    discrete_threshold: usize,
    scope: FitScope,
) -> Result<(RankNormalizer, NormalizedDataset)> {
    raw.validate()?;
    let tags = split(&raw.labels, train_fraction, seed)?;
    let normalizer = match scope {
        FitScope::Full => RankNormalizer::fit(&raw.values, discrete_threshold)?,
        FitScope::TrainOnly => {
            let idx: Vec<usize> =
                tags.iter().enumerate().filter(|(_, t)| **t == SplitTag::Train).map(|(i, _)| i).collect();
            RankNormalizer::fit(&raw.values.select_rows(&idx), discrete_threshold)?
        }
    };
    let values = normalizer.transform(&raw.values)?;
    let data = NormalizedDataset::new(values, raw.labels.clone(), tags)?;
    Ok((normalizer, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn column(values: &[f64]) -> Matrix {
        Matrix::from_rows(1, values.iter().map(|v| [*v])).unwrap()
    }

    fn roundtrip(values: &[f64], threshold: usize) -> Vec<f64> {
        let m = column(values);
        let n = RankNormalizer::fit(&m, threshold).unwrap();
        n.transform(&m).unwrap().as_slice().to_vec()
    }

    #[test]
    fn continuous_ranks() {
        let out = roundtrip(&[3.2, 1.1, 2.5], 0);
        assert_eq!(out, vec![1.0, 1.0 / 3.0, 2.0 / 3.0]);
        let n = RankNormalizer::fit(&column(&[3.2, 1.1, 2.5]), 0).unwrap();
        assert_eq!(n.features[0].mode, FeatureMode::Continuous);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(roundtrip(&[2.0, 2.0, 5.0], 0), vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn discrete_levels() {
        // codes A=1, B=2, C=3
        let m = column(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let n = RankNormalizer::fit(&m, 3).unwrap();
        assert_eq!(n.features[0].mode, FeatureMode::Discrete { levels: 3 });
        assert_eq!(n.features[0].transform(2.0).unwrap(), 2.0 / 3.0);
        // unseen level snaps to the nearest one
        assert_eq!(n.features[0].transform(2.4).unwrap(), 2.0 / 3.0);
        assert_eq!(n.features[0].transform(2.6).unwrap(), 1.0);
        assert_eq!(n.features[0].transform(-4.0).unwrap(), 1.0 / 3.0);
        assert_eq!(n.features[0].transform(9.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_feature_maps_to_one() {
        let m = column(&[7.0, 7.0, 7.0]);
        let n = RankNormalizer::fit(&m, 0).unwrap();
        assert_eq!(n.features[0].mode, FeatureMode::Discrete { levels: 1 });
        assert_eq!(n.transform(&m).unwrap().as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(n.features[0].transform(-1.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_reference_values() {
        let n = RankNormalizer::fit(&column(&[1.0, 2.0, 3.0, 4.0]), 0).unwrap();
        let f = &n.features[0];
        assert_eq!(f.transform(0.0).unwrap(), 1.0 / 8.0);
        assert_eq!(f.transform(10.0).unwrap(), 1.0);
        // halfway between ranks 2/4 and 3/4
        assert!((f.transform(2.5).unwrap() - 0.625).abs() < 1e-15);
        assert!(f.transform(f64::INFINITY).is_err());
    }

    #[test]
    fn column_count_checked() {
        let n = RankNormalizer::fit(&column(&[1.0, 2.0]), 0).unwrap();
        assert!(matches!(n.transform(&Matrix::zeros(2, 2)), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut labels = vec![0u8; 119];
        labels.extend([1u8; 10]);
        let tags = split(&labels, 0.5, 3).unwrap();
        assert_eq!(tags.iter().filter(|t| **t == SplitTag::Train).count(), 59);
        assert_eq!(tags.iter().filter(|t| **t == SplitTag::TestAnomalous).count(), 10);
        assert_eq!(split(&labels, 0.5, 3).unwrap(), tags);
        assert_ne!(split(&labels, 0.5, 4).unwrap(), tags);

        let labels = vec![0u8; 118];
        let tags = split(&labels, 0.5, 0).unwrap();
        assert_eq!(tags.iter().filter(|t| **t == SplitTag::Train).count(), 59);
    }

    #[test]
    fn split_errors() {
        assert_eq!(split(&[1, 1, 1], 0.5, 0), Err(Error::EmptyTraining));
        assert!(matches!(split(&[0, 0], 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(split(&[0, 0], 0.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn anomalies_never_train() {
        let labels: Vec<u8> = (0..200).map(|i| (i % 3 == 0) as u8).collect();
        for seed in 0..20 {
            let tags = split(&labels, 0.7, seed).unwrap();
            for (t, y) in tags.iter().zip(&labels) {
                if *y == 1 {
                    assert_eq!(*t, SplitTag::TestAnomalous);
                }
            }
        }
    }

    #[test]
    fn train_only_scope_excludes_test_rows() {
        let values = Matrix::from_rows(1, (0..10).map(|i| [i as f64])).unwrap();
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
        let raw = RawDataset::new(values, labels).unwrap();
        let (norm, data) = prepare(&raw, 0.5, 1, 0, FitScope::TrainOnly).unwrap();
        assert_eq!(norm.features[0].n_ref, 4);
        assert_eq!(data.indices_with(SplitTag::Train).len(), 4);
        let (norm, _) = prepare(&raw, 0.5, 1, 0, FitScope::Full).unwrap();
        assert_eq!(norm.features[0].n_ref, 10);
    }
}
