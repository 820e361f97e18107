//! Versioned JSON model documents.
//!
//! Floats are written by `serde_json` in shortest round-trip form, so a
//! save/load cycle restores every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use smtad_core::preprocess::{FitScope, RankNormalizer};
use smtad_core::training::TrainConfig;
use smtad_core::{Matrix, ModelParams};

use crate::data::{selection_columns, LabelSpec};
use crate::error::{io_err, CliError, Result};

pub const MODEL_FORMAT: &str = "smtad-model";
pub const MODEL_VERSION: u32 = 1;

/// Data handling a model was trained under, reused by `score` and `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub label: Option<LabelSpec>,
    pub split: f64,
    pub discrete_threshold: usize,
    pub fit_scope: FitScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub sites: usize,
    pub components: usize,
    pub resolutions: usize,
    /// `(m, p, l)` row-major, `p` fastest among terms.
    pub theta: Vec<f64>,
    pub coeff: Vec<f64>,
    /// One CDF per model site (after selection).
    pub normalizer: RankNormalizer,
    /// Width of the raw feature rows before selection.
    pub input_features: usize,
    pub feature_names: Vec<String>,
    /// 1-based raw feature indices the model was trained on.
    pub selection: Option<Vec<usize>>,
    pub config: TrainConfig,
    pub seed: u64,
    pub protocol: Protocol,
}

impl ModelFile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &ModelParams,
        normalizer: RankNormalizer,
        input_features: usize,
        feature_names: Vec<String>,
        selection: Option<Vec<usize>>,
        config: TrainConfig,
        protocol: Protocol,
    ) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            sites: params.sites(),
            components: params.components(),
            resolutions: params.resolutions(),
            theta: params.theta().to_vec(),
            coeff: params.coeff().to_vec(),
            normalizer,
            input_features,
            feature_names,
            selection,
            seed: config.seed,
            config,
            protocol,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::from_parts(
            self.sites,
            self.components,
            self.resolutions,
            self.theta.clone(),
            self.coeff.clone(),
        )?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let model: ModelFile =
            serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
        if model.format != MODEL_FORMAT {
            return Err(CliError::input(format!("{}: not a model file", path.display())));
        }
        if model.version != MODEL_VERSION {
            return Err(CliError::input(format!(
                "{}: unsupported model version {} (expected {MODEL_VERSION})",
                path.display(),
                model.version
            )));
        }
        if model.normalizer.n_features() != model.sites {
            return Err(CliError::input(format!("{}: normalizer width differs from site count", path.display())));
        }
        model.params()?;
        Ok(model)
    }

    /// Rank-normalizes raw rows, applying the stored selection when the rows
    /// still carry every input feature.
    pub fn normalize(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.rows() == 0 {
            return Ok(Matrix::zeros(0, self.sites));
        }
        let rows = if raw.cols() == self.sites {
            raw.clone()
        } else if raw.cols() == self.input_features {
            match &self.selection {
                Some(sel) => raw.select_columns(&selection_columns(sel, self.input_features)?),
                None => raw.clone(),
            }
        } else {
            return Err(CliError::input(format!(
                "data has {} features; model expects {} (or {} before selection)",
                raw.cols(),
                self.sites,
                self.input_features
            )));
        };
        Ok(self.normalizer.transform(&rows)?)
    }
}
