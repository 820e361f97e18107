//! Plot-ready CSV and JSON outputs. Every CSV has a header row; floats use
//! shortest round-trip formatting.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use smtad_core::analysis::CohortProfiles;
use smtad_core::metrics::to_anomaly_score;
use smtad_core::training::EpochLoss;
use smtad_core::{Matrix, ScoreBreakdown};

use crate::error::{io_err, CliError, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn csv_result<T>(path: &Path, r: std::result::Result<T, csv::Error>) -> Result<T> {
    r.map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    csv_result(path, w.write_record(header))?;
    for row in rows {
        csv_result(path, w.write_record(&row))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_loss_history(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let rows = history
        .iter()
        .map(|e| vec![e.epoch.to_string(), e.nll.to_string(), e.reg.to_string(), e.total.to_string()]);
    write_rows(path, &strings(&["epoch", "nll", "reg", "total"]), rows)
}

/// `id, normality_score, log_score, anomaly_score[, label]`.
pub fn write_scores(out: impl Write, scores: &[ScoreBreakdown], labels: Option<&[u8]>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = strings(&["id", "normality_score", "log_score", "anomaly_score"]);
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, s) in scores.iter().enumerate() {
        let mut row = vec![i.to_string(), s.score.to_string(), s.log_score.to_string(), to_anomaly_score(s).to_string()];
        if let Some(labels) = labels {
            row.push(labels[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()
}

/// Counts of normality scores in `bins` equal-width bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub all: Vec<usize>,
    /// Per-cohort counts when labels are known.
    pub normal: Option<Vec<usize>>,
    pub anomalous: Option<Vec<usize>>,
}

impl Histogram {
    pub fn new(scores: &[ScoreBreakdown], labels: Option<&[u8]>, bins: usize) -> Result<Histogram> {
        if bins == 0 {
            return Err(CliError::input("--hist needs at least one bin"));
        }
        let edges = (0..=bins).map(|k| k as f64 / bins as f64).collect();
        let bin_of = |s: f64| ((s * bins as f64) as usize).min(bins - 1);
        let mut all = vec![0; bins];
        let mut cohorts = labels.map(|_| (vec![0; bins], vec![0; bins]));
        for (i, s) in scores.iter().enumerate() {
            let b = bin_of(s.score);
            all[b] += 1;
            if let (Some((normal, anomalous)), Some(labels)) = (cohorts.as_mut(), labels) {
                if labels[i] == 0 {
                    normal[b] += 1;
                } else {
                    anomalous[b] += 1;
                }
            }
        }
        let (normal, anomalous) = cohorts.unzip();
        Ok(Histogram { edges, all, normal, anomalous })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut header = strings(&["bin", "lower", "upper", "all"]);
        if self.normal.is_some() {
            header.extend(strings(&["normal", "anomalous"]));
        }
        let rows = (0..self.all.len()).map(|b| {
            let mut row =
                vec![b.to_string(), self.edges[b].to_string(), self.edges[b + 1].to_string(), self.all[b].to_string()];
            if let (Some(n), Some(a)) = (&self.normal, &self.anomalous) {
                row.push(n[b].to_string());
                row.push(a[b].to_string());
            }
            row
        });
        write_rows(path, &header, rows)
    }
}

/// `site, feature, normal, anomalous, amplification` with 1-based sites.
pub fn write_entropy_profile(path: &Path, profiles: &CohortProfiles, names: &[String]) -> Result<()> {
    let rows = (0..profiles.normal.entropies.len()).map(|l| {
        vec![
            (l + 1).to_string(),
            names.get(l).cloned().unwrap_or_default(),
            profiles.normal.entropies[l].to_string(),
            profiles.anomalous.entropies[l].to_string(),
            profiles.amplification[l].to_string(),
        ]
    });
    write_rows(path, &strings(&["site", "feature", "normal", "anomalous", "amplification"]), rows)
}

pub fn write_amplification(path: &Path, amplification: &[f64]) -> Result<()> {
    let rows = amplification.iter().enumerate().map(|(l, a)| vec![(l + 1).to_string(), a.to_string()]);
    write_rows(path, &strings(&["site", "amplification"]), rows)
}

/// Square matrix with a `site` column and one column per site, all 1-based.
pub fn write_site_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut header = vec!["site".to_string()];
    header.extend((1..=m.cols()).map(|j| j.to_string()));
    let rows = (0..m.rows()).map(|i| {
        let mut row = vec![(i + 1).to_string()];
        row.extend(m.row(i).iter().map(f64::to_string));
        row
    });
    write_rows(path, &header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SelectionFile {
    pub threshold: f64,
    /// 1-based indices into the raw feature columns.
    pub features: Vec<usize>,
    pub names: Vec<String>,
}
