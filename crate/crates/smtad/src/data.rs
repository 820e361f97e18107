//! CSV ingestion: optional header row, one label column picked by name or
//! 0-based index, and a list of label values that count as normal.

use std::path::{Path, PathBuf};

use smtad_core::preprocess::RawDataset;
use smtad_core::Matrix;

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeaderMode {
    /// Header if the first row names the label column or has a non-numeric feature cell.
    #[default]
    Auto,
    Present,
    Absent,
}

/// How raw label strings map to `0` (normal) and `1` (anomalous).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabelSpec {
    /// Column name, or a 0-based index.
    pub column: String,
    pub normal: Vec<String>,
}

impl LabelSpec {
    pub fn new(column: impl Into<String>, normal: &[&str]) -> Self {
        LabelSpec { column: column.into(), normal: normal.iter().map(|s| s.to_string()).collect() }
    }

    /// Parses `"2,3"`-style lists.
    pub fn parse_normal(list: &str) -> Result<Vec<String>> {
        let values: Vec<String> =
            list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if values.is_empty() {
            return Err(CliError::input("--normal-labels needs at least one value"));
        }
        Ok(values)
    }

    fn is_normal(&self, raw: &str) -> bool {
        let raw = raw.trim();
        self.normal.iter().any(|n| {
            n == raw
                || matches!((n.parse::<f64>(), raw.parse::<f64>()), (Ok(a), Ok(b)) if a == b)
        })
    }
}

/// Parsed CSV contents. `labels` is present only when a label column was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub values: Matrix,
    pub labels: Option<Vec<u8>>,
}

impl Table {
    pub fn into_raw(self) -> Result<RawDataset> {
        let labels = self.labels.ok_or_else(|| CliError::input("a label column is required"))?;
        let mut raw = RawDataset::new(self.values, labels)?;
        raw.feature_names = Some(self.feature_names);
        Ok(raw)
    }
}

pub fn read_table(path: &Path, label: Option<&LabelSpec>, header: HeaderMode) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_table_from(file, path, label, header)
}

pub fn read_table_from(
    reader: impl std::io::Read,
    path: &Path,
    label: Option<&LabelSpec>,
    header: HeaderMode,
) -> Result<Table> {
    let csv_err = |source| CliError::Csv { path: PathBuf::from(path), source };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec);
    }
    let Some(first) = records.first() else {
        return Ok(Table {
            feature_names: Vec::new(),
            values: Matrix::zeros(0, 0),
            labels: label.map(|_| Vec::new()),
        });
    };
    let width = first.len();

    let label_by_name = label.and_then(|l| l.column.parse::<usize>().err().map(|_| l.column.as_str()));
    let has_header = match header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => {
            label_by_name.is_some_and(|name| first.iter().any(|f| f == name))
                || first.iter().enumerate().any(|(j, f)| {
                    let is_label = label.is_some_and(|l| l.column.parse::<usize>().ok() == Some(j));
                    !is_label && f.parse::<f64>().is_err()
                })
        }
    };
    let names: Vec<String> = if has_header {
        first.iter().map(str::to_string).collect()
    } else {
        (0..width).map(|j| format!("x{}", j + 1)).collect()
    };

    let label_col = match label {
        None => None,
        Some(l) => Some(match l.column.parse::<usize>() {
            Ok(j) if j < width => j,
            Ok(j) => return Err(CliError::input(format!("label column index {j} out of range (width {width})"))),
            Err(_) => names
                .iter()
                .position(|n| n == &l.column)
                .filter(|_| has_header)
                .ok_or_else(|| CliError::input(format!("label column {:?} not found", l.column)))?,
        }),
    };

    let body = if has_header { &records[1..] } else { &records[..] };
    let n_features = width - usize::from(label_col.is_some());
    let mut values = Vec::with_capacity(body.len() * n_features);
    let mut labels = label_col.map(|_| Vec::with_capacity(body.len()));
    for (i, rec) in body.iter().enumerate() {
        let line = i + 1 + usize::from(has_header);
        if rec.len() != width {
            return Err(CliError::input(format!("line {line}: expected {width} fields, found {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == label_col {
                let spec = label.expect("label column implies a spec");
                labels.as_mut().unwrap().push(u8::from(!spec.is_normal(field)));
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::input(format!("line {line}, column {:?}: not a number: {field:?}", names[j])))?;
            if !v.is_finite() {
                return Err(CliError::input(format!("line {line}, column {:?}: non-finite value", names[j])));
            }
            values.push(v);
        }
    }
    let feature_names = names.into_iter().enumerate().filter(|(j, _)| Some(*j) != label_col).map(|(_, n)| n).collect();
    Ok(Table { feature_names, values: Matrix::from_vec(body.len(), n_features, values)?, labels })
}

/// Reads a selection file: either a bare JSON array of 1-based indices or an
/// object with a `features` array.
pub fn read_selection(path: &Path) -> Result<Vec<usize>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Selection {
        List(Vec<usize>),
        Object { features: Vec<usize> },
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let sel: Selection =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    let features = match sel {
        Selection::List(v) | Selection::Object { features: v } => v,
    };
    if features.is_empty() || features.contains(&0) {
        return Err(CliError::input(format!("{}: selection must be non-empty and 1-based", path.display())));
    }
    Ok(features)
}

/// Converts 1-based feature indices to sorted, unique 0-based columns.
pub fn selection_columns(selection: &[usize], n_features: usize) -> Result<Vec<usize>> {
    let mut cols: Vec<usize> = selection.iter().map(|&s| s.wrapping_sub(1)).collect();
    cols.sort_unstable();
    cols.dedup();
    if cols.len() != selection.len() {
        return Err(CliError::input("selection contains duplicate indices"));
    }
    if let Some(bad) = cols.iter().find(|&&c| c >= n_features) {
        return Err(CliError::input(format!("selected feature {} exceeds {n_features} features", bad.wrapping_add(1))));
    }
    Ok(cols)
}
