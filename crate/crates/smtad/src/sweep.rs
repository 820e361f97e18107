//! Grid sweeps over `(M, P, seed)` cells.
//!
//! Each finished cell writes a JSON marker under `<out>/cells/`; a rerun skips
//! cells whose marker exists, so an interrupted sweep resumes where it stopped.
//! `results.csv` and `summary.csv` are rebuilt from the markers in grid order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use smtad_core::preprocess::RawDataset;
use smtad_core::training::{TrainConfig, TrainError};

use crate::error::{io_err, CliError, Result};
use crate::experiment::{prepare_seed, run, DataProtocol, Prepared, Summary};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SMTAD_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub components: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub seeds: Vec<u64>,
    pub protocol: DataProtocol,
    pub train: TrainConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.resolutions.is_empty() || self.seeds.is_empty() {
            return Err(CliError::input("sweep grid must be non-empty"));
        }
        if self.components.contains(&0) || self.resolutions.contains(&0) {
            return Err(CliError::input("M and P must be positive"));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &m in &self.components {
            for &p in &self.resolutions {
                for &seed in &self.seeds {
                    cells.push(Cell { components: m, resolutions: p, seed });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub components: usize,
    pub resolutions: usize,
    pub seed: u64,
}

impl Cell {
    fn marker_name(&self) -> String {
        format!("M{}_P{}_seed{}.json", self.components, self.resolutions, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Training produced a non-finite loss or gradient.
    Diverged,
    /// Scoring or metrics failed (degenerate score, single-class test split).
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub status: CellStatus,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub final_nll: Option<f64>,
    pub message: Option<String>,
}

/// Mean ± std over the successful seeds of one `(M, P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub components: usize,
    pub resolutions: usize,
    pub runs: usize,
    pub auroc: Summary,
    pub auprc: Summary,
    pub best_auroc: bool,
    pub best_auprc: bool,
}

pub fn run_cell(prepared: &Prepared, cell: Cell, train: &TrainConfig) -> CellResult {
    let mut result = CellResult {
        cell,
        status: CellStatus::Failed,
        auroc: None,
        auprc: None,
        n_pos: 0,
        n_neg: 0,
        epochs: 0,
        batch_size: 0,
        final_nll: None,
        message: None,
    };
    match run(prepared, cell.components, cell.resolutions, train) {
        Ok(out) => {
            result.epochs = out.outcome.epochs;
            result.batch_size = out.outcome.batch_size;
            result.final_nll = out.outcome.history.last().map(|e| e.nll);
            match out.metrics {
                Some(m) => {
                    result.status = CellStatus::Ok;
                    (result.auroc, result.auprc, result.n_pos, result.n_neg) = (Some(m.auroc), Some(m.auprc), m.n_pos, m.n_neg);
                }
                None => result.message = Some("test split lacks one of the classes".into()),
            }
        }
        Err(e) => {
            if matches!(e, CliError::Train(TrainError::Diverged { .. })) {
                result.status = CellStatus::Diverged;
            }
            result.message = Some(e.to_string());
        }
    }
    result
}

/// Worker count: `SMTAD_THREADS` if set, else available parallelism, never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(jobs).max(1)
}

/// Runs `job(i)` for `i in 0..jobs` on up to [`worker_count`] threads and
/// returns results in index order.
pub fn parallel_map<T: Send>(jobs: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..worker_count(jobs) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let value = job(i);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|v| v.expect("every job ran")).collect()
}

fn read_marker(path: &Path) -> Option<CellResult> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_marker(path: &Path, result: &CellResult) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(result).expect("cell results serialize");
    std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub results: Vec<CellResult>,
    pub grid: Vec<GridPoint>,
    /// Cells computed in this invocation (the rest came from markers).
    pub computed: usize,
}

/// Runs every missing cell of `spec` and rewrites the tables in `out`.
pub fn run_sweep(raw: &RawDataset, spec: &SweepSpec, out: &Path) -> Result<SweepReport> {
    spec.validate()?;
    let cells_dir = out.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;

    let cells = spec.cells();
    let marker = |c: &Cell| -> PathBuf { cells_dir.join(c.marker_name()) };
    let pending: Vec<Cell> = cells.iter().copied().filter(|c| read_marker(&marker(c)).is_none()).collect();

    let mut seeds: Vec<u64> = pending.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let prepared: BTreeMap<u64, Prepared> =
        seeds.iter().map(|&s| Ok((s, prepare_seed(raw, &spec.protocol, s)?))).collect::<Result<_>>()?;

    let written = parallel_map(pending.len(), |i| {
        let cell = pending[i];
        let result = run_cell(&prepared[&cell.seed], cell, &spec.train);
        write_marker(&marker(&cell), &result).map(|_| result)
    });
    for w in written {
        w?;
    }

    let results: Vec<CellResult> = cells
        .iter()
        .map(|c| read_marker(&marker(c)).ok_or_else(|| CliError::input(format!("missing marker for {c:?}"))))
        .collect::<Result<_>>()?;
    let grid = summarize(&spec.components, &spec.resolutions, &results);
    write_results(&out.join("results.csv"), &results)?;
    write_summary(&out.join("summary.csv"), &grid)?;
    Ok(SweepReport { results, grid, computed: pending.len() })
}

/// Per-`(M, P)` means; ties for the best cell go to the earliest grid point.
pub fn summarize(components: &[usize], resolutions: &[usize], results: &[CellResult]) -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for &m in components {
        for &p in resolutions {
            let ok: Vec<&CellResult> = results
                .iter()
                .filter(|r| r.cell.components == m && r.cell.resolutions == p && r.status == CellStatus::Ok)
                .collect();
            let roc: Vec<f64> = ok.iter().filter_map(|r| r.auroc).collect();
            let prc: Vec<f64> = ok.iter().filter_map(|r| r.auprc).collect();
            if let (Some(auroc), Some(auprc)) = (Summary::of(&roc), Summary::of(&prc)) {
                grid.push(GridPoint {
                    components: m,
                    resolutions: p,
                    runs: ok.len(),
                    auroc,
                    auprc,
                    best_auroc: false,
                    best_auprc: false,
                });
            }
        }
    }
    if let Some(i) = argmax(&grid, |g| g.auroc.mean) {
        grid[i].best_auroc = true;
    }
    if let Some(i) = argmax(&grid, |g| g.auprc.mean) {
        grid[i].best_auprc = true;
    }
    grid
}

fn argmax(grid: &[GridPoint], key: fn(&GridPoint) -> f64) -> Option<usize> {
    (0..grid.len()).fold(None, |best, i| match best {
        Some(b) if key(&grid[b]) >= key(&grid[i]) => Some(b),
        _ => Some(i),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_file(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn write_results(path: &Path, results: &[CellResult]) -> Result<()> {
    let err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv_file(path)?;
    w.write_record(["M", "P", "seed", "status", "auroc", "auprc", "n_pos", "n_neg", "epochs", "batch", "final_nll"])
        .map_err(err)?;
    for r in results {
        let status = serde_json::to_value(r.status).unwrap();
        w.write_record([
            r.cell.components.to_string(),
            r.cell.resolutions.to_string(),
            r.cell.seed.to_string(),
            status.as_str().unwrap_or_default().to_string(),
            opt(r.auroc),
            opt(r.auprc),
            r.n_pos.to_string(),
            r.n_neg.to_string(),
            r.epochs.to_string(),
            r.batch_size.to_string(),
            opt(r.final_nll),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_summary(path: &Path, grid: &[GridPoint]) -> Result<()> {
    let err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv_file(path)?;
    w.write_record([
        "M", "P", "runs", "auroc_mean", "auroc_std", "auprc_mean", "auprc_std", "best_auroc", "best_auprc",
    ])
    .map_err(err)?;
    for g in grid {
        w.write_record([
            g.components.to_string(),
            g.resolutions.to_string(),
            g.runs.to_string(),
            g.auroc.mean.to_string(),
            g.auroc.std.to_string(),
            g.auprc.mean.to_string(),
            g.auprc.std.to_string(),
            g.best_auroc.to_string(),
            g.best_auprc.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(io_err(path))
}
