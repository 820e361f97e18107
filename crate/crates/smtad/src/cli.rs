//! Command-line surface: `train`, `score`, `eval`, `analyze` and `sweep`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smtad_core::analysis::{cohort_profiles, select_features, subsample, DEFAULT_COHORT_SIZE};
use smtad_core::preprocess::{split, FitScope, RawDataset, SplitTag, DEFAULT_DISCRETE_THRESHOLD};
use smtad_core::training::{Epochs, TrainConfig, TrainError};
use smtad_core::Matrix;

use crate::data::{read_selection, read_table, selection_columns, HeaderMode, LabelSpec, Table};
use crate::error::{io_err, CliError, Result};
use crate::experiment::{evaluate_anomaly_scores, prepare_seed, run, score_rows, DataProtocol, Metrics, Summary};
use crate::export::{
    write_amplification, write_entropy_profile, write_json, write_loss_history, write_scores, write_site_matrix,
    Histogram, SelectionFile,
};
use crate::model_file::{ModelFile, Protocol};
use crate::sweep::{parallel_map, run_sweep, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "smtad", version, about = "One-class anomaly detection with superposed multiresolution tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the normalizer, split, train and write model.json, loss.csv and metrics.json.
    Train(TrainCmd),
    /// Score rows with a trained model.
    Score(ScoreCmd),
    /// AUROC/AUPRC of a scores CSV, or of K fresh split/train runs with --repeat.
    Eval(EvalCmd),
    /// Cohort entropy, mutual-information and amplification profiles.
    Analyze(AnalyzeCmd),
    /// Grid search over M, P and seeds.
    Sweep(SweepCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeaderArg {
    Auto,
    Yes,
    No,
}

impl From<HeaderArg> for HeaderMode {
    fn from(h: HeaderArg) -> Self {
        match h {
            HeaderArg::Auto => HeaderMode::Auto,
            HeaderArg::Yes => HeaderMode::Present,
            HeaderArg::No => HeaderMode::Absent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Full,
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label column name, or 0-based index.
    #[arg(long = "label-col")]
    pub label_col: String,
    /// Comma-separated label values treated as normal; everything else is anomalous.
    #[arg(long = "normal-labels")]
    pub normal_labels: String,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
}

impl DataArgs {
    fn label(&self) -> Result<LabelSpec> {
        Ok(LabelSpec { column: self.label_col.clone(), normal: LabelSpec::parse_normal(&self.normal_labels)? })
    }

    fn load(&self) -> Result<RawDataset> {
        read_table(&self.data, Some(&self.label()?), self.header.into())?.into_raw()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    /// Fraction of normal rows used for training.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Features with at most this many distinct values are treated as discrete.
    #[arg(long = "discrete-threshold", default_value_t = DEFAULT_DISCRETE_THRESHOLD)]
    pub discrete_threshold: usize,
    /// Rows the rank normalizer is fitted on.
    #[arg(long = "fit-scope", value_enum, default_value = "full")]
    pub fit_scope: ScopeArg,
    /// JSON list of 1-based feature indices (or an analyze selection file).
    #[arg(long = "select-file")]
    pub select_file: Option<PathBuf>,
}

impl ProtocolArgs {
    fn protocol(&self) -> Result<DataProtocol> {
        Ok(DataProtocol {
            split: self.split,
            discrete_threshold: self.discrete_threshold,
            fit_scope: match self.fit_scope {
                ScopeArg::Full => FitScope::Full,
                ScopeArg::Train => FitScope::TrainOnly,
            },
            selection: self.select_file.as_deref().map(read_selection).transpose()?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Mini-batch size; defaults to 64 below 10⁴ training rows, 512 otherwise.
    #[arg(long)]
    pub batch: Option<usize>,
    /// `auto` or a fixed epoch count.
    #[arg(long, default_value = "auto", value_parser = parse_epochs)]
    pub epochs: Epochs,
    #[arg(long = "lambda-c", default_value_t = 0.01)]
    pub lambda_c: f64,
    #[arg(long = "lambda-theta", default_value_t = 0.001)]
    pub lambda_theta: f64,
    /// Decoupled weight decay applied by the optimizer (off by default).
    #[arg(long = "weight-decay", default_value_t = 0.0)]
    pub weight_decay: f64,
}

impl OptimArgs {
    fn config(&self, seed: u64) -> Result<TrainConfig> {
        let config = TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch,
            epochs: self.epochs,
            lambda_c: self.lambda_c,
            lambda_theta: self.lambda_theta,
            weight_decay: self.weight_decay,
            seed,
            ..TrainConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_epochs(s: &str) -> std::result::Result<Epochs, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Epochs::Auto);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Epochs::Fixed(n)),
        _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
    }
}

/// A list of positive grid values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid(pub Vec<usize>);

/// Parses `2,4,6`, `2-40:2` (inclusive range with step) or a mix of both.
pub fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (range, step) = match part.split_once(':') {
            Some((r, st)) => (r, st.parse::<usize>().map_err(|_| format!("bad step in {part:?}"))?),
            None => (part, 1),
        };
        if step == 0 {
            return Err(format!("zero step in {part:?}"));
        }
        match range.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| format!("bad range {part:?}"))?;
                let b: usize = b.trim().parse().map_err(|_| format!("bad range {part:?}"))?;
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend((a..=b).step_by(step));
            }
            None => out.push(range.parse().map_err(|_| format!("bad value {part:?}"))?),
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(format!("expected positive values, got {s:?}"));
    }
    Ok(Grid(out))
}

#[derive(Debug, Clone, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long = "M")]
    pub components: usize,
    #[arg(long = "P")]
    pub resolutions: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    /// The test split the model was evaluated on (needs labels).
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides the label column stored in the model.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long = "normal-labels", requires = "label_col")]
    pub normal_labels: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
    #[arg(long, value_enum, default_value = "all")]
    pub subset: Subset,
    /// Scores CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `<out stem>_hist.csv` with this many bins over [0, 1].
    #[arg(long, requires = "out")]
    pub hist: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalCmd {
    /// Scores CSV with `anomaly_score` and `label` columns.
    #[arg(long, conflicts_with = "data")]
    pub scores: Option<PathBuf>,
    /// Dataset for --repeat runs.
    #[arg(long, requires_all = ["repeat", "label_col", "normal_labels", "components", "resolutions"])]
    pub data: Option<PathBuf>,
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long = "normal-labels")]
    pub normal_labels: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
    /// Number of seeds (`seed`, `seed + 1`, ...) to split, train and evaluate.
    #[arg(long, requires = "data")]
    pub repeat: Option<usize>,
    #[arg(long = "M")]
    pub components: Option<usize>,
    #[arg(long = "P")]
    pub resolutions: Option<usize>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Metrics JSON; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    #[arg(long = "normal-labels", requires = "label_col")]
    pub normal_labels: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub header: HeaderArg,
    /// Rows drawn from each cohort.
    #[arg(long = "cohort-size", default_value_t = DEFAULT_COHORT_SIZE)]
    pub cohort_size: usize,
    /// Subsampling seed; the model's seed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write selection.json with the sites whose amplification reaches this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Component grid, e.g. `2-40:2`.
    #[arg(long = "M", value_parser = parse_grid)]
    pub components: Grid,
    /// Resolution grid, e.g. `1-4`.
    #[arg(long = "P", value_parser = parse_grid)]
    pub resolutions: Grid,
    /// Seeds per cell, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Output directory (cell markers, results.csv, summary.csv).
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Train(c) => cmd_train(&c),
        Command::Score(c) => cmd_score(&c),
        Command::Eval(c) => cmd_eval(&c),
        Command::Analyze(c) => cmd_analyze(&c),
        Command::Sweep(c) => cmd_sweep(&c),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub fn cmd_train(c: &TrainCmd) -> Result<()> {
    let label = c.data.label()?;
    let raw = c.data.load()?;
    let protocol = c.protocol.protocol()?;
    let config = c.optim.config(c.protocol.seed)?;
    let prepared = prepare_seed(&raw, &protocol, c.protocol.seed)?;
    create_dir(&c.out)?;

    let model_for = |params: &smtad_core::ModelParams| {
        ModelFile::new(
            params,
            prepared.normalizer.clone(),
            raw.n_features(),
            prepared.feature_names.clone(),
            protocol.selection.clone(),
            config.clone(),
            Protocol {
                label: Some(label.clone()),
                split: protocol.split,
                discrete_threshold: protocol.discrete_threshold,
                fit_scope: protocol.fit_scope,
            },
        )
    };

    let out = match run(&prepared, c.components, c.resolutions, &config) {
        Ok(out) => out,
        Err(CliError::Train(TrainError::Diverged { epoch, reason, last_good })) => {
            let path = c.out.join("model.last_good.json");
            model_for(&last_good).save(&path)?;
            eprintln!("training diverged in epoch {epoch}: {reason}; last good parameters in {}", path.display());
            return Err(CliError::Train(TrainError::Diverged { epoch, reason, last_good }));
        }
        Err(e) => return Err(e),
    };
    let model = model_for(&out.outcome.params);
    model.save(&c.out.join("model.json"))?;
    write_loss_history(&c.out.join("loss.csv"), &out.outcome.history)?;
    if let Some(m) = &out.metrics {
        write_json(&c.out.join("metrics.json"), m)?;
    }
    eprintln!(
        "trained L={} M={} P={} ({} learnables), {} epochs, batch {}",
        model.sites,
        model.components,
        model.resolutions,
        out.outcome.params.n_learnable(),
        out.outcome.epochs,
        out.outcome.batch_size
    );
    if let Some(m) = out.metrics {
        eprintln!("test auroc {:.4} auprc {:.4} ({} anomalous, {} normal)", m.auroc, m.auprc, m.n_pos, m.n_neg);
    }
    Ok(())
}

/// Reads `data` for a stored model, using explicit label flags when given and
/// otherwise the model's label column when the file has it.
fn read_for_model(
    model: &ModelFile,
    data: &Path,
    label_col: Option<&String>,
    normal_labels: Option<&String>,
    header: HeaderArg,
) -> Result<Table> {
    let header = header.into();
    if let Some(col) = label_col {
        let normal = match normal_labels {
            Some(list) => LabelSpec::parse_normal(list)?,
            None => model
                .protocol
                .label
                .as_ref()
                .map(|l| l.normal.clone())
                .ok_or_else(|| CliError::input("--normal-labels is required"))?,
        };
        return read_table(data, Some(&LabelSpec { column: col.clone(), normal }), header);
    }
    let fits = |t: &Table| t.values.rows() == 0 || t.values.cols() == model.input_features || t.values.cols() == model.sites;
    if let Some(label) = &model.protocol.label {
        match read_table(data, Some(label), header) {
            Ok(t) if fits(&t) => return Ok(t),
            Ok(_) => {}
            Err(e) => return read_table(data, None, header).map_err(|_| e),
        }
    }
    read_table(data, None, header)
}

pub fn cmd_score(c: &ScoreCmd) -> Result<()> {
    let model = ModelFile::load(&c.model)?;
    let params = model.params()?;
    let table = read_for_model(&model, &c.data, c.label_col.as_ref(), c.normal_labels.as_ref(), c.header)?;
    let (rows, labels) = match c.subset {
        Subset::All => (table.values, table.labels),
        Subset::Test => {
            let labels = table.labels.ok_or_else(|| CliError::input("--subset test needs a label column"))?;
            let tags = split(&labels, model.protocol.split, model.seed)?;
            let idx: Vec<usize> = [SplitTag::TestNormal, SplitTag::TestAnomalous]
                .iter()
                .flat_map(|t| tags.iter().enumerate().filter(move |(_, g)| *g == t).map(|(i, _)| i))
                .collect();
            let test_labels = idx.iter().map(|&i| labels[i]).collect();
            (table.values.select_rows(&idx), Some(test_labels))
        }
    };
    let normalized = model.normalize(&rows)?;
    let scores = score_rows(&params, &normalized)?;

    match &c.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(io_err(path))?;
            write_scores(std::io::BufWriter::new(file), &scores, labels.as_deref()).map_err(io_err(path))?;
            if let Some(bins) = c.hist {
                let hist = Histogram::new(&scores, labels.as_deref(), bins)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scores");
                hist.write(&path.with_file_name(format!("{stem}_hist.csv")))?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            write_scores(stdout.lock(), &scores, labels.as_deref()).map_err(io_err("<stdout>"))?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            let text = serde_json::to_string_pretty(value).expect("reports serialize");
            writeln!(std::io::stdout(), "{text}").map_err(io_err("<stdout>"))
        }
    }
}

/// Aggregate of `eval --repeat`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RepeatReport {
    #[serde(rename = "M")]
    pub components: usize,
    #[serde(rename = "P")]
    pub resolutions: usize,
    pub auroc: Summary,
    pub auprc: Summary,
    pub runs: Vec<Metrics>,
}

pub fn cmd_eval(c: &EvalCmd) -> Result<()> {
    if let Some(path) = &c.scores {
        let label = LabelSpec::new(c.label_col.clone().unwrap_or_else(|| "label".into()), &["0"]);
        let table = read_table(path, Some(&label), c.header.into())?;
        let col = table
            .feature_names
            .iter()
            .position(|n| n == "anomaly_score")
            .ok_or_else(|| CliError::input(format!("{}: no anomaly_score column", path.display())))?;
        let scores: Vec<f64> = table.values.column(col).collect();
        let labels = table.labels.unwrap_or_default();
        let metrics = evaluate_anomaly_scores(scores, &labels, None)?
            .ok_or_else(|| CliError::input("metrics need both normal and anomalous rows"))?;
        return emit_json(c.out.as_deref(), &metrics);
    }

    let (Some(data), Some(repeat)) = (&c.data, c.repeat) else {
        return Err(CliError::input("eval needs --scores, or --data with --repeat"));
    };
    let args = DataArgs {
        data: data.clone(),
        label_col: c.label_col.clone().unwrap_or_default(),
        normal_labels: c.normal_labels.clone().unwrap_or_default(),
        header: c.header,
    };
    let (components, resolutions) = (c.components.unwrap_or(0), c.resolutions.unwrap_or(0));
    if repeat == 0 || components == 0 || resolutions == 0 {
        return Err(CliError::input("--repeat, --M and --P must be positive"));
    }
    let raw = args.load()?;
    let protocol = c.protocol.protocol()?;
    let config = c.optim.config(c.protocol.seed)?;
    let runs = parallel_map(repeat, |k| -> Result<Metrics> {
        let seed = c.protocol.seed + k as u64;
        let prepared = prepare_seed(&raw, &protocol, seed)?;
        run(&prepared, components, resolutions, &config)?
            .metrics
            .ok_or_else(|| CliError::input(format!("seed {seed}: test split lacks one of the classes")))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let roc: Vec<f64> = runs.iter().map(|m| m.auroc).collect();
    let prc: Vec<f64> = runs.iter().map(|m| m.auprc).collect();
    let report = RepeatReport {
        components,
        resolutions,
        auroc: Summary::of(&roc).expect("repeat > 0"),
        auprc: Summary::of(&prc).expect("repeat > 0"),
        runs,
    };
    emit_json(c.out.as_deref(), &report)
}

pub fn cmd_analyze(c: &AnalyzeCmd) -> Result<()> {
    let model = ModelFile::load(&c.model)?;
    let params = model.params()?;
    let table = read_for_model(&model, &c.data, c.label_col.as_ref(), c.normal_labels.as_ref(), c.header)?;
    let labels = table.labels.clone().ok_or_else(|| CliError::input("analyze needs a label column"))?;
    let normalized = model.normalize(&table.values)?;

    let seed = c.seed.unwrap_or(model.seed);
    let cohort = |label: u8| -> Matrix {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        let pick = subsample(idx.len(), c.cohort_size, seed);
        normalized.select_rows(&pick.iter().map(|&k| idx[k]).collect::<Vec<_>>())
    };
    let (normal, anomalous) = (cohort(0), cohort(1));
    let profiles = cohort_profiles(&params, &normal, &anomalous)?;

    create_dir(&c.out)?;
    write_entropy_profile(&c.out.join("entropy.csv"), &profiles, &model.feature_names)?;
    write_site_matrix(&c.out.join("mi_normal.csv"), &profiles.mi_normal.values)?;
    write_site_matrix(&c.out.join("mi_anomalous.csv"), &profiles.mi_anomalous.values)?;
    write_amplification(&c.out.join("amplification.csv"), &profiles.amplification)?;
    if let Some(threshold) = c.threshold {
        let sites = select_features(&profiles.amplification, threshold)?;
        let raw_columns = match &model.selection {
            Some(sel) => selection_columns(sel, model.input_features)?,
            None => (0..model.input_features).collect(),
        };
        let selection = SelectionFile {
            threshold,
            features: sites.iter().map(|&s| raw_columns[s - 1] + 1).collect(),
            names: sites.iter().map(|&s| model.feature_names.get(s - 1).cloned().unwrap_or_default()).collect(),
        };
        write_json(&c.out.join("selection.json"), &selection)?;
    }
    Ok(())
}

pub fn cmd_sweep(c: &SweepCmd) -> Result<()> {
    if c.repeat == 0 {
        return Err(CliError::input("--repeat must be positive"));
    }
    let raw = c.data.load()?;
    let spec = SweepSpec {
        components: c.components.0.clone(),
        resolutions: c.resolutions.0.clone(),
        seeds: (0..c.repeat as u64).map(|k| c.protocol.seed + k).collect(),
        protocol: c.protocol.protocol()?,
        train: c.optim.config(c.protocol.seed)?,
    };
    let report = run_sweep(&raw, &spec, &c.out)?;
    eprintln!("{} cells ({} computed now)", report.results.len(), report.computed);
    for g in report.grid.iter().filter(|g| g.best_auroc || g.best_auprc) {
        eprintln!(
            "best{}{}: M={} P={} auroc {:.4}±{:.4} auprc {:.4}±{:.4}",
            if g.best_auroc { " auroc" } else { "" },
            if g.best_auprc { " auprc" } else { "" },
            g.components,
            g.resolutions,
            g.auroc.mean,
            g.auroc.std,
            g.auprc.mean,
            g.auprc.std
        );
    }
    Ok(())
}
