//! Command-line commands: `split`, `train`, `predict`, `evaluate`, `synth`.
//!
//! Every command writes machine-readable JSON or CSV to stdout and
//! diagnostics to stderr. Exit codes: 0 ok, 2 config, 3 data, 4 numeric,
//! 5 divergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::config::{KChoice, RunConfig, TaskKind};
use crate::dataio::{
    self, apply_minmax, fill_missing, load_csv, make_windows, split_sizes, synth_tcs_generate, CsvSchema, Dataset,
    NormStats, Prepared, SynthConfig, WindowSpec,
};
use crate::distances::DistanceKind;
use crate::error::{Error, Result};
use crate::metrics::{
    classification_metrics, information_coefficients, regression_metrics, ClassPredictions, GroupedPredictions,
};
use crate::numgraph::Matrix;
use crate::seqmodel::{predict, ModelParams, Task};
use crate::tdc::{Characterizer, PeriodSplit};
use crate::tdm::{self, EpochRecord, TrainOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_DIVERGENCE: i32 = 5;

/// Stable process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Infeasible(_)
        | Error::OracleTooLarge { .. }
        | Error::Contract(_)
        | Error::Dimension { .. } => EXIT_CONFIG,
        Error::Data(_)
        | Error::Format(_)
        | Error::Version { .. }
        | Error::Io(_)
        | Error::DegenerateInput(_)
        | Error::InputTooShort(_) => EXIT_DATA,
        Error::Numeric { .. } => EXIT_NUMERIC,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "adarnn", version, about = "Period characterization and distribution-matched GRU forecasting")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the training range into distribution-diverse periods.
    Split(SplitArgs),
    /// Train a model and write the model file and JSONL history.
    Train(TrainArgs),
    /// Predict every segment of a CSV file.
    Predict(PredictArgs),
    /// Score a predictions CSV against a truth CSV.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic series with shifting regimes.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TdcOverrides {
    /// Fixed number of periods, or `auto`.
    #[arg(long)]
    pub k: Option<KChoice>,
    /// cosine | mmd | mmd_linear | coral | adv
    #[arg(long)]
    pub distance: Option<String>,
    /// Number of minimal units.
    #[arg(long)]
    pub units: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub tdc: TdcOverrides,
    /// Split file; defaults to `out.split` of the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub tdc: TdcOverrides,
    /// Use this split file instead of characterizing inline.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Train on one period without matching.
    #[arg(long)]
    pub no_tdc: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    All,
    Train,
    Valid,
    Test,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Read data columns and window from this config instead of the model.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub part: Part,
    /// Predictions CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the matching truth CSV here.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub regimes: usize,
    #[arg(long, default_value_t = 1500)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    #[arg(long, default_value_t = 4.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    let stdout = std::io::stdout();
    match dispatch(cli.command, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Split(a) => cmd_split(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
    }
}

fn apply_tdc_overrides(cfg: &mut RunConfig, o: &TdcOverrides) -> Result<()> {
    if let Some(k) = o.k {
        cfg.tdc.k = k;
    }
    if let Some(d) = &o.distance {
        cfg.tdc.distance = DistanceKind::try_from(d.clone())?;
    }
    if let Some(u) = o.units {
        cfg.tdc.units = u;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{v}")?;
    Ok(())
}

/// Loads the configured CSV and runs the preprocessing pipeline.
pub fn load_prepared(cfg: &RunConfig) -> Result<Prepared> {
    let raw = load_csv(&cfg.data.path, &cfg.schema())?;
    dataio::prepare(&raw, &cfg.window_spec(), cfg.data.ratios, cfg.scale_target())
}

/// Characterizes the training rows of `prep` with the configured distance.
pub fn characterize(cfg: &RunConfig, prep: &Prepared) -> Result<PeriodSplit> {
    let rows = prep.table.rows(prep.train_rows.start, prep.train_rows.end);
    let samples = rows.dense(&cfg.data.features)?;
    let mut c = Characterizer::new(&samples, cfg.tdc.units, cfg.tdc.distance.clone())?;
    match cfg.tdc.k {
        KChoice::Fixed(k) => c.greedy_split(k),
        KChoice::Auto => c.select_split(&cfg.tdc.k_candidates).map(|s| s.split),
    }
}

pub fn cmd_split(args: &SplitArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_tdc_overrides(&mut cfg, &args.tdc)?;
    cfg.validate()?;
    let prep = load_prepared(&cfg)?;
    let split = characterize(&cfg, &prep)?;
    let text = serde_json::to_string_pretty(&split).expect("split serializes");
    if let Some(path) = args.out.as_ref().or(cfg.out.split.as_ref()) {
        write_file(path, &text)?;
    }
    emit(out, &serde_json::to_value(&split).expect("split serializes"))
}

pub fn load_split(path: &Path) -> Result<PeriodSplit> {
    let text = std::fs::read_to_string(path)?;
    let split: PeriodSplit =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("split file {}: {e}", path.display())))?;
    let ok = split.k >= 2 && split.boundaries.len() == split.k + 1 && split.boundaries.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(Error::Format(format!("split file {}: malformed boundaries", path.display())));
    }
    Ok(split)
}

/// Artifacts of one training run, ready to be written to disk.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model_json: String,
    /// One JSON object per line.
    pub history_jsonl: String,
    pub split: Option<PeriodSplit>,
    pub prepared: Prepared,
    pub output: TrainOutput,
}

fn infer_task(cfg: &RunConfig, train: &Dataset) -> Result<Task> {
    match cfg.train.task {
        TaskKind::Regression => Ok(Task::Regression(train.target_dim())),
        TaskKind::Classification => {
            let mut max = 0usize;
            for t in train.targets.iter().flatten() {
                if *t < 0.0 || t.fract() != 0.0 {
                    return Err(Error::Data(format!("class label {t} is not a non-negative integer")));
                }
                max = max.max(*t as usize);
            }
            let c = cfg.train.classes.unwrap_or(max + 1).max(2);
            if max >= c {
                return Err(Error::Data(format!("label {max} outside 0..{c}")));
            }
            Ok(Task::Classification(c))
        }
    }
}

/// Everything a model file needs besides weights to predict on a raw CSV.
fn model_extras(cfg: &RunConfig, prep: &Prepared, split: Option<&PeriodSplit>, out: &TrainOutput) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("window".into(), serde_json::to_value(cfg.window_spec()).expect("spec"));
    m.insert("time_col".into(), json!(cfg.data.time_col));
    m.insert("ratios".into(), json!(cfg.data.ratios));
    m.insert("norm".into(), serde_json::to_value(&prep.stats).expect("stats"));
    m.insert("split".into(), serde_json::to_value(split).expect("split"));
    m.insert("alpha".into(), serde_json::to_value(&out.alpha).expect("alpha"));
    m.insert("best_epoch".into(), json!(out.best_epoch));
    m
}

/// Runs preprocessing, characterization (unless `split` is given or TDC is
/// disabled) and training. Writes nothing.
pub fn run_train(cfg: &RunConfig, split: Option<PeriodSplit>) -> Result<TrainRun> {
    cfg.validate()?;
    let tcfg = cfg.train_config()?;
    let prep = load_prepared(cfg)?;
    let split = match split {
        Some(s) => Some(s),
        None if cfg.tdc.enabled => Some(characterize(cfg, &prep)?),
        None => None,
    };
    if let Some(s) = &split {
        log::info!("training with K={} boundaries={:?}", s.k, s.boundaries);
    }
    let task = infer_task(cfg, &prep.train)?;
    let valid = cfg.train.select_by_valid.then_some(&prep.valid);
    let mut history = String::new();
    let result = tdm::train(&prep.train, split.as_ref(), task, &tcfg, valid, &mut |r: &EpochRecord| {
        history.push_str(&r.to_json_line());
        history.push('\n');
        Ok(())
    });
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            if let (Error::Divergence { .. }, Some(path)) = (&e, &cfg.out.history) {
                write_file(path, &history)?;
            }
            return Err(e);
        }
    };
    let model_json = output.params.to_json_with(model_extras(cfg, &prep, split.as_ref(), &output));
    Ok(TrainRun {
        model_json,
        history_jsonl: history,
        split,
        prepared: prep,
        output,
    })
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_tdc_overrides(&mut cfg, &args.tdc)?;
    if args.no_tdc {
        cfg.tdc.enabled = false;
    }
    let t = &mut cfg.train;
    t.lambda = args.lambda.or(t.lambda);
    t.lr = args.lr.or(t.lr);
    t.hidden = args.hidden.or(t.hidden);
    t.batch = args.batch.or(t.batch);
    t.epochs = args.epochs.or(t.epochs);
    t.pretrain_epochs = args.pretrain_epochs.or(t.pretrain_epochs);
    t.seed = args.seed.or(t.seed);
    cfg.out.model = args.model.clone().or(cfg.out.model).or_else(|| Some("model.adarnn.json".into()));
    cfg.out.history = args.history.clone().or(cfg.out.history).or_else(|| Some("history.jsonl".into()));
    let split = args.split.as_deref().map(load_split).transpose()?;
    let run = run_train(&cfg, split)?;
    let (model_path, history_path) = (cfg.out.model.unwrap(), cfg.out.history.unwrap());
    write_file(&model_path, &run.model_json)?;
    write_file(&history_path, &run.history_jsonl)?;
    let last = run.output.history.last();
    emit(
        out,
        &json!({
            "model": model_path,
            "history": history_path,
            "k": run.split.as_ref().map_or(1, |s| s.k),
            "boundaries": run.split.as_ref().map(|s| s.boundaries.clone()),
            "epochs": run.output.history.len(),
            "best_epoch": run.output.best_epoch,
            "pred_loss": last.map(|r| r.pred_loss),
            "match_loss": last.map(|r| r.match_loss),
        }),
    )
}

/// A loaded model with the preprocessing it was trained with.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub params: ModelParams,
    pub window: WindowSpec,
    pub time_col: String,
    pub ratios: [f64; 3],
    pub norm: NormStats,
    pub split: Option<PeriodSplit>,
}

impl ModelBundle {
    pub fn from_json(text: &str) -> Result<Self> {
        let (params, extra) = ModelParams::from_json_with(text)?;
        fn field<T: serde::de::DeserializeOwned>(extra: &Map<String, Value>, key: &str) -> Result<T> {
            let v = extra.get(key).cloned().ok_or_else(|| Error::Format(format!("model file lacks `{key}`")))?;
            serde_json::from_value(v).map_err(|e| Error::Format(format!("model field `{key}`: {e}")))
        }
        let window: WindowSpec = field(&extra, "window")?;
        if window.features.len() != params.p {
            return Err(Error::Format(format!("model has p = {} but {} feature names", params.p, window.features.len())));
        }
        Ok(ModelBundle {
            window,
            time_col: field(&extra, "time_col")?,
            ratios: field(&extra, "ratios")?,
            norm: field(&extra, "norm")?,
            split: field(&extra, "split")?,
            params,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Predictions on the original target scale, with the matching truth.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub task: Task,
    pub origins: Vec<usize>,
    /// `n x r` values or `n x c` class probabilities.
    pub values: Matrix,
    pub truth: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn header(&self) -> Vec<String> {
        let prefix = match self.task {
            Task::Regression(_) => "pred",
            Task::Classification(_) => "p",
        };
        std::iter::once("origin".to_string())
            .chain((0..self.values.cols()).map(|j| format!("{prefix}_{j}")))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(self.header()).map_err(csv_err)?;
        for (i, o) in self.origins.iter().enumerate() {
            let mut rec = vec![o.to_string()];
            rec.extend(self.values.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).expect("utf-8"))
    }

    pub fn truth_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        let width = self.truth.first().map_or(0, Vec::len);
        let header: Vec<String> = match self.task {
            Task::Classification(_) => vec!["origin".into(), "label".into()],
            Task::Regression(_) => std::iter::once("origin".to_string()).chain((0..width).map(|j| format!("true_{j}"))).collect(),
        };
        w.write_record(&header).map_err(csv_err)?;
        for (o, t) in self.origins.iter().zip(&self.truth) {
            let mut rec = vec![o.to_string()];
            rec.extend(t.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).expect("utf-8"))
    }
}

/// Predicts every segment of `part` of a raw CSV with a trained model.
pub fn run_predict(bundle: &ModelBundle, data: &Path, part: Part) -> Result<Predictions> {
    let spec = &bundle.window;
    let mut columns = spec.features.clone();
    if !columns.contains(&spec.target) {
        columns.push(spec.target.clone());
    }
    let raw = load_csv(data, &CsvSchema { time_col: bundle.time_col.clone(), columns })?;
    let table = apply_minmax(&fill_missing(&raw)?, &bundle.norm);
    let all = make_windows(&table, spec)?;
    let dataset = match part {
        Part::All => all,
        _ => {
            let [a, b, _] = split_sizes(all.len(), bundle.ratios)?;
            let range = match part {
                Part::Train => 0..a,
                Part::Valid => a..a + b,
                _ => a + b..all.len(),
            };
            all.slice(range)
        }
    };
    let refs: Vec<&Matrix> = dataset.segments.iter().collect();
    let mut values = Matrix::zeros(0, bundle.params.output_dim());
    for chunk in refs.chunks(512) {
        values = Matrix::vstack(&[&values, &predict(&bundle.params, chunk)?])?;
    }
    let task = bundle.params.task;
    let mut truth = dataset.targets.clone();
    if let Task::Regression(_) = task {
        let denorm = |v: f64| bundle.norm.denormalize(&spec.target, v).unwrap_or(v);
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                values.set(i, j, denorm(values.get(i, j)));
            }
        }
        for t in truth.iter_mut().flatten() {
            *t = denorm(*t);
        }
    }
    Ok(Predictions {
        task,
        origins: dataset.origins,
        values,
        truth,
    })
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let mut bundle = ModelBundle::load(&args.model)?;
    if let Some(path) = &args.config {
        let cfg = RunConfig::load(path)?;
        if cfg.data.features.len() != bundle.params.p {
            return Err(Error::Config(format!(
                "config has {} features but the model expects p = {}",
                cfg.data.features.len(),
                bundle.params.p
            )));
        }
        bundle.window = cfg.window_spec();
        bundle.time_col = cfg.data.time_col.clone();
    }
    let preds = run_predict(&bundle, &args.data, args.part)?;
    if let Some(path) = &args.truth_out {
        write_file(path, &preds.truth_csv()?)?;
    }
    let csv = preds.to_csv()?;
    match &args.out {
        Some(path) => write_file(path, &csv),
        None => Ok(out.write_all(csv.as_bytes())?),
    }
}

/// A headed numeric CSV: column names and rows of strings.
fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    Ok((header, rows))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("{}: unparseable number `{s}`", path.display())))
}

/// Metrics of a predictions CSV against a truth CSV as a flat JSON object.
///
/// Rows are aligned by the `origin` column. A `group` column in the truth
/// file adds information coefficients computed on the first output.
pub fn evaluate_files(predictions: &Path, truth: &Path, task: TaskArg) -> Result<Map<String, Value>> {
    let (ph, prows) = read_table(predictions)?;
    let (th, trows) = read_table(truth)?;
    let col = |h: &[String], name: &str, path: &Path| {
        h.iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("{} lacks column `{name}`", path.display())))
    };
    let (po, to) = (col(&ph, "origin", predictions)?, col(&th, "origin", truth)?);
    if prows.len() != trows.len() || prows.iter().zip(&trows).any(|(p, t)| p[po] != t[to]) {
        return Err(Error::Contract(format!(
            "predictions ({} rows) and truth ({} rows) are not aligned by origin",
            prows.len(),
            trows.len()
        )));
    }
    let group = th.iter().position(|c| c == "group");
    let value_cols = |h: &[String], skip: &[Option<usize>]| -> Vec<usize> {
        (0..h.len()).filter(|i| !skip.contains(&Some(*i))).collect()
    };
    let pcols = value_cols(&ph, &[Some(po)]);
    let tcols = value_cols(&th, &[Some(to), group]);
    let mut out = Map::new();
    match task {
        TaskArg::Regression => {
            if pcols.len() != tcols.len() {
                return Err(Error::Contract(format!("{} prediction columns for {} truth columns", pcols.len(), tcols.len())));
            }
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for (pr, tr) in prows.iter().zip(&trows) {
                for (&a, &b) in pcols.iter().zip(&tcols) {
                    p.push(parse_f64(&pr[a], predictions)?);
                    t.push(parse_f64(&tr[b], truth)?);
                }
            }
            let m = regression_metrics(&p, &t)?;
            out.insert("rmse".into(), json!(m.rmse));
            out.insert("mae".into(), json!(m.mae));
            if let Some(g) = group {
                let mut gp = GroupedPredictions::default();
                for (pr, tr) in prows.iter().zip(&trows) {
                    gp.push(tr[g].clone(), parse_f64(&pr[pcols[0]], predictions)?, parse_f64(&tr[tcols[0]], truth)?);
                }
                let ic = information_coefficients(&gp)?;
                out.insert("ic".into(), json!(ic.ic));
                out.insert("icir".into(), json!(ic.icir));
                out.insert("rank_ic".into(), json!(ic.rank_ic));
                out.insert("rank_icir".into(), json!(ic.rank_icir));
                out.insert("ic_skipped_groups".into(), json!(ic.skipped_groups));
            }
        }
        TaskArg::Classification => {
            if tcols.len() != 1 {
                return Err(Error::Contract("classification truth needs exactly one label column".into()));
            }
            let labels = trows
                .iter()
                .map(|r| {
                    let v = parse_f64(&r[tcols[0]], truth)?;
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::Format(format!("label {v} is not a class index")));
                    }
                    Ok(v as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            let c = pcols.len();
            let mut scores = Matrix::zeros(prows.len(), c);
            for (i, r) in prows.iter().enumerate() {
                for (j, &k) in pcols.iter().enumerate() {
                    scores.set(i, j, parse_f64(&r[k], predictions)?);
                }
            }
            let preds = if c == 1 {
                ClassPredictions::Labels(scores.data().iter().map(|&v| v as usize).collect())
            } else {
                ClassPredictions::Scores(scores)
            };
            let classes = if c == 1 { labels.iter().max().map_or(2, |m| m + 1).max(2) } else { c };
            let m = classification_metrics(&preds, &labels, classes)?;
            out.insert("acc".into(), json!(m.acc));
            out.insert("precision".into(), json!(m.precision));
            out.insert("recall".into(), json!(m.recall));
            out.insert("f1".into(), json!(m.f1));
            if let Some(auc) = m.auc {
                out.insert("auc".into(), json!(auc));
            }
        }
    }
    Ok(out)
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let m = evaluate_files(&args.predictions, &args.truth, args.task)?;
    emit(out, &Value::Object(m))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    if args.regimes < 2 {
        return Err(Error::Config(format!("--regimes must be >= 2, got {}", args.regimes)));
    }
    if !args.delta.is_finite() {
        return Err(Error::Config("--delta must be finite".into()));
    }
    let s = synth_tcs_generate(&SynthConfig {
        regimes: args.regimes,
        steps_per_regime: args.steps,
        p: args.p,
        seed: args.seed,
        delta: args.delta,
    })?;
    let mut csv = Vec::new();
    s.table().write_csv(&mut csv)?;
    write_file(&args.out, std::str::from_utf8(&csv).expect("utf-8"))?;
    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".truth.json");
        p.into()
    });
    write_file(&truth_path, &serde_json::to_string_pretty(&s).expect("truth serializes"))?;
    emit(
        out,
        &json!({"csv": args.out, "truth": truth_path, "rows": s.table().len(), "boundaries": s.boundaries}),
    )
}
