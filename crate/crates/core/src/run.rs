//! Reproducible runs: flat configuration, dataset generation, training,
//! prediction and the moving-partition evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextError, ContextSpec};
use crate::dataset::{
    dataset_stats, generate_synthetic, load_sequence, moving_partition, read_header, verify_partition, write_sequence,
    DatasetError, DatasetHeader, GeneratorProvenance, PartitionParams, PartitionRound, SyntheticConfig,
    UserPostSequence, HEADER_FORMAT_VERSION,
};
use crate::dtcn::{self, ContextSpecs, DtcnError, DtcnModel, ModelConfig, PreparedData, TrainConfig};
use crate::metrics::{evaluate_rounds, EvaluationReport, MetricsError, Predictor, RoundPredictions};
use crate::numerics::gradcheck::{primitive_checks, CheckOutcome, GradCheckConfig};
use crate::numerics::{Activation, NumericsError, RmspropConfig};
use crate::timebase::UtcOffset;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] DtcnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

impl From<ContextError> for RunError {
    fn from(e: ContextError) -> Self {
        RunError::Usage(e.to_string())
    }
}

impl From<NumericsError> for RunError {
    fn from(e: NumericsError) -> Self {
        RunError::Model(e.into())
    }
}

impl RunError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Data(_) | RunError::Io { .. } => 2,
            RunError::Model(e) => match e {
                DtcnError::Config(_) | DtcnError::Context(_) => 1,
                DtcnError::Dataset(_) | DtcnError::InputLength { .. } | DtcnError::IndexOutOfRange(_) => 2,
                DtcnError::Checkpoint(_) | DtcnError::Numerics(NumericsError::Checkpoint(_) | NumericsError::Io(_)) => 2,
                _ => 3,
            },
            RunError::Metrics(_) | RunError::GradCheck(_) => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Every knob of a run as one flat table. All fields have defaults; without
/// `data` the bundled synthetic generator supplies the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub contexts: Vec<String>,
    /// Draw contexts from the target user's own posts only.
    pub per_user_context: bool,
    pub seed: u64,
    pub output_dir: PathBuf,

    pub stream_hidden: [usize; 2],
    pub stream_output: usize,
    pub lstm_hidden: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    pub lambda_emb: f64,
    pub eps_clamp: f64,
    pub gate_activation: Activation,
    pub candidate_activation: Activation,
    pub share_lstm: bool,
    pub context_popularity: bool,

    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,

    pub parts: usize,
    pub window: usize,
    pub rounds: usize,
    /// Evaluate rounds on separate threads.
    pub parallel_rounds: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let p = PartitionParams::default();
        Self {
            data: None,
            contexts: vec!["NTC:1P:1D".into(), "PTC:1D:3W".into()],
            per_user_context: false,
            seed: 0,
            output_dir: PathBuf::from("dtcn-out"),
            stream_hidden: m.stream_hidden,
            stream_output: m.stream_output,
            lstm_hidden: m.lstm_hidden,
            head_hidden: m.head_hidden,
            dropout: m.dropout,
            lambda_emb: m.lambda_emb,
            eps_clamp: m.eps_clamp,
            gate_activation: m.gate_activation,
            candidate_activation: m.candidate_activation,
            share_lstm: m.share_lstm,
            context_popularity: m.context_popularity,
            epochs: t.epochs,
            batch_size: t.batch_size,
            patience: t.patience,
            clip_norm: t.clip_norm,
            learning_rate: t.optimizer.learning_rate,
            rho: t.optimizer.rho,
            epsilon: t.optimizer.epsilon,
            parts: p.parts,
            window: p.window,
            rounds: p.rounds,
            parallel_rounds: false,
        }
    }
}

impl RunConfig {
    /// Parses flat TOML, with `overrides` (`key=value`, value in TOML
    /// syntax, bare words taken as strings) applied on top.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, RunError> {
        Self::resolve(text, overrides, None)
    }

    /// Like [`from_toml`](Self::from_toml); `fallback_output_dir` is used
    /// when neither the text nor the overrides set `output_dir`.
    pub fn resolve(text: &str, overrides: &[String], fallback_output_dir: Option<&Path>) -> Result<Self, RunError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| RunError::Usage(format!("config: {e}")))?;
        if let Some(dir) = fallback_output_dir {
            table
                .entry("output_dir")
                .or_insert_with(|| toml::Value::String(dir.display().to_string()));
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| RunError::Usage(format!("override `{o}` is not key=value")))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.trim().to_string(), value);
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| RunError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.context_specs()?;
        self.model_config().validate()?;
        self.train_config().validate()?;
        let p = self.partition();
        if p.window < 2 || p.window > p.parts || p.rounds != p.parts - p.window + 1 {
            return Err(RunError::Usage(format!(
                "partition needs 2 <= window <= parts and rounds = parts - window + 1 (parts={}, window={}, rounds={})",
                p.parts, p.window, p.rounds
            )));
        }
        Ok(())
    }

    pub fn context_specs(&self) -> Result<ContextSpecs, RunError> {
        let list = self
            .contexts
            .iter()
            .map(|s| s.parse::<ContextSpec>().map(|c| c.with_per_user(self.per_user_context)))
            .collect::<Result<Vec<_>, _>>()?;
        ContextSpecs::from_list(&list).map_err(|e| RunError::Usage(e.to_string()))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            stream_hidden: self.stream_hidden,
            stream_output: self.stream_output,
            lstm_hidden: self.lstm_hidden,
            head_hidden: self.head_hidden,
            dropout: self.dropout,
            lambda_emb: self.lambda_emb,
            eps_clamp: self.eps_clamp,
            gate_activation: self.gate_activation,
            candidate_activation: self.candidate_activation,
            share_lstm: self.share_lstm,
            context_popularity: self.context_popularity,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            clip_norm: self.clip_norm,
            optimizer: RmspropConfig {
                learning_rate: self.learning_rate,
                rho: self.rho,
                epsilon: self.epsilon,
            },
            seed: self.seed,
        }
    }

    pub fn partition(&self) -> PartitionParams {
        PartitionParams {
            parts: self.parts,
            window: self.window,
            rounds: self.rounds,
        }
    }
}

/// Files written by a run; removed again unless the run commits.
#[derive(Debug, Default)]
pub struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates `dir` (and parents) if missing, remembering what was created.
    pub fn create_dir(&mut self, dir: &Path) -> Result<(), RunError> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        missing.reverse();
        self.dirs.extend(missing);
        Ok(())
    }

    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
        self.track(path);
        fs::write(path, contents).map_err(|e| RunError::io(path, e))
    }

    pub fn track(&mut self, path: &Path) {
        self.files.push(path.to_path_buf());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Dataset of a run: the configured file, or the bundled generator.
pub struct LoadedData {
    pub sequence: UserPostSequence,
    pub offset: UtcOffset,
    pub source: String,
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData, RunError> {
    match &cfg.data {
        Some(path) => {
            if !path.exists() {
                return Err(RunError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
            }
            let sequence = load_sequence(path)?;
            let offset = read_header(path)?.map_or(UtcOffset::UTC, |h| h.utc_offset);
            Ok(LoadedData {
                sequence,
                offset,
                source: path.display().to_string(),
            })
        }
        None => {
            let gen = SyntheticConfig::default();
            let data = generate_synthetic(&gen, cfg.seed)?;
            Ok(LoadedData {
                sequence: data.sequence,
                offset: gen.utc_offset,
                source: format!("synthetic generator, seed {}", cfg.seed),
            })
        }
    }
}

fn manifest(cfg: &RunConfig, command: &str, data: &LoadedData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# dtcn {} {command}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# data: {} ({} records)", data.source, data.sequence.len());
    out.push_str(&cfg.to_toml());
    out
}

/// Writes a synthetic dataset and its header. Returns the header.
pub fn run_gen(
    gen: &SyntheticConfig,
    seed: u64,
    out: &Path,
    guard: &mut OutputGuard,
) -> Result<DatasetHeader, RunError> {
    let data = generate_synthetic(gen, seed)?;
    if let Some(parent) = out.parent() {
        guard.create_dir(parent)?;
    }
    let header = DatasetHeader {
        format_version: HEADER_FORMAT_VERSION,
        visual_dim: gen.visual_dim,
        utc_offset: gen.utc_offset,
        record_count: data.sequence.len(),
        generator: Some(GeneratorProvenance {
            name: "dtcn-synthetic".into(),
            seed,
            config: gen.clone(),
        }),
    };
    guard.track(out);
    guard.track(&crate::dataset::header_path(out));
    write_sequence(out, &data.sequence, &header)?;
    let stats = dataset_stats(&data.sequence, gen.utc_offset)?;
    let summary = out.with_extension("summary.csv");
    guard.write(&summary, stats.summary_csv())?;
    let hist = out.with_extension("histograms.csv");
    guard.write(&hist, stats.histogram_csv())?;
    Ok(header)
}

/// Trains on every record and writes checkpoint, manifest and loss history.
pub fn run_train(cfg: &RunConfig, guard: &mut OutputGuard) -> Result<dtcn::TrainReport, RunError> {
    let data = load_data(cfg)?;
    let specs = cfg.context_specs()?;
    let prepared = PreparedData::new(&data.sequence, data.offset, specs);
    let mut model = DtcnModel::new(cfg.model_config(), data.sequence.visual_dim(), cfg.seed)?;
    let targets: Vec<usize> = (0..data.sequence.len()).collect();
    let report = dtcn::train(&mut model, &prepared, &targets, &cfg.train_config())?;

    let dir = &cfg.output_dir;
    guard.create_dir(dir)?;
    let mut ckpt = Vec::new();
    model.write_checkpoint(&mut ckpt)?;
    guard.write(&dir.join(CHECKPOINT_FILE), ckpt)?;
    guard.write(&dir.join(MANIFEST_FILE), manifest(cfg, "train", &data))?;
    let mut hist = String::from("epoch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        let _ = writeln!(hist, "{},{l:.9}", i + 1);
    }
    guard.write(&dir.join("loss_history.csv"), hist)?;
    Ok(report)
}

/// Loads a trained model directory and writes `predictions.csv`
/// (`post_id,predicted,truth`) for every record of the configured data.
pub fn run_predict(
    model_dir: &Path,
    data_override: Option<PathBuf>,
    out_dir: &Path,
    guard: &mut OutputGuard,
) -> Result<(RunConfig, usize), RunError> {
    let mut cfg = RunConfig::load(&model_dir.join(MANIFEST_FILE), &[])?;
    if data_override.is_some() {
        cfg.data = data_override;
    }
    let data = load_data(&cfg)?;
    let ckpt_path = model_dir.join(CHECKPOINT_FILE);
    let file = fs::File::open(&ckpt_path).map_err(|e| RunError::io(&ckpt_path, e))?;
    let model = DtcnModel::read_checkpoint(cfg.model_config(), data.sequence.visual_dim(), std::io::BufReader::new(file))?;
    let prepared = PreparedData::new(&data.sequence, data.offset, cfg.context_specs()?);
    let targets: Vec<usize> = (0..data.sequence.len()).collect();
    let preds = dtcn::predict(&model, &prepared, &targets)?;
    let mut csv = String::from("post_id,predicted,truth\n");
    for p in &preds {
        let _ = writeln!(csv, "{},{:.9},{:.9}", p.post_id, p.predicted, p.truth);
    }
    guard.create_dir(out_dir)?;
    guard.write(&out_dir.join("predictions.csv"), csv)?;
    Ok((cfg, preds.len()))
}

/// Trains a fresh model per round and predicts its test part.
pub struct DtcnPredictor<'a> {
    pub data: &'a PreparedData<'a>,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Predictor for DtcnPredictor<'_> {
    type Error = RunError;

    fn predict_round(&mut self, round: &PartitionRound) -> Result<RoundPredictions, RunError> {
        predict_round(self.data, &self.model, &self.train, round)
    }
}

fn predict_round(
    data: &PreparedData<'_>,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    round: &PartitionRound,
) -> Result<RoundPredictions, RunError> {
    let mut model = DtcnModel::new(model_cfg.clone(), data.seq.visual_dim(), train_cfg.seed)?;
    let train: Vec<usize> = round.train.clone().collect();
    let test: Vec<usize> = round.test.clone().collect();
    let report = dtcn::train(&mut model, data, &train, train_cfg)?;
    log::info!(
        "round {}: {} epochs, final train loss {:.6}",
        round.round_index,
        report.loss_history.len(),
        report.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    let pred = model.predict_indices(data, &test)?;
    let truth = test.iter().map(|&i| data.popularity(i)).collect();
    Ok(RoundPredictions { truth, pred })
}

/// Rounds evaluated on separate threads; results keep round order.
struct Precomputed(Vec<RoundPredictions>);

impl Predictor for Precomputed {
    type Error = RunError;

    fn predict_round(&mut self, round: &PartitionRound) -> Result<RoundPredictions, RunError> {
        Ok(std::mem::take(&mut self.0[round.round_index - 1]))
    }
}

/// Full moving-partition protocol on an already loaded sequence.
pub fn evaluate(cfg: &RunConfig, seq: &UserPostSequence, offset: UtcOffset) -> Result<EvaluationReport, RunError> {
    let params = cfg.partition();
    let rounds = moving_partition(seq, params)?;
    verify_partition(seq, &rounds, params.rounds)?;
    let specs = cfg.context_specs()?;
    let data = PreparedData::new(seq, offset, specs);
    let (model, train) = (cfg.model_config(), cfg.train_config());
    if cfg.parallel_rounds {
        let results: Vec<Result<RoundPredictions, RunError>> = std::thread::scope(|s| {
            let handles: Vec<_> = rounds
                .iter()
                .map(|r| {
                    let (data, model, train) = (&data, &model, &train);
                    s.spawn(move || predict_round(data, model, train, r))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("round thread panicked")).collect()
        });
        let preds = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        return evaluate_rounds(&rounds, &mut Precomputed(preds));
    }
    evaluate_rounds(&rounds, &mut DtcnPredictor {
        data: &data,
        model,
        train,
    })
}

/// Runs the protocol and writes `report.txt`, `report.csv` and the manifest.
pub fn run_eval(cfg: &RunConfig, guard: &mut OutputGuard) -> Result<EvaluationReport, RunError> {
    let data = load_data(cfg)?;
    let report = evaluate(cfg, &data.sequence, data.offset)?;
    let dir = &cfg.output_dir;
    guard.create_dir(dir)?;
    guard.write(&dir.join("report.txt"), report.to_text())?;
    guard.write(&dir.join("report.csv"), report.to_csv())?;
    guard.write(&dir.join(MANIFEST_FILE), manifest(cfg, "eval", &data))?;
    Ok(report)
}

/// Primitive checks and micro-model checks over `seeds` seeds.
pub fn run_gradcheck(
    seeds: u64,
    primitives: GradCheckConfig,
    model: GradCheckConfig,
) -> Result<Vec<CheckOutcome>, RunError> {
    let mut out = Vec::new();
    for seed in 0..seeds {
        out.extend(primitive_checks(seed, primitives)?);
        for gate in [Activation::Sigmoid, Activation::HardSigmoid] {
            out.push(dtcn::micro::micro_model_check(seed, gate, model)?);
        }
    }
    Ok(out)
}
