//! The `ppg-qpr` command line.
//!
//! Every subcommand reads and writes the file formats of the library
//! modules. File outputs are written atomically and get a `*.run.json`
//! config echo (or `run.json` inside an output directory) so a run can be
//! repeated exactly. Failures print one JSON object on stderr and exit 1.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cnn::{self, CnnError, Prediction, SlimCnn};
use crate::fsio::write_atomic;
use crate::ingest::{self, DatasetManifest, IngestError, Label, SegmentRecord, SplitMode};
use crate::metrics::{self, MetricsError};
use crate::qpr::{self, QprError, QprMetadata, SweepConfig};
use crate::sqi::{self, FeatureRow, SqiError, TrainOptions};
use crate::synth::{self, SynthConfig, SynthError};

#[derive(Debug, Parser, Serialize)]
#[command(name = "ppg-qpr", version, about = "PPG quality assessment with Schrödinger-spectrum images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cut a raw recording into fixed-length segments.
    Segment(SegmentArgs),
    /// Encode segments as QPR images.
    Qpr(QprArgs),
    /// Encode segments as STFT magnitude images.
    Stft(StftArgs),
    /// Compute skewness, kurtosis and perfusion per segment.
    Sqi(SqiArgs),
    /// Fit the logistic baseline on a feature CSV.
    TrainBaseline(TrainBaselineArgs),
    /// Score QPR images with a CNN bundle, or features with a baseline model.
    Infer(InferArgs),
    /// Confusion statistics and ROC for a prediction CSV.
    Eval(EvalArgs),
    /// Generate labeled synthetic segments.
    Synth(SynthArgs),
    /// Seeded train/test split of the good/bad pool.
    Split(SplitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    /// Headed CSV recording.
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the PPG samples.
    #[arg(long, default_value = "ppg")]
    pub column: String,
    /// Subject id used in segment ids; defaults to the input file stem.
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long, default_value_t = ingest::DEFAULT_FS)]
    pub fs: f64,
    /// Segment length in samples.
    #[arg(long, default_value_t = ingest::SEGMENT_LEN)]
    pub window: usize,
    /// Annotation CSV whose labels are attached to the segments.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Also write a manifest JSON here.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Segment CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct QprArgs {
    /// Segment CSV.
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value_t = ingest::DEFAULT_FS)]
    pub fs: f64,
    /// Number of components (image rows).
    #[arg(long = "n-h", default_value_t = qpr::DEFAULT_DEPTH)]
    pub n_h: usize,
    #[arg(long, default_value_t = qpr::DEFAULT_OMEGA_MIN)]
    pub omega_min: f64,
    #[arg(long, default_value_t = qpr::DEFAULT_OMEGA_MAX)]
    pub omega_max: f64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Skip segments without a valid decomposition instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,
    /// Directory for `<segment_id>.{qpri,pgm,json}` and `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StftArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value_t = ingest::DEFAULT_FS)]
    pub fs: f64,
    #[arg(long, default_value_t = qpr::DEFAULT_STFT_WINDOW)]
    pub window_len: usize,
    #[arg(long, default_value_t = qpr::DEFAULT_STFT_HOP)]
    pub hop: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SqiArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub skip_invalid: bool,
    /// Feature CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainBaselineArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    /// Directory of `.qpri` images (with --weights).
    #[arg(long, requires = "weights", conflicts_with_all = ["model", "features"])]
    pub images: Option<PathBuf>,
    /// QPRW weight bundle.
    #[arg(long, requires = "images")]
    pub weights: Option<PathBuf>,
    /// Baseline model JSON (with --features).
    #[arg(long, requires = "features")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = metrics::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Prediction CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Prediction CSV.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground truth: any CSV with `segment_id` and `label` columns, or a
    /// manifest `.json`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// ROC points CSV.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Metrics JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub n_good: usize,
    #[arg(long, default_value_t = 10)]
    pub n_bad: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ingest::DEFAULT_FS)]
    pub fs: f64,
    #[arg(long, default_value_t = 50.0)]
    pub bpm_min: f64,
    #[arg(long, default_value_t = 110.0)]
    pub bpm_max: f64,
    /// Segment CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// Share of the pool that goes to train.
    #[arg(long, default_value_t = ingest::DEFAULT_SPLIT_FRACTION)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: u64,
    /// Keep each subject on one side of the split.
    #[arg(long)]
    pub by_subject: bool,
    /// Directory for `train.csv` and `test.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { kind: &'static str, message: String },
    #[error("segment {segment_id}: {inner}")]
    AtSegment {
        segment_id: String,
        /// Underlying reason when `inner` is a consequence of it.
        cause: Option<&'static str>,
        inner: Box<CliError>,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Qpr(#[from] QprError),
    #[error(transparent)]
    Sqi(#[from] SqiError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Usage { kind, .. } => kind,
            Self::AtSegment { inner, .. } => inner.name(),
            Self::Ingest(e) => e.name(),
            Self::Qpr(e) => e.name(),
            Self::Sqi(e) => e.name(),
            Self::Cnn(e) => e.name(),
            Self::Metrics(e) => e.name(),
            Self::Synth(e) => e.name(),
            Self::Io { .. } => "Io",
            Self::Csv(_) => "Csv",
            Self::Json(_) => "Json",
        }
    }

    /// The machine-readable line printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.name(), "message": self.to_string() });
        if let Self::AtSegment { segment_id, cause, .. } = self {
            v["segment_id"] = json!(segment_id);
            if let Some(c) = cause {
                v["cause"] = json!(c);
            }
        }
        v
    }

    fn at(segment_id: &str, inner: impl Into<CliError>) -> Self {
        Self::AtSegment {
            segment_id: segment_id.to_string(),
            cause: None,
            inner: Box::new(inner.into()),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::Usage {
            kind: "MissingArgument",
            message: message.into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let kind = match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "UnknownSubcommand",
                ErrorKind::MissingRequiredArgument => "MissingArgument",
                _ => "InvalidArgument",
            };
            // First paragraph of clap's message, on one line.
            let text = e.to_string();
            let first = text.split("\n\n").next().unwrap_or_default();
            let message = first
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .trim_start_matches("error: ")
                .to_string();
            let err = CliError::Usage { kind, message };
            report(&err);
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            1
        }
    }
}

fn report(e: &CliError) {
    eprintln!("{}", e.to_json());
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Segment(a) => segment(cli, a),
        Command::Qpr(a) => qpr_cmd(cli, a),
        Command::Stft(a) => stft_cmd(cli, a),
        Command::Sqi(a) => sqi_cmd(cli, a),
        Command::TrainBaseline(a) => train_baseline(cli, a),
        Command::Infer(a) => infer(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Synth(a) => synth_cmd(cli, a),
        Command::Split(a) => split(cli, a),
    }
}

fn run_echo(cli: &Cli, extra: Value) -> Result<Vec<u8>, CliError> {
    let mut v = json!({
        "tool": "ppg-qpr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command,
    });
    if let Value::Object(m) = extra {
        for (k, val) in m {
            v[k] = val;
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// `<file>.run.json` next to an output file.
fn echo_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

fn load_sorted(path: &Path, fs: f64) -> Result<Vec<SegmentRecord>, CliError> {
    let mut records = ingest::load_segments_csv(path, fs)?;
    records.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(records)
}

fn segment(cli: &Cli, a: &SegmentArgs) -> Result<(), CliError> {
    if a.window < 2 {
        return Err(CliError::usage("--window must be at least 2"));
    }
    let raw = ingest::read_raw_column_file(&a.input, &a.column)?;
    let subject = match &a.subject {
        Some(s) => s.clone(),
        None => a
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "subject".into()),
    };
    let mut records = ingest::segment_recording(&subject, &raw, a.fs, a.window);
    let mut manifest = DatasetManifest::from_records(&records, &a.out.to_string_lossy())?;
    if let Some(path) = &a.annotations {
        let ann = ingest::load_annotations_csv(path)?;
        manifest = ingest::merge_annotations(&manifest, &ann)?;
        ingest::apply_labels(&mut records, &manifest);
    }
    ingest::save_segments_csv(&records, &a.out)?;
    if let Some(path) = &a.manifest {
        write_file(path, manifest.to_json()?.as_bytes())?;
    }
    let echo = run_echo(cli, json!({ "segments": records.len(), "samples_dropped": raw.len() % a.window }))?;
    write_file(&echo_path(&a.out), &echo)
}

/// Normalizes one segment and encodes it; a flat segment has no bound
/// states to speak of, so it is reported as having no valid candidate.
fn encode_segment(rec: &SegmentRecord, cfg: &SweepConfig) -> Result<qpr::QprImage, CliError> {
    let signal = match ingest::normalize_amplitude(&rec.samples, rec.fs) {
        Ok(s) => s,
        Err(IngestError::ConstantSegment) => {
            return Err(CliError::AtSegment {
                segment_id: rec.segment_id.clone(),
                cause: Some("ConstantSegment"),
                inner: Box::new(QprError::NoValidCandidate { n_h: cfg.n_h }.into()),
            })
        }
        Err(e) => return Err(CliError::at(&rec.segment_id, e)),
    };
    qpr::quantum_pattern_recognition(&signal, cfg, &rec.segment_id)
        .map_err(|e| CliError::at(&rec.segment_id, e))
}

fn write_qpr_outputs(dir: &Path, img: &qpr::QprImage, cfg: &SweepConfig) -> Result<(), CliError> {
    let id = &img.segment_id;
    let qpri = dir.join(format!("{id}.qpri"));
    qpr::write_qpri_file(&qpri, &img.pixels).map_err(io_err(&qpri))?;
    let gray = qpr::to_grayscale(&img.pixels)?;
    let pgm = dir.join(format!("{id}.pgm"));
    qpr::write_pgm_file(&pgm, img.pixels.rows(), img.pixels.cols(), &gray).map_err(io_err(&pgm))?;
    let meta = QprMetadata {
        segment_id: id.clone(),
        h_selected: img.h_selected,
        recon_error: img.recon_error,
        omega_min: cfg.omega_min,
        omega_max: cfg.omega_max,
        n_points: cfg.n_points,
        n_h: cfg.n_h,
    };
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    write_file(&dir.join(format!("{id}.json")), &bytes)
}

fn is_skippable(e: &CliError) -> bool {
    matches!(
        e,
        CliError::AtSegment { inner, .. } if matches!(**inner, CliError::Qpr(QprError::NoValidCandidate { .. }))
    )
}

fn qpr_cmd(cli: &Cli, a: &QprArgs) -> Result<(), CliError> {
    let cfg = SweepConfig::new(a.omega_min, a.omega_max, a.n_h)?;
    let records = load_sorted(&a.segments, a.fs)?;
    create_dir(&a.out_dir)?;
    let results: Vec<Result<(), CliError>> = with_pool(a.jobs, || {
        records
            .par_iter()
            .map(|rec| {
                let img = encode_segment(rec, &cfg)?;
                write_qpr_outputs(&a.out_dir, &img, &cfg)
            })
            .collect()
    })?;

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(()) => entries.push(ingest::ManifestEntry {
                segment_id: rec.segment_id.clone(),
                source: rec.subject.clone(),
                start_index: rec.start_index,
                label: rec.label,
                data_path: format!("{}.qpri", rec.segment_id),
            }),
            Err(e) if a.skip_invalid && is_skippable(&e) => {
                report(&e);
                skipped.push(rec.segment_id.clone());
            }
            Err(e) => return Err(e),
        }
    }
    let manifest = DatasetManifest::new(entries)?;
    write_file(&a.out_dir.join("manifest.json"), manifest.to_json()?.as_bytes())?;
    let echo = run_echo(
        cli,
        json!({ "n_points": cfg.n_points, "images": manifest.entries.len(), "skipped": skipped }),
    )?;
    write_file(&a.out_dir.join("run.json"), &echo)
}

fn stft_cmd(cli: &Cli, a: &StftArgs) -> Result<(), CliError> {
    let records = load_sorted(&a.segments, a.fs)?;
    create_dir(&a.out_dir)?;
    let results: Vec<Result<(), CliError>> = with_pool(a.jobs, || {
        records
            .par_iter()
            .map(|rec| {
                let at = |e: CliError| CliError::at(&rec.segment_id, e);
                let signal = ingest::normalize_amplitude(&rec.samples, rec.fs).map_err(|e| at(e.into()))?;
                let img = qpr::stft_image(&signal, a.window_len, a.hop).map_err(|e| at(e.into()))?;
                let path = a.out_dir.join(format!("{}.qpri", rec.segment_id));
                qpr::write_qpri_file(&path, &img).map_err(io_err(&path))?;
                let gray = qpr::to_grayscale(&img).map_err(|e| at(e.into()))?;
                let pgm = a.out_dir.join(format!("{}.pgm", rec.segment_id));
                qpr::write_pgm_file(&pgm, img.rows(), img.cols(), &gray).map_err(io_err(&pgm))
            })
            .collect()
    })?;
    results.into_iter().collect::<Result<Vec<()>, _>>()?;
    let n_fft = qpr::StftConfig { window_len: a.window_len, hop: a.hop }.n_fft();
    let echo = run_echo(cli, json!({ "n_fft": n_fft, "images": records.len() }))?;
    write_file(&a.out_dir.join("run.json"), &echo)
}

fn sqi_cmd(cli: &Cli, a: &SqiArgs) -> Result<(), CliError> {
    let records = load_sorted(&a.segments, ingest::DEFAULT_FS)?;
    let mut rows = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for rec in &records {
        match sqi::sqi_features(&rec.segment_id, &rec.samples) {
            Ok(f) => rows.push(FeatureRow {
                segment_id: f.segment_id,
                skewness: f.skewness,
                kurtosis: f.kurtosis,
                perfusion: f.perfusion,
                label: rec.label,
            }),
            Err(e) if a.skip_invalid => {
                report(&CliError::at(&rec.segment_id, e));
                skipped.push(rec.segment_id.clone());
            }
            Err(e) => return Err(CliError::at(&rec.segment_id, e)),
        }
    }
    let mut buf = Vec::new();
    sqi::write_feature_csv(&mut buf, &rows)?;
    write_file(&a.out, &buf)?;
    write_file(&echo_path(&a.out), &run_echo(cli, json!({ "rows": rows.len(), "skipped": skipped }))?)
}

fn read_features(path: &Path) -> Result<Vec<FeatureRow>, CliError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(sqi::read_feature_csv(std::io::BufReader::new(file))?)
}

fn train_baseline(cli: &Cli, a: &TrainBaselineArgs) -> Result<(), CliError> {
    let rows: Vec<FeatureRow> = read_features(&a.features)?
        .into_iter()
        .filter(|r| r.label.in_pool())
        .collect();
    let x: Vec<Vec<f64>> = rows.iter().map(FeatureRow::values).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.label == Label::Good).collect();
    let opts = TrainOptions {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    };
    let (model, report) = sqi::train_linear_baseline(&x, &y, &opts)?;
    let mut json = model.to_json()?;
    json.push('\n');
    write_file(&a.out, json.as_bytes())?;
    let echo = run_echo(cli, json!({ "rows": rows.len(), "final_loss": report.final_loss }))?;
    write_file(&echo_path(&a.out), &echo)
}

fn qpri_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "qpri") {
            if let Some(stem) = path.file_stem() {
                out.push((stem.to_string_lossy().into_owned(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn infer(cli: &Cli, a: &InferArgs) -> Result<(), CliError> {
    let preds = match (&a.images, &a.weights, &a.model, &a.features) {
        (Some(images), Some(weights), None, None) => {
            let bundle = cnn::load_weights(weights).map_err(|e| match e {
                CnnError::Io(source) => io_err(weights)(source),
                e => e.into(),
            })?;
            let net = SlimCnn::from_bundle(&bundle)?;
            let files = qpri_files(images)?;
            let scored: Vec<Result<Prediction, CliError>> = with_pool(a.jobs, || {
                files
                    .par_iter()
                    .map(|(id, path)| {
                        let img = qpr::read_qpri_file(path).map_err(io_err(path))?;
                        let p = net.forward(&img).map_err(|e| CliError::at(id, e))?;
                        Ok(Prediction::new(id.clone(), p, a.threshold))
                    })
                    .collect()
            })?;
            scored.into_iter().collect::<Result<Vec<_>, _>>()?
        }
        (None, None, Some(model), Some(features)) => {
            let text = std::fs::read_to_string(model).map_err(io_err(model))?;
            let model = sqi::LinearModel::from_json(&text)?;
            let mut rows = read_features(features)?;
            rows.sort_by(|x, y| x.segment_id.cmp(&y.segment_id));
            rows.iter()
                .map(|r| Prediction::new(r.segment_id.clone(), sqi::predict_linear(&model, &r.values()), a.threshold))
                .collect()
        }
        _ => {
            return Err(CliError::usage(
                "infer needs either --images with --weights, or --model with --features",
            ))
        }
    };
    let mut buf = Vec::new();
    cnn::write_predictions(&mut buf, &preds)?;
    write_output(a.out.as_deref(), &buf)?;
    if let Some(out) = &a.out {
        write_file(&echo_path(out), &run_echo(cli, json!({ "rows": preds.len() }))?)?;
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct LabelRow {
    segment_id: String,
    label: Label,
}

/// Ground-truth labels by segment id from a manifest or any labeled CSV.
fn read_truth(path: &Path) -> Result<Vec<(String, Label)>, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let m = DatasetManifest::from_json(&text)?;
        return Ok(m.entries.into_iter().map(|e| (e.segment_id, e.label)).collect());
    }
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let row: LabelRow = rec?.deserialize(Some(&headers))?;
        out.push((row.segment_id, row.label));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    threshold: f64,
    n: u64,
    confusion: metrics::Confusion,
    #[serde(flatten)]
    stats: metrics::PartialSummary,
    auc: Option<f64>,
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<(), CliError> {
    let file = std::fs::File::open(&a.predictions).map_err(io_err(&a.predictions))?;
    let preds = cnn::read_predictions(std::io::BufReader::new(file))?;
    let truth: std::collections::HashMap<String, Label> = read_truth(&a.labels)?.into_iter().collect();

    let mut scores = Vec::new();
    let mut is_good = Vec::new();
    for p in &preds {
        let label = truth
            .get(&p.segment_id)
            .ok_or_else(|| IngestError::UnknownSegmentId(p.segment_id.clone()))?;
        if let Some(g) = label.is_good() {
            scores.push(p.probability);
            is_good.push(g);
        }
    }
    let called: Vec<bool> = scores.iter().map(|&s| s >= a.threshold).collect();
    let confusion = metrics::confusion(&called, &is_good)?;
    let roc = match metrics::roc_auc(&scores, &is_good) {
        Ok(r) => Some(r),
        Err(MetricsError::SingleClassInput) => None,
        Err(e) => return Err(e.into()),
    };
    let report = MetricsReport {
        threshold: a.threshold,
        n: confusion.total(),
        confusion,
        stats: confusion.partial_summary(),
        auc: roc.as_ref().map(|r| r.auc),
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    write_output(a.out.as_deref(), &bytes)?;
    if let (Some(path), Some(r)) = (&a.roc, &roc) {
        write_file(path, metrics::roc_csv(r).as_bytes())?;
    }
    if let Some(out) = &a.out {
        write_file(&echo_path(out), &run_echo(cli, json!({}))?)?;
    }
    Ok(())
}

fn synth_cmd(cli: &Cli, a: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_good: a.n_good,
        n_bad: a.n_bad,
        fs: a.fs,
        seed: a.seed,
        bpm_min: a.bpm_min,
        bpm_max: a.bpm_max,
        ..SynthConfig::default()
    };
    let records = synth::generate(&cfg)?;
    let mut buf = Vec::new();
    ingest::write_segments(&mut buf, &records)?;
    write_output(a.out.as_deref(), &buf)?;
    if let Some(out) = &a.out {
        write_file(&echo_path(out), &run_echo(cli, json!({ "artifact_mix": cfg.artifact_mix }))?)?;
    }
    Ok(())
}

fn split(cli: &Cli, a: &SplitArgs) -> Result<(), CliError> {
    let records = load_sorted(&a.segments, ingest::DEFAULT_FS)?;
    let mode = if a.by_subject {
        SplitMode::BySubject
    } else {
        SplitMode::Random
    };
    let (train, test) = ingest::split_pool(&records, a.fraction, a.seed, mode)?;
    create_dir(&a.out_dir)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    ingest::save_segments_csv(&pick(&train), &a.out_dir.join("train.csv"))?;
    ingest::save_segments_csv(&pick(&test), &a.out_dir.join("test.csv"))?;
    let echo = run_echo(cli, json!({ "train": train.len(), "test": test.len() }))?;
    write_file(&a.out_dir.join("run.json"), &echo)
}
