//! Recording ingestion: windowing, amplitude normalization, the segment
//! CSV, annotation merging and train/test splitting.
//!
//! Segment CSV header: `segment_id,subject,start_index,label,s0,...,s499`.
//! Annotation CSV header: `segment_id,label,annotator,timestamp`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scsa::Signal;

/// Samples per segment (5 s at 100 Hz, 4 s at 125 Hz).
pub const SEGMENT_LEN: usize = 500;
pub const DEFAULT_FS: f64 = 100.0;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;

const META_COLUMNS: [&str; 4] = ["segment_id", "subject", "start_index", "label"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: u64, label: String },
    #[error("line {line}: cannot parse {column} value {value:?}")]
    BadValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("duplicate segment id {0:?}")]
    DuplicateSegmentId(String),
    #[error("constant segment (max == min)")]
    ConstantSegment,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("annotation references unknown segment id {0:?}")]
    UnknownSegmentId(String),
    #[error("segment {segment_id:?} has conflicting labels {labels:?}")]
    ConflictingLabel {
        segment_id: String,
        labels: Vec<Label>,
    },
    #[error("split fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IngestError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Io(_) => "Io",
            Self::Csv(_) => "Csv",
            Self::MalformedRow { .. } => "MalformedRow",
            Self::UnknownLabel { .. } => "UnknownLabel",
            Self::BadValue { .. } => "BadValue",
            Self::BadHeader(_) => "BadHeader",
            Self::MissingColumn(_) => "MissingColumn",
            Self::DuplicateSegmentId(_) => "DuplicateSegmentId",
            Self::ConstantSegment => "ConstantSegment",
            Self::NonFiniteSample { .. } => "NonFiniteSample",
            Self::UnknownSegmentId(_) => "UnknownSegmentId",
            Self::ConflictingLabel { .. } => "ConflictingLabel",
            Self::InvalidFraction(_) => "InvalidFraction",
            Self::Json(_) => "Json",
        }
    }
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => IngestError::MalformedRow {
                line: pos.map_or(0, |p| p.line()),
                expected: expected_len as usize,
                found: len as usize,
            },
            other => IngestError::Csv(format!("{other:?}")),
        }
    }
}

/// Annotation vocabulary. Only `Good` and `Bad` enter the train/test pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Good,
    Bad,
    Uncategorized,
    NoRefBp,
    Unlabeled,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Good,
        Label::Bad,
        Label::Uncategorized,
        Label::NoRefBp,
        Label::Unlabeled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
            Label::Uncategorized => "uncategorized",
            Label::NoRefBp => "no_ref_bp",
            Label::Unlabeled => "unlabeled",
        }
    }

    /// Whether segments with this label may be used for training,
    /// inference or metrics.
    pub fn in_pool(self) -> bool {
        matches!(self, Label::Good | Label::Bad)
    }

    /// `Some(true)` for good, `Some(false)` for bad, `None` otherwise.
    pub fn is_good(self) -> Option<bool> {
        match self {
            Label::Good => Some(true),
            Label::Bad => Some(false),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// One fixed-length window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub subject: String,
    pub start_index: usize,
    pub samples: Vec<f64>,
    pub fs: f64,
    pub label: Label,
}

/// `{subject}_{index:05}`.
pub fn segment_id(subject: &str, index: usize) -> String {
    format!("{subject}_{index:05}")
}

/// Non-overlapping windows of `window` samples; the remainder is dropped.
pub fn window_signal(raw: &[f64], window: usize) -> Vec<(usize, &[f64])> {
    assert!(window >= 2, "window must be at least 2 samples");
    raw.chunks_exact(window)
        .enumerate()
        .map(|(i, w)| (i * window, w))
        .collect()
}

/// Min-max normalization onto `[0, 1]`.
pub fn normalize_amplitude(window: &[f64], fs: f64) -> Result<Signal, IngestError> {
    if let Some(index) = window.iter().position(|v| !v.is_finite()) {
        return Err(IngestError::NonFiniteSample { index });
    }
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(IngestError::ConstantSegment);
    }
    let range = hi - lo;
    let samples = window.iter().map(|v| (v - lo) / range).collect();
    Signal::new(samples, fs).map_err(|_| IngestError::ConstantSegment)
}

/// Windows a recording into unlabeled segment records.
pub fn segment_recording(
    subject: &str,
    raw: &[f64],
    fs: f64,
    window: usize,
) -> Vec<SegmentRecord> {
    window_signal(raw, window)
        .into_iter()
        .enumerate()
        .map(|(i, (start, w))| SegmentRecord {
            segment_id: segment_id(subject, i),
            subject: subject.to_string(),
            start_index: start,
            samples: w.to_vec(),
            fs,
            label: Label::Unlabeled,
        })
        .collect()
}

/// Reads one named numeric column from a headed CSV recording.
pub fn read_raw_column<R: Read>(reader: R, column: &str) -> Result<Vec<f64>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| IngestError::MissingColumn(column.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = rec.get(idx).unwrap_or("");
        out.push(parse_f64(field, line, column)?);
    }
    Ok(out)
}

pub fn read_raw_column_file(path: &Path, column: &str) -> Result<Vec<f64>, IngestError> {
    read_raw_column(std::fs::File::open(path)?, column)
}

fn parse_f64(s: &str, line: u64, column: &str) -> Result<f64, IngestError> {
    s.trim().parse::<f64>().map_err(|_| IngestError::BadValue {
        line,
        column: column.to_string(),
        value: s.to_string(),
    })
}

fn parse_label(s: &str, line: u64) -> Result<Label, IngestError> {
    s.parse().map_err(|label| IngestError::UnknownLabel { line, label })
}

/// Parses a segment CSV. `fs` is attached to every record since the file
/// does not carry it.
pub fn read_segments<R: Read>(reader: R, fs: f64) -> Result<Vec<SegmentRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let width = header.len();
    if width < META_COLUMNS.len() + 2 {
        return Err(IngestError::BadHeader(format!("only {width} columns")));
    }
    for (i, want) in META_COLUMNS.iter().enumerate() {
        if &header[i] != *want {
            return Err(IngestError::BadHeader(format!(
                "column {i} is {:?}, expected {want:?}",
                &header[i]
            )));
        }
    }
    for (k, h) in header.iter().skip(META_COLUMNS.len()).enumerate() {
        if h != format!("s{k}") {
            return Err(IngestError::BadHeader(format!(
                "sample column {k} is {h:?}"
            )));
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(IngestError::MalformedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        let segment_id = rec[0].to_string();
        if !seen.insert(segment_id.clone()) {
            return Err(IngestError::DuplicateSegmentId(segment_id));
        }
        let start_index = rec[2].parse().map_err(|_| IngestError::BadValue {
            line,
            column: "start_index".into(),
            value: rec[2].to_string(),
        })?;
        let label = parse_label(&rec[3], line)?;
        let samples = rec
            .iter()
            .skip(META_COLUMNS.len())
            .enumerate()
            .map(|(k, v)| parse_f64(v, line, &format!("s{k}")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(SegmentRecord {
            segment_id,
            subject: rec[1].to_string(),
            start_index,
            samples,
            fs,
            label,
        });
    }
    Ok(out)
}

/// Writes a segment CSV. Every record must have the same sample count.
pub fn write_segments<W: Write>(writer: W, records: &[SegmentRecord]) -> Result<(), IngestError> {
    let width = records.first().map_or(SEGMENT_LEN, |r| r.samples.len());
    let mut seen = HashSet::new();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..width).map(|k| format!("s{k}")));
    wtr.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        if r.samples.len() != width {
            return Err(IngestError::MalformedRow {
                line: i as u64 + 2,
                expected: width + META_COLUMNS.len(),
                found: r.samples.len() + META_COLUMNS.len(),
            });
        }
        if !seen.insert(r.segment_id.as_str()) {
            return Err(IngestError::DuplicateSegmentId(r.segment_id.clone()));
        }
        let mut row = Vec::with_capacity(width + META_COLUMNS.len());
        row.push(r.segment_id.clone());
        row.push(r.subject.clone());
        row.push(r.start_index.to_string());
        row.push(r.label.as_str().to_string());
        // Shortest round-trip decimal form: parsing gives back the same bits.
        row.extend(r.samples.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_segments_csv(path: &Path, fs: f64) -> Result<Vec<SegmentRecord>, IngestError> {
    read_segments(std::io::BufReader::new(std::fs::File::open(path)?), fs)
}

pub fn save_segments_csv(records: &[SegmentRecord], path: &Path) -> Result<(), IngestError> {
    let mut buf = Vec::new();
    write_segments(&mut buf, records)?;
    crate::fsio::write_atomic(path, &buf)?;
    Ok(())
}

/// One row of the annotation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub segment_id: String,
    pub label: Label,
    pub annotator: String,
    /// ISO-8601 UTC, kept verbatim.
    pub timestamp: String,
}

pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<Annotation>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let want = ["segment_id", "label", "annotator", "timestamp"];
    if header.len() != want.len() || header.iter().zip(want).any(|(a, b)| a != b) {
        return Err(IngestError::BadHeader(format!(
            "annotation header must be {}",
            want.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = parse_label(&rec[1], line)?;
        if label == Label::Unlabeled {
            return Err(IngestError::UnknownLabel {
                line,
                label: rec[1].to_string(),
            });
        }
        out.push(Annotation {
            segment_id: rec[0].to_string(),
            label,
            annotator: rec[2].to_string(),
            timestamp: rec[3].to_string(),
        });
    }
    Ok(out)
}

pub fn load_annotations_csv(path: &Path) -> Result<Vec<Annotation>, IngestError> {
    read_annotations(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub segment_id: String,
    pub source: String,
    pub start_index: usize,
    pub label: Label,
    pub data_path: String,
}

/// Index of all segments with their labels and per-label tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub counts: BTreeMap<Label, usize>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.segment_id.as_str()) {
                return Err(IngestError::DuplicateSegmentId(e.segment_id.clone()));
            }
        }
        let counts = tally(&entries);
        Ok(Self { entries, counts })
    }

    /// Manifest for records stored in the segment CSV at `data_path`.
    pub fn from_records(records: &[SegmentRecord], data_path: &str) -> Result<Self, IngestError> {
        Self::new(
            records
                .iter()
                .map(|r| ManifestEntry {
                    segment_id: r.segment_id.clone(),
                    source: r.subject.clone(),
                    start_index: r.start_index,
                    label: r.label,
                    data_path: data_path.to_string(),
                })
                .collect(),
        )
    }

    pub fn count(&self, label: Label) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    /// Entries eligible for training and evaluation (good or bad only).
    pub fn pool(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.label.in_pool())
    }

    /// `(good, bad)` counts of the pool.
    pub fn pool_counts(&self) -> (usize, usize) {
        (self.count(Label::Good), self.count(Label::Bad))
    }

    pub fn label_of(&self, segment_id: &str) -> Option<Label> {
        self.entries
            .iter()
            .find(|e| e.segment_id == segment_id)
            .map(|e| e.label)
    }

    pub fn to_json(&self) -> Result<String, IngestError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, IngestError> {
        let m: DatasetManifest = serde_json::from_str(s)?;
        Self::new(m.entries)
    }
}

fn tally(entries: &[ManifestEntry]) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for e in entries {
        *counts.entry(e.label).or_default() += 1;
    }
    counts
}

/// Attaches annotation labels by segment id.
///
/// Repeated rows with the same label are fine. Differing labels for one
/// segment (including a label that differs from one already present in the
/// manifest) are a `ConflictingLabel` error; nothing is overwritten.
pub fn merge_annotations(
    manifest: &DatasetManifest,
    annotations: &[Annotation],
) -> Result<DatasetManifest, IngestError> {
    let index: HashMap<&str, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.segment_id.as_str(), i))
        .collect();

    let mut by_id: BTreeMap<&str, BTreeSet<Label>> = BTreeMap::new();
    for a in annotations {
        if !index.contains_key(a.segment_id.as_str()) {
            return Err(IngestError::UnknownSegmentId(a.segment_id.clone()));
        }
        by_id.entry(a.segment_id.as_str()).or_default().insert(a.label);
    }

    let mut entries = manifest.entries.clone();
    for (id, labels) in by_id {
        let entry = &mut entries[index[id]];
        let mut all = labels.clone();
        if entry.label != Label::Unlabeled {
            all.insert(entry.label);
        }
        if all.len() > 1 {
            return Err(IngestError::ConflictingLabel {
                segment_id: id.to_string(),
                labels: all.into_iter().collect(),
            });
        }
        entry.label = *labels.iter().next().expect("non-empty");
    }
    DatasetManifest::new(entries)
}

/// Applies manifest labels to segment records (matched by id).
pub fn apply_labels(records: &mut [SegmentRecord], manifest: &DatasetManifest) {
    let labels: HashMap<&str, Label> = manifest
        .entries
        .iter()
        .map(|e| (e.segment_id.as_str(), e.label))
        .collect();
    for r in records {
        if let Some(&l) = labels.get(r.segment_id.as_str()) {
            r.label = l;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Uniform random split by segment.
    Random,
    /// Whole subjects go to one side; the train side takes subjects until
    /// it holds at least the requested fraction of segments.
    BySubject,
}

/// Indices into `records` for a train/test split of the good/bad pool.
///
/// Random mode puts `floor(fraction * n)` pool segments in train. Both
/// index lists come back in ascending order.
pub fn split_pool(
    records: &[SegmentRecord],
    fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Vec<usize>, Vec<usize>), IngestError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(IngestError::InvalidFraction(fraction));
    }
    let pool: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].label.in_pool())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = match mode {
        SplitMode::Random => {
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng);
            let n_train = (fraction * pool.len() as f64).floor() as usize;
            let test = shuffled.split_off(n_train);
            (shuffled, test)
        }
        SplitMode::BySubject => {
            let subjects: BTreeSet<&str> = pool.iter().map(|&i| records[i].subject.as_str()).collect();
            let mut subjects: Vec<&str> = subjects.into_iter().collect();
            subjects.shuffle(&mut rng);
            let target = fraction * pool.len() as f64;
            let mut chosen = HashSet::new();
            let mut taken = 0usize;
            for s in subjects {
                if taken as f64 >= target {
                    break;
                }
                taken += pool.iter().filter(|&&i| records[i].subject == s).count();
                chosen.insert(s);
            }
            pool.iter()
                .partition(|&&i| chosen.contains(records[i].subject.as_str()))
        }
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
