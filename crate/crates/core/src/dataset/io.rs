//! Line-delimited JSON dataset files and their sidecar headers.
//!
//! Each non-blank line of a dataset file is one JSON object with exactly the
//! fields `user_id`, `post_id`, `timestamp`, `user_features`,
//! `visual_features`, `view_count`, `days_since_post`. The sidecar lives at
//! `<dataset>.header.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::record::{PostRecord, UserPostSequence, DEFAULT_VISUAL_DIM};
use super::synthetic::SyntheticConfig;
use super::DatasetError;
use crate::timebase::{Timestamp, UtcOffset};

pub const HEADER_FORMAT_VERSION: u32 = 1;

const FIELDS: [&str; 7] = [
    "user_id",
    "post_id",
    "timestamp",
    "user_features",
    "visual_features",
    "view_count",
    "days_since_post",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub visual_dim: usize,
    pub utc_offset: UtcOffset,
    pub record_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProvenance {
    pub name: String,
    pub seed: u64,
    pub config: SyntheticConfig,
}

pub fn header_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".header.json");
    PathBuf::from(s)
}

pub fn read_header(dataset: &Path) -> Result<Option<DatasetHeader>, DatasetError> {
    let path = header_path(dataset);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let header: DatasetHeader = serde_json::from_str(&text).map_err(|e| DatasetError::Header {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if header.format_version != HEADER_FORMAT_VERSION {
        return Err(DatasetError::Header {
            path,
            reason: format!("unsupported format version {}", header.format_version),
        });
    }
    Ok(Some(header))
}

/// Loads a dataset file. The visual dimension comes from the sidecar header
/// when present, otherwise from the first record.
pub fn load_sequence(path: &Path) -> Result<UserPostSequence, DatasetError> {
    let header = read_header(path)?;
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut visual_dim = header.as_ref().map(|h| h.visual_dim);
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, i + 1)?;
        let dim = *visual_dim.get_or_insert(record.visual_features.len());
        record.validate(dim)?;
        records.push(record);
    }
    UserPostSequence::new(records, visual_dim.unwrap_or(DEFAULT_VISUAL_DIM))
}

fn parse_line(line: &str, line_no: usize) -> Result<PostRecord, DatasetError> {
    let malformed = |field: &str, reason: String| DatasetError::Malformed {
        line: line_no,
        field: field.to_string(),
        reason,
    };
    let value: Value = serde_json::from_str(line).map_err(|e| malformed("<record>", e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed("<record>", "expected a JSON object".into()));
    };
    if let Some(extra) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(malformed(extra, "unknown field".into()));
    }
    let get = |field: &str| -> Result<&Value, DatasetError> {
        obj.get(field).ok_or_else(|| malformed(field, "missing".into()))
    };
    let string = |field: &str| -> Result<String, DatasetError> {
        get(field)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| malformed(field, "expected a string".into()))
    };
    let reals = |field: &str| -> Result<Vec<f64>, DatasetError> {
        get(field)?
            .as_array()
            .ok_or_else(|| malformed(field, "expected an array of numbers".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| malformed(field, "expected an array of numbers".into())))
            .collect()
    };
    let timestamp = get("timestamp")?
        .as_i64()
        .ok_or_else(|| malformed("timestamp", "expected integer epoch seconds".into()))
        .and_then(|s| Timestamp::new(s).map_err(|e| malformed("timestamp", e.to_string())))?;
    let view_count = get("view_count")?
        .as_u64()
        .ok_or_else(|| malformed("view_count", "expected a non-negative integer".into()))?;
    let days_since_post = get("days_since_post")?
        .as_f64()
        .ok_or_else(|| malformed("days_since_post", "expected a number".into()))?;
    Ok(PostRecord {
        user_id: string("user_id")?,
        post_id: string("post_id")?,
        timestamp,
        user_features: reals("user_features")?,
        visual_features: reals("visual_features")?,
        view_count,
        days_since_post,
    })
}

fn record_to_json(r: &PostRecord) -> Value {
    let mut obj = Map::new();
    obj.insert("user_id".into(), Value::from(r.user_id.clone()));
    obj.insert("post_id".into(), Value::from(r.post_id.clone()));
    obj.insert("timestamp".into(), Value::from(r.timestamp.epoch_seconds()));
    obj.insert("user_features".into(), Value::from(r.user_features.clone()));
    obj.insert("visual_features".into(), Value::from(r.visual_features.clone()));
    obj.insert("view_count".into(), Value::from(r.view_count));
    obj.insert("days_since_post".into(), Value::from(r.days_since_post));
    Value::Object(obj)
}

/// Writes the dataset and its sidecar header.
pub fn write_sequence(
    path: &Path,
    seq: &UserPostSequence,
    header: &DatasetHeader,
) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in seq.records() {
        let line = serde_json::to_string(&record_to_json(r)).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))?;

    let hpath = header_path(path);
    let text = serde_json::to_string_pretty(header).expect("headers serialize");
    fs::write(&hpath, text + "\n").map_err(|e| DatasetError::io(&hpath, e))
}
