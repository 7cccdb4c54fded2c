//! Post records, dataset files, synthetic streams and the moving-partition
//! protocol.

mod io;
mod partition;
mod record;
mod stats;
mod synthetic;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use io::{
    header_path, load_sequence, read_header, write_sequence, DatasetHeader, GeneratorProvenance,
    HEADER_FORMAT_VERSION,
};
pub use partition::{moving_partition, part_sizes, verify_partition, PartitionParams, PartitionRound};
pub use record::{
    normalize_popularity, Popularity, PostRecord, UserPostSequence, DEFAULT_VISUAL_DIM, USER_FEATURE_DIM,
};
pub use stats::{dataset_stats, DatasetStats};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {reason}")]
    Malformed {
        line: usize,
        field: String,
        reason: String,
    },
    #[error("record `{post_id}`: {reason}")]
    InvalidRecord { post_id: String, reason: String },
    #[error("{path}: bad header: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("days since post must be positive, got {0}")]
    NonPositiveDays(f64),
    #[error("partition: {0}")]
    Partition(String),
    #[error("generator config: {0}")]
    Config(String),
    #[error("empty sequence")]
    Empty,
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
