//! Recording ingestion, cleaning, segmentation and domain splits.
//!
//! The flow is `load_recording` → `clean_and_normalize` (or the split-level
//! variant that fits statistics on the source training runs) → `segment`
//! → `build_split`.

mod cache;
mod manifest;
mod preprocess;
mod recording;
mod split;
mod window;

pub use cache::{decode_window_set, encode_window_set, read_window_cache, write_window_cache, CacheSidecar};
pub use manifest::{ChannelRange, ChannelSpec, Delimiter, LabelEntry, LabelMap, Manifest};
pub use preprocess::{clean_and_normalize, interpolate, ChannelStats, CleanReport};
pub use recording::{load_recording, parse_recording, RunId, SensorRecording};
pub use split::{build_split, build_tuning_set, DomainSplit, SplitSpec, UnlabeledWindows};
pub use window::{segment, window_count, Domain, Window, WindowBatches, WindowOrigin, WindowSet};

use thiserror::Error;

/// Class id reserved for the null (no gesture) label.
pub const NULL_CLASS: u16 = 0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown label code {code}")]
    UnknownLabel { line: usize, code: i64 },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid label map: {0}")]
    LabelMap(String),
    #[error("recording invariant violated: {0}")]
    Recording(String),
    #[error("missing runs: {}", format_missing(.0))]
    MissingRuns(Vec<(u32, RunId)>),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("window cache: {0}")]
    Cache(String),
}

fn format_missing(pairs: &[(u32, RunId)]) -> String {
    pairs
        .iter()
        .map(|(s, r)| format!("S{s}-{r}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, DataError>;
