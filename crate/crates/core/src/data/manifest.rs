use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Whitespace,
    Comma,
    Tab,
    Semicolon,
}

impl Delimiter {
    pub(crate) fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
        }
    }
}

/// One named channel column (0-based column index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub column: usize,
    pub name: String,
}

/// Inclusive range of channel columns, named `{prefix}{column}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRange {
    pub first: usize,
    pub last: usize,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "col".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub code: i64,
    pub class_id: u16,
    pub name: String,
}

/// Raw dataset label codes mapped onto contiguous class ids `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap {
    pub entries: Vec<LabelEntry>,
}

impl LabelMap {
    pub fn new(entries: Vec<LabelEntry>) -> Result<Self> {
        let map = LabelMap { entries };
        map.validate()?;
        Ok(map)
    }

    /// The 17 sporadic gestures of the OPPORTUNITY `ML_Both_Arms` track.
    pub fn opportunity() -> Self {
        const GESTURES: [(i64, &str); 17] = [
            (406516, "Open Door 1"),
            (406517, "Open Door 2"),
            (404516, "Close Door 1"),
            (404517, "Close Door 2"),
            (406520, "Open Fridge"),
            (404520, "Close Fridge"),
            (406505, "Open Dishwasher"),
            (404505, "Close Dishwasher"),
            (406519, "Open Drawer 1"),
            (404519, "Close Drawer 1"),
            (406511, "Open Drawer 2"),
            (404511, "Close Drawer 2"),
            (406508, "Open Drawer 3"),
            (404508, "Close Drawer 3"),
            (408512, "Clean Table"),
            (407521, "Drink from Cup"),
            (405506, "Toggle Switch"),
        ];
        LabelMap {
            entries: GESTURES
                .iter()
                .enumerate()
                .map(|(i, (code, name))| LabelEntry {
                    code: *code,
                    class_id: i as u16 + 1,
                    name: name.to_string(),
                })
                .collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn class_of(&self, code: i64) -> Option<u16> {
        self.entries.iter().find(|e| e.code == code).map(|e| e.class_id)
    }

    pub fn name_of(&self, class_id: u16) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.class_id == class_id)
            .map(|e| e.name.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(DataError::LabelMap("no gesture classes".into()));
        }
        let codes: BTreeSet<i64> = self.entries.iter().map(|e| e.code).collect();
        if codes.len() != self.entries.len() {
            return Err(DataError::LabelMap("duplicate raw label code".into()));
        }
        let ids: BTreeSet<u16> = self.entries.iter().map(|e| e.class_id).collect();
        let expected: BTreeSet<u16> = (1..=self.entries.len() as u16).collect();
        if ids != expected {
            return Err(DataError::LabelMap(format!(
                "class ids must be exactly 1..={}",
                self.entries.len()
            )));
        }
        Ok(())
    }
}

/// Declarative description of a dataset file's column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(default)]
    pub delimiter: Delimiter,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    /// 0-based index of the gesture label column.
    pub label_column: usize,
    /// Raw codes that denote the null class.
    #[serde(default = "default_null_codes")]
    pub null_codes: Vec<i64>,
    /// Tokens (besides an empty cell) that mark a missing sensor value.
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub channel_ranges: Vec<ChannelRange>,
    pub labels: LabelMap,
}

fn default_sample_rate() -> f64 {
    30.0
}

fn default_null_codes() -> Vec<i64> {
    vec![0]
}

fn default_missing_tokens() -> Vec<String> {
    vec!["NaN".into(), "nan".into(), "NA".into()]
}

impl Manifest {
    /// The benchmark's 113 body-worn sensor columns of the OPPORTUNITY
    /// `.dat` files (quaternion and ambient/object sensor columns dropped)
    /// with the `ML_Both_Arms` gesture track as label.
    pub fn opportunity() -> Self {
        let ranges = [(1, 45), (50, 58), (63, 71), (76, 84), (89, 97), (102, 133)];
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            delimiter: Delimiter::Whitespace,
            sample_rate: 30.0,
            label_column: 249,
            null_codes: vec![0],
            missing_tokens: default_missing_tokens(),
            channels: Vec::new(),
            channel_ranges: ranges
                .iter()
                .map(|&(first, last)| ChannelRange {
                    first,
                    last,
                    prefix: "col".into(),
                })
                .collect(),
            labels: LabelMap::opportunity(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| DataError::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Channel columns in order, with names. Explicit channels come first,
    /// then the ranges.
    pub fn channel_columns(&self) -> Vec<(usize, String)> {
        let mut out: Vec<(usize, String)> = self
            .channels
            .iter()
            .map(|c| (c.column, c.name.clone()))
            .collect();
        for r in &self.channel_ranges {
            out.extend((r.first..=r.last).map(|c| (c, format!("{}{}", r.prefix, c))));
        }
        out
    }

    pub fn channel_count(&self) -> usize {
        self.channel_columns().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(DataError::Manifest(format!(
                "unsupported schema_version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(DataError::Manifest("sample_rate must be positive".into()));
        }
        for r in &self.channel_ranges {
            if r.first > r.last {
                return Err(DataError::Manifest(format!(
                    "channel range {}..={} is reversed",
                    r.first, r.last
                )));
            }
            if r.last - r.first > 1 << 16 {
                return Err(DataError::Manifest("channel range too large".into()));
            }
        }
        let cols = self.channel_columns();
        if cols.is_empty() {
            return Err(DataError::Manifest("no channel columns".into()));
        }
        let mut seen = BTreeMap::new();
        for (col, name) in &cols {
            if *col == self.label_column {
                return Err(DataError::Manifest(format!(
                    "column {col} is both a channel and the label column"
                )));
            }
            if seen.insert(*col, name).is_some() {
                return Err(DataError::Manifest(format!("column {col} listed twice")));
            }
        }
        for code in &self.null_codes {
            if self.labels.class_of(*code).is_some() {
                return Err(DataError::Manifest(format!(
                    "null code {code} is also a gesture code"
                )));
            }
        }
        self.labels.validate()
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub(crate) fn max_column(&self) -> usize {
        self.channel_columns()
            .iter()
            .map(|(c, _)| *c)
            .max()
            .unwrap_or(0)
            .max(self.label_column)
    }

    pub(crate) fn is_missing_token(&self, tok: &str) -> bool {
        tok.is_empty() || self.missing_tokens.iter().any(|m| m == tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opportunity_preset_has_113_channels_and_17_classes() {
        let m = Manifest::opportunity();
        m.validate().unwrap();
        assert_eq!(m.channel_count(), 113);
        assert_eq!(m.labels.n_classes(), 17);
        assert_eq!(m.labels.class_of(406516), Some(1));
        assert_eq!(m.labels.class_of(405506), Some(17));
        assert_eq!(m.labels.class_of(0), None);
    }

    #[test]
    fn toml_round_trip_preserves_hash() {
        let m = Manifest::opportunity();
        let back = Manifest::from_toml_str(&m.to_toml_string()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
schema_version = 1
label_column = 2
colour = "red"
channels = [{ column = 0, name = "a" }]
labels = [{ code = 1, class_id = 1, name = "x" }]
"#;
        assert!(matches!(
            Manifest::from_toml_str(text),
            Err(DataError::Manifest(_))
        ));
    }

    #[test]
    fn label_map_must_be_contiguous() {
        let bad = LabelMap::new(vec![
            LabelEntry { code: 10, class_id: 1, name: "a".into() },
            LabelEntry { code: 11, class_id: 3, name: "b".into() },
        ]);
        assert!(bad.is_err());
        let dup = LabelMap::new(vec![
            LabelEntry { code: 10, class_id: 1, name: "a".into() },
            LabelEntry { code: 10, class_id: 2, name: "b".into() },
        ]);
        assert!(dup.is_err());
    }

    #[test]
    fn label_column_cannot_be_a_channel() {
        let mut m = Manifest::opportunity();
        m.label_column = 5;
        assert!(m.validate().is_err());
    }
}
