use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hartl_core::trainers::{RunRecord, SelectionSet};
use serde::{Deserialize, Serialize};

use crate::run::{INCOMPLETE_MARKER, RECORD_FILE};
use crate::HarnessError;

/// A persisted run record and where it came from.
#[derive(Debug, Clone)]
pub struct RunRef {
    pub id: String,
    pub path: PathBuf,
    pub record: RunRecord,
}

/// Load a run directory or a record file.
pub fn load_run(path: &Path) -> Result<RunRef, HarnessError> {
    let (file, id) = if path.is_dir() {
        if path.join(INCOMPLETE_MARKER).exists() {
            return Err(HarnessError::Incomplete(path.display().to_string()));
        }
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        (path.join(RECORD_FILE), id)
    } else {
        let id = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        (path.to_path_buf(), id)
    };
    let text = std::fs::read_to_string(&file).map_err(|e| HarnessError::io(&file, e))?;
    Ok(RunRef { id, path: path.to_path_buf(), record: RunRecord::from_jsonl(&text)? })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    pub config_hash: String,
    /// Maximum target-test F1 over the evaluation points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highest_target_f1: Option<f64>,
    /// Target-test F1 of the checkpoint chosen on the selection set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_target_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_set: Option<SelectionSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn from_run(label: String, run: &RunRef) -> Self {
        let r = &run.record;
        ComparisonRow {
            label,
            method: r.header.method.clone(),
            run: Some(run.id.clone()),
            config_hash: r.header.config_hash.clone(),
            highest_target_f1: Some(r.max_target_f1()),
            selected_target_f1: r.best_row().map(|b| b.target_test_f1),
            selection_set: Some(r.header.selection_set),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_hash: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

fn method_label(r: &RunRecord) -> String {
    match r.header.params.get("schedule").and_then(|s| s.get("kind")).and_then(|k| k.as_str()) {
        Some(kind) => format!("{} ({kind})", r.header.method),
        None => r.header.method.clone(),
    }
}

/// One row per run. Every run must come from the same split.
pub fn compare(runs: &[RunRef]) -> Result<ComparisonTable, HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::Usage("nothing to compare".into()));
    }
    let split = runs[0].record.header.split_hash.clone();
    if let Some(other) = runs.iter().find(|r| r.record.header.split_hash != split) {
        return Err(HarnessError::MixedSplits(format!(
            "{} uses {:?} but {} uses {:?}",
            runs[0].id, split, other.id, other.record.header.split_hash
        )));
    }
    Ok(ComparisonTable {
        split_hash: split,
        rows: runs.iter().map(|r| ComparisonRow::from_run(method_label(&r.record), r)).collect(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn to_text(&self) -> String {
        let header = ["Method", "Highest F1", "Selected F1", "Selected on", "Config", "Run"];
        let rows: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    cell(r.highest_target_f1),
                    cell(r.selected_target_f1),
                    r.selection_set.map_or("-".into(), |s| match s {
                        SelectionSet::SourceVal => "source_val".into(),
                        SelectionSet::TuningHoldout => "tuning_holdout".into(),
                    }),
                    r.config_hash.chars().take(12).collect(),
                    match (&r.run, &r.error) {
                        (_, Some(e)) => format!("FAILED: {e}"),
                        (Some(id), None) => id.clone(),
                        (None, None) => "-".into(),
                    },
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        line(&mut out, &widths.map(|w| "-".repeat(w)).iter().map(String::as_str).collect::<Vec<_>>());
        for row in &rows {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}
