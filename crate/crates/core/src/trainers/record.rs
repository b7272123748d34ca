use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};

/// Which windows drive model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSet {
    SourceVal,
    /// Held-out part of the labeled target tuning set.
    TuningHoldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunHeader {
    pub method: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_hash: Option<String>,
    pub model_spec_hash: String,
    pub train_config: TrainConfig,
    /// Method-specific parameters.
    #[serde(default)]
    pub params: serde_json::Value,
    pub selection_set: SelectionSet,
}

/// Metrics at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRow {
    pub iteration: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_val_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_val_accuracy: Option<f64>,
    pub target_test_f1: f64,
    pub target_test_accuracy: f64,
    pub selection_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestCheckpoint {
    pub iteration: usize,
    pub selection_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum RecordLine {
    Header(RunHeader),
    Row(RunRow),
    Best(BestCheckpoint),
}

/// Per-iteration trace of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub rows: Vec<RunRow>,
    pub best: BestCheckpoint,
}

impl RunRecord {
    /// Highest target-test F1 over all evaluation points.
    pub fn max_target_f1(&self) -> f64 {
        self.rows.iter().map(|r| r.target_test_f1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn best_row(&self) -> Option<&RunRow> {
        self.rows.iter().find(|r| r.iteration == self.best.iteration)
    }

    pub fn last_row(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    pub fn lambda_trace(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.lambda).collect()
    }

    /// One header line, one line per row, one best-checkpoint line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: RecordLine| {
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        };
        push(RecordLine::Header(self.header.clone()));
        for row in &self.rows {
            push(RecordLine::Row(row.clone()));
        }
        push(RecordLine::Best(self.best.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TrainError> {
        let bad = |line: usize, m: String| TrainError::Record(format!("line {line}: {m}"));
        let mut header = None;
        let mut rows: Vec<RunRow> = Vec::new();
        let mut best = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let n = i + 1;
            if best.is_some() {
                return Err(bad(n, "content after the best-checkpoint line".into()));
            }
            match serde_json::from_str::<RecordLine>(line).map_err(|e| bad(n, e.to_string()))? {
                RecordLine::Header(h) if header.is_none() && rows.is_empty() => header = Some(h),
                RecordLine::Header(_) => return Err(bad(n, "unexpected header".into())),
                _ if header.is_none() => return Err(bad(n, "missing header".into())),
                RecordLine::Row(r) => {
                    if rows.last().is_some_and(|p| p.iteration >= r.iteration) {
                        return Err(bad(n, "iterations must strictly increase".into()));
                    }
                    rows.push(r);
                }
                RecordLine::Best(b) => best = Some(b),
            }
        }
        let header = header.ok_or_else(|| TrainError::Record("empty record".into()))?;
        let best = best.ok_or_else(|| TrainError::Record("missing best-checkpoint line".into()))?;
        if !rows.iter().any(|r| r.iteration == best.iteration) {
            return Err(TrainError::Record(format!(
                "best checkpoint iteration {} has no row",
                best.iteration
            )));
        }
        Ok(RunRecord { header, rows, best })
    }
}
