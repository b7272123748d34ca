use serde::Deserialize;
use toml::Value;

use crate::compare::{ComparisonRow, ComparisonTable, RunRef};
use crate::config::ExperimentConfig;
use crate::run::run;
use crate::HarnessError;

/// Cartesian grid over dotted config paths, e.g.
///
/// ```toml
/// [grid]
/// "method.frozen" = [["conv1"], ["conv1", "conv2"]]
/// "train.seed" = [1, 2]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axes: Vec<(String, Vec<Value>)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    grid: toml::Table,
}

impl SweepGrid {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let file: GridFile = toml::from_str(text).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        let mut axes = Vec::new();
        for (key, v) in file.grid {
            match v {
                Value::Array(values) => axes.push((key, values)),
                other => {
                    return Err(HarnessError::Validation(vec![format!(
                        "grid entry {key:?} must be an array of values, got {other}"
                    )]))
                }
            }
        }
        Ok(SweepGrid { axes })
    }

    /// Every combination, first axis varying slowest.
    pub fn points(&self) -> Vec<Vec<(&str, &Value)>> {
        let mut points: Vec<Vec<(&str, &Value)>> = vec![Vec::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut p = p.clone();
                        p.push((key.as_str(), v));
                        p
                    })
                })
                .collect();
        }
        points
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = root;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let table = cur.as_table_mut().ok_or_else(|| format!("{path}: {key:?} is not inside a table"))?;
        if keys.peek().is_none() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        cur = table.entry(key.to_string()).or_insert_with(|| Value::Table(Default::default()));
    }
    Err(format!("empty grid path {path:?}"))
}

fn point_config(base: &ExperimentConfig, point: &[(&str, &Value)], index: usize) -> Result<ExperimentConfig, HarnessError> {
    let mut value = Value::try_from(base).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
    for (path, v) in point {
        set_path(&mut value, path, (*v).clone()).map_err(|e| HarnessError::Validation(vec![e]))?;
    }
    let mut cfg: ExperimentConfig =
        value.try_into().map_err(|e: toml::de::Error| HarnessError::Validation(vec![e.to_string()]))?;
    cfg.name = format!("{}-{index}", base.name);
    cfg.validate()?;
    Ok(cfg)
}

fn label(point: &[(&str, &Value)]) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Run every grid point. A failing point becomes an error row; the grid
/// itself must be non-empty and name fields that exist.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<ComparisonTable, HarnessError> {
    if grid.axes.is_empty() || grid.axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(HarnessError::Validation(vec!["sweep grid is empty".into()]));
    }
    // Every axis must be settable on its own before anything runs.
    for (key, values) in &grid.axes {
        point_config(base, &[(key.as_str(), &values[0])], 0)
            .map_err(|e| HarnessError::Validation(vec![format!("grid parameter {key:?}: {e}")]))?;
    }
    let mut rows = Vec::new();
    let mut split_hash = None;
    for (i, point) in grid.points().iter().enumerate() {
        let label = label(point);
        log::info!("sweep point {}: {label}", i + 1);
        let outcome = point_config(base, point, i + 1).and_then(|cfg| run(&cfg).map(|out| (cfg, out)));
        match outcome {
            Ok((cfg, out)) => match out.record {
                Some(record) => {
                    split_hash = split_hash.or(record.header.split_hash.clone());
                    rows.push(ComparisonRow::from_run(label, &RunRef { id: out.id, path: out.dir, record }));
                }
                None => rows.push(ComparisonRow {
                    label,
                    method: cfg.method.name().into(),
                    run: Some(out.id),
                    config_hash: cfg.hash(),
                    highest_target_f1: None,
                    selected_target_f1: None,
                    selection_set: None,
                    error: None,
                }),
            },
            Err(e) => {
                log::warn!("sweep point {label} failed: {e}");
                rows.push(ComparisonRow {
                    label,
                    method: base.method.name().into(),
                    run: None,
                    config_hash: String::new(),
                    highest_target_f1: None,
                    selected_target_f1: None,
                    selection_set: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    Ok(ComparisonTable { split_hash, rows })
}
