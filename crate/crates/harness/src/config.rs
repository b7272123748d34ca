use std::path::{Path, PathBuf};

use hartl_core::data::{RunId, SplitSpec};
use hartl_core::model::{DannHeadSpec, LayerGroup};
use hartl_core::trainers::{LambdaSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the OPPORTUNITY dataset directory.
pub const DATASET_ROOT_ENV: &str = "OPPORTUNITY_ROOT";

/// One experiment: data, method, training settings and where results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Required by the network methods, absent for the classical ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub model: ModelConfig,
    pub method: MethodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitConfig {
    /// Subject 3 → subject 4 on the OPPORTUNITY files.
    PaperDefault {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset_root: Option<PathBuf>,
    },
    /// Generated recordings; the bundled fixture unless `shift` names a file.
    Synthetic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<PathBuf>,
    },
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dataset_root: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        manifest: Option<PathBuf>,
        split: SplitSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_maps")]
    pub feature_maps: usize,
    #[serde(default = "default_units")]
    pub recurrent_units: usize,
    #[serde(default)]
    pub dropout: f64,
}

fn default_maps() -> usize {
    64
}

fn default_units() -> usize {
    128
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_maps: default_maps(),
            recurrent_units: default_units(),
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Baseline,
    LossWeighted {
        #[serde(default = "default_kappa")]
        kappa: f64,
        /// Domain-classifier training iterations; defaults to the run's.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scorer_iterations: Option<usize>,
    },
    Dann {
        #[serde(default = "LambdaSchedule::adaptive")]
        schedule: LambdaSchedule,
        #[serde(default)]
        head: DannHeadSpec,
    },
    Finetune {
        /// Snapshot to transfer from; a baseline is trained first when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_checkpoint: Option<PathBuf>,
        #[serde(default = "default_tuning_runs")]
        tuning_runs: Vec<RunId>,
        #[serde(default = "default_frozen")]
        frozen: Vec<LayerGroup>,
        #[serde(default = "default_finetune_lr")]
        learning_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iterations: Option<usize>,
    },
    Kmm {
        source: PathBuf,
        target: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    Tradaboost {
        /// Labeled rows, label in the last column.
        source: PathBuf,
        target: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<PathBuf>,
        #[serde(default = "default_rounds")]
        rounds: usize,
    },
}

fn default_kappa() -> f64 {
    2.0
}

fn default_tuning_runs() -> Vec<RunId> {
    vec![RunId::Adl(3)]
}

fn default_frozen() -> Vec<LayerGroup> {
    vec![LayerGroup::Conv(1), LayerGroup::Conv(2)]
}

fn default_finetune_lr() -> f64 {
    5e-5
}

fn default_b() -> f64 {
    10.0
}

fn default_rounds() -> usize {
    20
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Baseline => "baseline",
            MethodConfig::LossWeighted { .. } => "loss_weighted",
            MethodConfig::Dann { .. } => "dann",
            MethodConfig::Finetune { .. } => "finetune",
            MethodConfig::Kmm { .. } => "kmm",
            MethodConfig::Tradaboost { .. } => "tradaboost",
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, MethodConfig::Kmm { .. } | MethodConfig::Tradaboost { .. })
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Validation(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Relative file references in a config file are relative to it.
    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.split {
            Some(SplitConfig::Synthetic { shift: Some(p) }) => fix(p),
            Some(SplitConfig::Custom { manifest: Some(p), .. }) => fix(p),
            _ => {}
        }
        match &mut self.method {
            MethodConfig::Finetune { source_checkpoint: Some(p), .. } => fix(p),
            MethodConfig::Kmm { source, target, .. } => {
                fix(source);
                fix(target);
            }
            MethodConfig::Tradaboost { source, target, test, .. } => {
                fix(source);
                fix(target);
                if let Some(t) = test {
                    fix(t);
                }
            }
            _ => {}
        }
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            errs.push(format!("name {:?} must be non-empty and use only [A-Za-z0-9-_.]", self.name));
        }
        let classical = self.method.is_classical();
        match (&self.split, classical) {
            (None, false) => errs.push(format!("method {} needs a [split]", self.method.name())),
            (Some(_), true) => errs.push(format!("method {} reads sample files and takes no [split]", self.method.name())),
            _ => {}
        }
        match (&self.train, classical) {
            (None, false) => errs.push(format!("method {} needs a [train] section", self.method.name())),
            (Some(t), false) => {
                if let Err(e) = t.validate() {
                    errs.push(e.to_string());
                }
            }
            (Some(_), true) => errs.push(format!("method {} takes no [train] section", self.method.name())),
            (None, true) => {}
        }
        if let Some(SplitConfig::Custom { split, .. }) = &self.split {
            if let Err(e) = split.validate() {
                errs.push(e.to_string());
            }
        }
        let m = &self.model;
        if m.feature_maps == 0 || m.recurrent_units == 0 {
            errs.push("model widths must be positive".into());
        }
        if !(0.0..1.0).contains(&m.dropout) {
            errs.push("model dropout must lie in [0, 1)".into());
        }
        match &self.method {
            MethodConfig::LossWeighted { kappa, scorer_iterations } => {
                if !(*kappa >= 0.0 && kappa.is_finite()) {
                    errs.push(format!("kappa must be finite and non-negative, got {kappa}"));
                }
                if *scorer_iterations == Some(0) {
                    errs.push("scorer_iterations must be positive".into());
                }
            }
            MethodConfig::Dann { head, .. } => {
                if head.recurrent_units == 0 || head.attach_after == 0 {
                    errs.push("domain head needs recurrent units and attach_after >= 1".into());
                }
            }
            MethodConfig::Finetune { frozen, learning_rate, tuning_runs, iterations, .. } => {
                if frozen.contains(&LayerGroup::Domain) {
                    errs.push("the domain group does not exist in a label network".into());
                }
                if !(*learning_rate > 0.0 && learning_rate.is_finite()) {
                    errs.push("finetune learning_rate must be positive".into());
                }
                if tuning_runs.is_empty() {
                    errs.push("tuning_runs must name at least one run".into());
                }
                if *iterations == Some(0) {
                    errs.push("finetune iterations must be positive".into());
                }
            }
            MethodConfig::Kmm { b, sigma, epsilon, .. } => {
                if !(*b > 0.0 && b.is_finite()) {
                    errs.push(format!("B must be positive, got {b}"));
                }
                if sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
                    errs.push("sigma must be positive".into());
                }
                if epsilon.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
                    errs.push("epsilon must be non-negative".into());
                }
            }
            MethodConfig::Tradaboost { rounds, .. } => {
                if *rounds == 0 {
                    errs.push("rounds must be positive".into());
                }
            }
            MethodConfig::Baseline => {}
        }
        if errs.is_empty() { Ok(()) } else { Err(HarnessError::Validation(errs)) }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Content hash of config, seed and code version.
    pub fn run_hash(&self) -> String {
        let seed = self.train.as_ref().map(|t| t.seed).unwrap_or(0);
        let text = format!("{}\n{seed}\n{}", self.hash(), env!("CARGO_PKG_VERSION"));
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"
schema_version = 1
name = "base"

[split]
kind = "synthetic"

[method]
kind = "baseline"

[train]
max_iterations = 3
seed = 7
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml_str(BASELINE).unwrap();
        assert_eq!(cfg.method, MethodConfig::Baseline);
        assert_eq!(cfg.model, ModelConfig::default());
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASELINE.replace("seed = 7", "seed = 7\nlearning_rat = 0.1");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn all_problems_are_listed() {
        let text = BASELINE.replace("schema_version = 1", "schema_version = 9").replace("name = \"base\"", "name = \"a b\"");
        let Err(HarnessError::Validation(errs)) = ExperimentConfig::from_toml_str(&text) else { panic!() };
        assert_eq!(errs.len(), 2, "{errs:?}");
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = ExperimentConfig::from_toml_str(BASELINE).unwrap();
        let b = ExperimentConfig::from_toml_str(&BASELINE.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.run_hash(), b.run_hash());
    }
}
