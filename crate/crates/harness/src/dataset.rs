use std::path::{Path, PathBuf};

use hartl_core::data::{build_split, load_recording, DomainSplit, Manifest, RunId, SensorRecording, SplitSpec};
use hartl_core::synthgen::{generate_runs, ShiftSpec};
use sha2::{Digest, Sha256};

use crate::config::{SplitConfig, DATASET_ROOT_ENV};
use crate::HarnessError;

/// Recordings and split for one experiment.
#[derive(Debug)]
pub struct Prepared {
    pub recordings: Vec<SensorRecording>,
    pub spec: SplitSpec,
    pub split: DomainSplit,
    /// Identifies the data and split; runs are comparable only when equal.
    pub split_hash: String,
    pub n_classes: usize,
}

fn dataset_root(configured: Option<&PathBuf>) -> Result<PathBuf, HarnessError> {
    configured
        .cloned()
        .or_else(|| std::env::var_os(DATASET_ROOT_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            HarnessError::MissingData(format!("no dataset_root in the config and {DATASET_ROOT_ENV} is not set"))
        })
}

/// `S{subject}-{run}.dat` under `root`.
pub fn recording_path(root: &Path, subject: u32, run: RunId) -> PathBuf {
    root.join(format!("S{subject}-{run}.dat"))
}

fn required(spec: &SplitSpec, extra_target_runs: &[RunId]) -> Vec<(u32, RunId)> {
    let mut out: Vec<(u32, RunId)> = Vec::new();
    let runs: Vec<RunId> = spec.train_runs.iter().chain(&spec.eval_runs).copied().collect();
    for s in [spec.source_subject, spec.target_subject] {
        for r in &runs {
            out.push((s, *r));
        }
    }
    for r in extra_target_runs {
        out.push((spec.target_subject, *r));
    }
    out.sort();
    out.dedup();
    out
}

fn load_files(root: &Path, manifest: &Manifest, needed: &[(u32, RunId)]) -> Result<Vec<SensorRecording>, HarnessError> {
    check_files(root, needed)?;
    needed
        .iter()
        .map(|(s, r)| {
            let path = recording_path(root, *s, *r);
            log::info!("loading {}", path.display());
            load_recording(&path, manifest).map_err(HarnessError::from)
        })
        .collect()
}

fn hash_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub fn load_shift_spec(path: Option<&PathBuf>) -> Result<ShiftSpec, HarnessError> {
    match path {
        None => Ok(ShiftSpec::fixture()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            ShiftSpec::from_toml_str(&text).map_err(|e| HarnessError::Validation(vec![format!("{}: {e}", p.display())]))
        }
    }
}

/// Check that the data exists without loading it.
pub fn check_available(cfg: &SplitConfig, extra_target_runs: &[RunId]) -> Result<(), HarnessError> {
    match cfg {
        SplitConfig::Synthetic { shift } => load_shift_spec(shift.as_ref()).map(|_| ()),
        SplitConfig::PaperDefault { dataset_root: root } => {
            let root = dataset_root(root.as_ref())?;
            check_files(&root, &required(&SplitSpec::paper_default(), extra_target_runs))
        }
        SplitConfig::Custom { dataset_root: root, manifest, split } => {
            if let Some(m) = manifest {
                Manifest::from_path(m)?;
            }
            let root = dataset_root(root.as_ref())?;
            check_files(&root, &required(split, extra_target_runs))
        }
    }
}

fn check_files(root: &Path, needed: &[(u32, RunId)]) -> Result<(), HarnessError> {
    let missing: Vec<String> = needed
        .iter()
        .map(|(s, r)| recording_path(root, *s, *r))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::MissingData(format!("missing recordings: {}", missing.join(", "))))
    }
}

/// Load or generate recordings (including extra target runs for a tuning
/// set) and build the split.
pub fn prepare(cfg: &SplitConfig, extra_target_runs: &[RunId]) -> Result<Prepared, HarnessError> {
    let (recordings, spec, split_hash, n_classes) = match cfg {
        SplitConfig::Synthetic { shift } => {
            let shift = load_shift_spec(shift.as_ref())?;
            let spec = shift.split_spec();
            let mut runs: Vec<RunId> = spec.train_runs.iter().chain(&spec.eval_runs).chain(extra_target_runs).copied().collect();
            runs.sort();
            runs.dedup();
            let recs = generate_runs(&shift, &runs)?;
            let spec_json = serde_json::to_string(&spec).expect("split serializes");
            let hash = hash_parts(&["synthetic", &shift.to_toml_string(), &spec_json]);
            (recs, spec, hash, shift.n_classes)
        }
        SplitConfig::PaperDefault { dataset_root: root } => {
            let root = dataset_root(root.as_ref())?;
            let manifest = Manifest::opportunity();
            let spec = SplitSpec::paper_default();
            let recs = load_files(&root, &manifest, &required(&spec, extra_target_runs))?;
            let spec_json = serde_json::to_string(&spec).expect("split serializes");
            let hash = hash_parts(&["dataset", &manifest.hash(), &spec_json]);
            (recs, spec, hash, manifest.labels.n_classes())
        }
        SplitConfig::Custom { dataset_root: root, manifest, split } => {
            let root = dataset_root(root.as_ref())?;
            let manifest = match manifest {
                Some(p) => Manifest::from_path(p)?,
                None => Manifest::opportunity(),
            };
            let recs = load_files(&root, &manifest, &required(split, extra_target_runs))?;
            let spec_json = serde_json::to_string(split).expect("split serializes");
            let hash = hash_parts(&["dataset", &manifest.hash(), &spec_json]);
            (recs, split.clone(), hash, manifest.labels.n_classes())
        }
    };
    let split = build_split(&recordings, &spec)?;
    Ok(Prepared { recordings, spec, split, split_hash, n_classes })
}
