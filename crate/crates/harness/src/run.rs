use std::fs;
use std::path::{Path, PathBuf};

use hartl_core::classical::{
    kmm_weights, parse_labeled_matrix, parse_matrix, tradaboost, BoostConfig, Classifier, StumpLearner, WeakLearner,
};
use hartl_core::data::build_tuning_set;
use hartl_core::model::{ModelSpec, ParameterSnapshot};
use hartl_core::trainers::{
    finetune, pretrain_domain_classifier, train_baseline, train_dann, train_loss_weighted, RunRecord, TrainConfig,
};
use serde_json::json;

use crate::config::{ExperimentConfig, MethodConfig};
use crate::dataset::{self, Prepared};
use crate::HarnessError;

pub const CONFIG_FILE: &str = "config.toml";
pub const RECORD_FILE: &str = "runs.jsonl";
pub const CHECKPOINT_FILE: &str = "best.snap";
pub const RESULT_FILE: &str = "result.json";
/// Present while a run is in progress and left behind when it fails.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
pub const ERROR_FILE: &str = "error.txt";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub id: String,
    pub dir: PathBuf,
    /// Per-iteration record for the network methods.
    pub record: Option<RunRecord>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Reserve `<name>-<hash12>-<n>` with the smallest free `n`.
fn reserve(out: &Path, cfg: &ExperimentConfig) -> Result<(String, PathBuf), HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let hash = cfg.run_hash();
    for n in 1.. {
        let id = format!("{}-{}-{n}", cfg.name, &hash[..12]);
        if out.join(&id).exists() {
            continue;
        }
        let work = out.join(format!(".{id}.partial"));
        match fs::create_dir(&work) {
            Ok(()) => return Ok((id, work)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(HarnessError::io(&work, e)),
        }
    }
    unreachable!("run ids are unbounded")
}

fn tuning_runs(cfg: &ExperimentConfig) -> Vec<hartl_core::data::RunId> {
    match &cfg.method {
        MethodConfig::Finetune { tuning_runs, .. } => tuning_runs.clone(),
        _ => Vec::new(),
    }
}

/// Everything that can be checked without training.
fn preflight(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    cfg.validate()?;
    if let Some(split) = &cfg.split {
        dataset::check_available(split, &tuning_runs(cfg))?;
    }
    let exists = |p: &PathBuf| -> Result<(), HarnessError> {
        if p.is_file() {
            Ok(())
        } else {
            Err(HarnessError::MissingData(format!("{} does not exist", p.display())))
        }
    };
    match &cfg.method {
        MethodConfig::Finetune { source_checkpoint: Some(p), .. } => exists(p),
        MethodConfig::Kmm { source, target, .. } => exists(source).and(exists(target)),
        MethodConfig::Tradaboost { source, target, test, .. } => {
            exists(source)?;
            exists(target)?;
            test.as_ref().map_or(Ok(()), exists)
        }
        _ => Ok(()),
    }
}

/// Execute the configured method under `<output_dir>/<run id>`. The
/// directory appears under its final name only once; a failed run keeps its
/// partial outputs, an `INCOMPLETE` marker and `error.txt`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    preflight(cfg)?;
    let (id, work) = reserve(&cfg.output_dir, cfg)?;
    let dir = cfg.output_dir.join(&id);
    write(&work.join(CONFIG_FILE), cfg.to_toml_string())?;
    write(&work.join(INCOMPLETE_MARKER), format!("config_hash = \"{}\"\n", cfg.hash()))?;
    log::info!("run {id}: {}", cfg.method.name());
    let outcome = execute(cfg, &work);
    if let Err(e) = &outcome {
        write(&work.join(ERROR_FILE), format!("{e}\n"))?;
    } else {
        fs::remove_file(work.join(INCOMPLETE_MARKER)).map_err(|e| HarnessError::io(&work, e))?;
    }
    fs::rename(&work, &dir).map_err(|e| HarnessError::io(&dir, e))?;
    let record = outcome?;
    Ok(RunOutput { id, dir, record })
}

fn model_spec(cfg: &ExperimentConfig, data: &Prepared) -> ModelSpec {
    ModelSpec {
        dropout: cfg.model.dropout,
        ..ModelSpec::with_widths(
            data.spec.window_length,
            data.split.channel_count(),
            data.n_classes,
            cfg.model.feature_maps,
            cfg.model.recurrent_units,
        )
    }
}

fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<Option<RunRecord>, HarnessError> {
    let Some(split_cfg) = &cfg.split else {
        execute_classical(cfg, dir)?;
        return Ok(None);
    };
    let train = cfg.train.as_ref().expect("validated");
    let data = dataset::prepare(split_cfg, &tuning_runs(cfg))?;
    let spec = model_spec(cfg, &data);
    let split = &data.split;
    let (mut snap, mut record) = match &cfg.method {
        MethodConfig::Baseline => train_baseline(split, &spec, train)?,
        MethodConfig::LossWeighted { kappa, scorer_iterations } => {
            let scorer_cfg = TrainConfig {
                max_iterations: scorer_iterations.unwrap_or(train.max_iterations),
                ..train.clone()
            };
            let scorer = pretrain_domain_classifier(&split.source_train, &split.target_train, &spec, &scorer_cfg)?;
            log::info!("domain classifier held-out accuracy {:.3}", scorer.heldout_accuracy);
            train_loss_weighted(split, &spec, train, *kappa, Some(&scorer))?
        }
        MethodConfig::Dann { schedule, head } => train_dann(split, &spec, head, train, *schedule)?,
        MethodConfig::Finetune { source_checkpoint, tuning_runs, frozen, learning_rate, iterations } => {
            let source = match source_checkpoint {
                Some(p) => ParameterSnapshot::load(p)?,
                None => {
                    let (mut snap, mut rec) = train_baseline(split, &spec, train)?;
                    stamp(&mut snap, &mut rec, cfg, &data);
                    write(&dir.join("source.jsonl"), rec.to_jsonl())?;
                    snap.save(&dir.join("source.snap"))?;
                    snap
                }
            };
            let tuning = build_tuning_set(
                &data.recordings,
                data.spec.target_subject,
                tuning_runs,
                &split.stats,
                data.spec.window_length,
                data.spec.stride,
            )?;
            let mut ft = TrainConfig {
                max_iterations: iterations.unwrap_or(train.max_iterations),
                ..train.clone()
            };
            ft.optimizer.learning_rate = *learning_rate;
            finetune(&source, &spec, &tuning, &split.target_test, frozen, &ft)?
        }
        MethodConfig::Kmm { .. } | MethodConfig::Tradaboost { .. } => unreachable!("validated"),
    };
    stamp(&mut snap, &mut record, cfg, &data);
    write(&dir.join(RECORD_FILE), record.to_jsonl())?;
    snap.save(&dir.join(CHECKPOINT_FILE))?;
    Ok(Some(record))
}

/// Embed the experiment's config and split hashes.
fn stamp(snap: &mut ParameterSnapshot, record: &mut RunRecord, cfg: &ExperimentConfig, data: &Prepared) {
    record.header.config_hash = cfg.hash();
    record.header.split_hash = Some(data.split_hash.clone());
    record.best.checkpoint = Some(CHECKPOINT_FILE.into());
    snap.meta.split = data.split_hash.clone();
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn execute_classical(cfg: &ExperimentConfig, dir: &Path) -> Result<(), HarnessError> {
    let result = match &cfg.method {
        MethodConfig::Kmm { source, target, sigma, b, epsilon } => {
            let xs = parse_matrix(&read(source)?)?;
            let xt = parse_matrix(&read(target)?)?;
            let solution = kmm_weights(xs.view(), xt.view(), *sigma, *b, *epsilon)?;
            json!({ "method": "kmm", "config_hash": cfg.hash(), "solution": solution })
        }
        MethodConfig::Tradaboost { source, target, test, rounds } => {
            let (xs, ys) = parse_labeled_matrix(&read(source)?)?;
            let (xt, yt) = parse_labeled_matrix(&read(target)?)?;
            let model = tradaboost((xs.view(), &ys), (xt.view(), &yt), &BoostConfig { rounds: *rounds }, &StumpLearner)?;
            let mut out = json!({
                "method": "tradaboost",
                "config_hash": cfg.hash(),
                "model": model,
                "target_train_accuracy": model.accuracy(xt.view(), &yt),
            });
            if let Some(test) = test {
                let (xe, ye) = parse_labeled_matrix(&read(test)?)?;
                let p = vec![1.0 / ys.len() as f64; ys.len()];
                let stump = StumpLearner.fit(xs.view(), &ys, &p);
                let hits = xe.rows().into_iter().zip(&ye).filter(|(r, y)| stump.predict(*r) == **y).count();
                out["test_accuracy"] = json!(model.accuracy(xe.view(), &ye));
                out["source_only_test_accuracy"] = json!(hits as f64 / ye.len() as f64);
            }
            out
        }
        _ => unreachable!("validated"),
    };
    write(&dir.join(RESULT_FILE), serde_json::to_string_pretty(&result).expect("result serializes"))
}
