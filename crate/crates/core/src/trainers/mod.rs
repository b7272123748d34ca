//! Source-only baseline, instance loss weighting, domain-adversarial
//! training and layer-transfer fine-tuning. Each returns the best snapshot
//! by the selection set and a per-iteration [`RunRecord`].

mod dann;
mod finetune;
mod lambda;
mod record;
mod scorer;

pub use dann::train_dann;
pub use finetune::{finetune, FinetuneConfig};
pub use lambda::{ganin_lambda, update_lambda, AdaptiveLambdaController, LambdaBounds, LambdaSchedule};
pub use record::{BestCheckpoint, RunHeader, RunRecord, RunRow, SelectionSet};
pub use scorer::{instance_weights, pretrain_domain_classifier, DomainScorer};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{DataError, DomainSplit, WindowSet};
use crate::metrics::{weighted_f1, EvalReport, MetricsError};
use crate::model::{DeepConvLstm, ModelError, ModelSpec, ParameterSnapshot, SnapshotMeta};
use crate::optim::{RmsProp, RmsPropConfig};
use crate::ModelRng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("non-finite loss or parameters at iteration {iteration} (lambda trace {lambda_trace:?})")]
    Divergence { iteration: usize, lambda_trace: Vec<f64> },
    #[error("run record: {0}")]
    Record(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub optimizer: RmsPropConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// One iteration is one pass over the training windows.
    pub max_iterations: usize,
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_batch() -> usize {
    100
}

fn default_eval_every() -> usize {
    1
}

impl TrainConfig {
    pub fn new(max_iterations: usize, seed: u64) -> Self {
        TrainConfig {
            optimizer: RmsPropConfig::default(),
            batch_size: default_batch(),
            max_iterations,
            seed,
            eval_every: default_eval_every(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&o.decay) || !(o.epsilon > 0.0) {
            return Err(TrainError::Config("decay must lie in [0, 1) and epsilon be positive".into()));
        }
        if self.max_iterations == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(TrainError::Config(
                "max_iterations, batch_size and eval_every must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Stream seeds derived from the run seed; each consumer owns one.
    fn stream(&self, k: u64) -> ModelRng {
        ModelRng::seed_from_u64(self.seed.wrapping_add(k.wrapping_mul(0xA076_1D64_78BD_642F)))
    }
}

pub(crate) fn hash_json(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

fn header(
    method: &str,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    params: serde_json::Value,
    selection_set: SelectionSet,
) -> RunHeader {
    let config_hash = hash_json(&serde_json::json!({
        "method": method,
        "model": spec.hash(),
        "train": cfg,
        "params": params,
    }));
    RunHeader {
        method: method.into(),
        config_hash,
        split_hash: None,
        model_spec_hash: spec.hash(),
        train_config: cfg.clone(),
        params,
        selection_set,
    }
}

pub fn evaluate(model: &DeepConvLstm, set: &WindowSet, batch_size: usize) -> Result<EvalReport, TrainError> {
    if set.is_empty() {
        return Err(TrainError::Empty("evaluation set"));
    }
    let pred = model.predict(set, batch_size)?;
    Ok(weighted_f1(&pred, &set.labels(), model.spec().n_classes)?)
}

/// Summary of one training iteration.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct EpochStats {
    pub mean_loss: f64,
    pub domain_accuracy: Option<f64>,
    pub lambda: Option<f64>,
}

pub(crate) struct EvalSets<'a> {
    /// Also evaluate (as iteration 0) before any training.
    pub initial: bool,
    pub selection: &'a WindowSet,
    pub source_val: Option<&'a WindowSet>,
    pub target_test: &'a WindowSet,
}

/// Shared outer loop: run `epoch` for every iteration, evaluate, keep the
/// best snapshot by the selection set.
pub(crate) fn fit(
    model: &mut DeepConvLstm,
    cfg: &TrainConfig,
    header: RunHeader,
    sets: EvalSets<'_>,
    mut epoch: impl FnMut(&mut DeepConvLstm, usize) -> Result<EpochStats, TrainError>,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    let mut rows = Vec::new();
    let mut lambda_trace = Vec::new();
    let mut best: Option<(f64, usize, ParameterSnapshot)> = None;
    let first = if sets.initial { 0 } else { 1 };
    for iteration in first..=cfg.max_iterations {
        let stats = if iteration == 0 {
            EpochStats::default()
        } else {
            epoch(model, iteration)?
        };
        lambda_trace.extend(stats.lambda);
        if !stats.mean_loss.is_finite() || !model.params().all_finite() {
            return Err(TrainError::Divergence { iteration, lambda_trace });
        }
        if iteration % cfg.eval_every != 0 && iteration != cfg.max_iterations {
            continue;
        }
        let source = sets
            .source_val
            .map(|s| evaluate(model, s, cfg.batch_size))
            .transpose()?;
        let selection_f1 = match (sets.source_val, &source) {
            (Some(sv), Some(r)) if std::ptr::eq(sv, sets.selection) => r.weighted_f1,
            _ => evaluate(model, sets.selection, cfg.batch_size)?.weighted_f1,
        };
        let target = evaluate(model, sets.target_test, cfg.batch_size)?;
        log::debug!(
            "{} iteration {iteration}: loss {:.4} selection F1 {selection_f1:.4} target F1 {:.4}",
            header.method,
            stats.mean_loss,
            target.weighted_f1
        );
        rows.push(RunRow {
            iteration,
            source_val_f1: source.as_ref().map(|r| r.weighted_f1),
            source_val_accuracy: source.as_ref().map(|r| r.accuracy),
            target_test_f1: target.weighted_f1,
            target_test_accuracy: target.accuracy,
            selection_f1,
            domain_accuracy: stats.domain_accuracy,
            lambda: stats.lambda,
            mean_loss: stats.mean_loss,
        });
        if best.as_ref().is_none_or(|(f, _, _)| selection_f1 > *f) {
            let meta = SnapshotMeta {
                method: header.method.clone(),
                split: header.split_hash.clone().unwrap_or_default(),
                iteration,
                seed: cfg.seed,
            };
            best = Some((selection_f1, iteration, model.snapshot(meta)));
        }
    }
    let (selection_f1, iteration, snapshot) = best.expect("at least one evaluation");
    let record = RunRecord {
        header,
        rows,
        best: BestCheckpoint {
            iteration,
            selection_f1,
            checkpoint: None,
        },
    };
    Ok((snapshot, record))
}

/// One shuffled pass of weighted mini-batch RMSProp over `set`.
pub(crate) struct SupervisedPass<'a> {
    pub set: &'a WindowSet,
    pub weights: Option<&'a [f64]>,
    pub batch_size: usize,
    pub optimizer: RmsProp,
    pub shuffle: ModelRng,
    pub dropout: ModelRng,
}

impl SupervisedPass<'_> {
    pub fn run(&mut self, model: &mut DeepConvLstm) -> Result<EpochStats, TrainError> {
        let mut order: Vec<usize> = (0..self.set.len()).collect();
        order.shuffle(&mut self.shuffle);
        let mut loss = 0.0;
        for chunk in order.chunks(self.batch_size) {
            let weights: Vec<f64> = match self.weights {
                Some(w) => chunk.iter().map(|&i| w[i]).collect(),
                None => vec![1.0; chunk.len()],
            };
            let g = model.batch_gradient(
                &self.set.batch(chunk),
                &self.set.batch_labels(chunk),
                &weights,
                Some(&mut self.dropout),
            )?;
            loss += g.loss * chunk.len() as f64;
            let frozen = model.frozen().clone();
            self.optimizer
                .step(model.params_mut().tensors_mut(), g.grads.tensors(), &frozen);
        }
        Ok(EpochStats {
            mean_loss: loss / self.set.len() as f64,
            ..EpochStats::default()
        })
    }
}

fn check_split(split: &DomainSplit, spec: &ModelSpec) -> Result<(), TrainError> {
    if split.source_train.is_empty() {
        return Err(TrainError::Empty("source_train"));
    }
    if split.source_val.is_empty() {
        return Err(TrainError::Empty("source_val"));
    }
    if split.target_test.is_empty() {
        return Err(TrainError::Empty("target_test"));
    }
    if split.window_length() != spec.input_length || split.channel_count() != spec.channels {
        return Err(TrainError::Config(format!(
            "split windows are {}×{} but the model expects {}×{}",
            split.window_length(),
            split.channel_count(),
            spec.input_length,
            spec.channels
        )));
    }
    Ok(())
}

fn train_supervised(
    split: &DomainSplit,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    weights: Option<&[f64]>,
    header: RunHeader,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    cfg.validate()?;
    check_split(split, spec)?;
    let mut model = DeepConvLstm::new(spec.clone(), cfg.seed)?;
    let mut pass = SupervisedPass {
        set: &split.source_train,
        weights,
        batch_size: cfg.batch_size,
        optimizer: RmsProp::new(cfg.optimizer),
        shuffle: cfg.stream(1),
        dropout: cfg.stream(2),
    };
    let sets = EvalSets {
        initial: false,
        selection: &split.source_val,
        source_val: Some(&split.source_val),
        target_test: &split.target_test,
    };
    fit(&mut model, cfg, header, sets, |m, _| pass.run(m))
}

/// Cross-entropy on labeled source windows only.
pub fn train_baseline(
    split: &DomainSplit,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    let h = header("baseline", spec, cfg, serde_json::Value::Null, SelectionSet::SourceVal);
    train_supervised(split, spec, cfg, None, h)
}

/// Cross-entropy with per-window weights `e^(κ·Lᵢ)/C`, where `Lᵢ` is the
/// scorer's probability that window `i` belongs to the target domain and
/// `C` makes the weights average to 1 over `source_train`. Without a
/// scorer one is pretrained from `cfg`.
pub fn train_loss_weighted(
    split: &DomainSplit,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    kappa: f64,
    scorer: Option<&DomainScorer>,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(TrainError::Config(format!("kappa must be finite and non-negative, got {kappa}")));
    }
    cfg.validate()?;
    check_split(split, spec)?;
    let owned;
    let scorer = match scorer {
        Some(s) => s,
        None => {
            owned = pretrain_domain_classifier(&split.source_train, &split.target_train, spec, cfg)?;
            &owned
        }
    };
    let scores = scorer.score(&split.source_train)?;
    let weights = instance_weights(&scores, kappa)?;
    let params = serde_json::json!({
        "kappa": kappa,
        "scorer_heldout_accuracy": scorer.heldout_accuracy,
    });
    let h = header("loss_weighted", spec, cfg, params, SelectionSet::SourceVal);
    train_supervised(split, spec, cfg, Some(&weights), h)
}
