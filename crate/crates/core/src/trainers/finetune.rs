use super::{fit, header, EvalSets, SelectionSet, SupervisedPass, TrainConfig, TrainError};
use crate::data::WindowSet;
use crate::model::{DeepConvLstm, LayerGroup, ModelSpec, ParameterSnapshot};
use crate::optim::{RmsProp, RmsPropConfig};
use crate::trainers::RunRecord;

/// Every `holdout_every`-th tuning window is held out for model selection.
pub const HOLDOUT_EVERY: usize = 5;

/// Fine-tuning defaults: RMSProp with learning rate 5e-5.
pub struct FinetuneConfig;

impl FinetuneConfig {
    pub fn train_config(max_iterations: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: RmsPropConfig {
                learning_rate: 5e-5,
                ..RmsPropConfig::default()
            },
            ..TrainConfig::new(max_iterations, seed)
        }
    }
}

/// Layer transfer: a fresh model of `spec` takes its convolution groups from
/// `source`, freezes `frozen`, and trains on labeled target windows. The
/// record starts with an iteration-0 row for the transferred model.
pub fn finetune(
    source: &ParameterSnapshot,
    spec: &ModelSpec,
    target_labeled: &WindowSet,
    target_test: &WindowSet,
    frozen: &[LayerGroup],
    cfg: &TrainConfig,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    cfg.validate()?;
    if target_labeled.is_empty() {
        return Err(TrainError::Empty("target_labeled"));
    }
    if target_test.is_empty() {
        return Err(TrainError::Empty("target_test"));
    }
    let mut model = DeepConvLstm::new(spec.clone(), cfg.seed)?;
    model.restore(source, &spec.conv_groups())?;
    model.freeze(frozen)?;

    let (train, held) = target_labeled.split_every(HOLDOUT_EVERY);
    let (train, held) = if train.is_empty() || held.is_empty() {
        (target_labeled.clone(), target_labeled.clone())
    } else {
        (train, held)
    };
    let mut pass = SupervisedPass {
        set: &train,
        weights: None,
        batch_size: cfg.batch_size,
        optimizer: RmsProp::new(cfg.optimizer),
        shuffle: cfg.stream(1),
        dropout: cfg.stream(2),
    };
    let frozen_names: Vec<String> = frozen.iter().map(|g| g.to_string()).collect();
    let params = serde_json::json!({
        "frozen": frozen_names,
        "source_spec_hash": source.spec_hash,
        "tuning_windows": target_labeled.len(),
    });
    let h = header("finetune", spec, cfg, params, SelectionSet::TuningHoldout);
    let sets = EvalSets {
        initial: true,
        selection: &held,
        source_val: None,
        target_test,
    };
    fit(&mut model, cfg, h, sets, |m, _| pass.run(m))
}
