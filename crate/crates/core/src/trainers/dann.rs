use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    check_split, fit, header, AdaptiveLambdaController, EpochStats, EvalSets, LambdaSchedule,
    SelectionSet, TrainConfig, TrainError,
};
use crate::data::DomainSplit;
use crate::model::{dann_gradient, DannHeadSpec, DeepConvLstm, DomainHead, ModelSpec, ParameterSnapshot};
use crate::optim::RmsProp;
use crate::trainers::{ganin_lambda, RunRecord};

/// Domain-adversarial training. Each source mini-batch is paired with an
/// equally sized batch of unlabeled target windows drawn with replacement;
/// the domain head sees both through a gradient reversal layer, the label
/// predictor sees the source windows only.
pub fn train_dann(
    split: &DomainSplit,
    spec: &ModelSpec,
    head_spec: &DannHeadSpec,
    cfg: &TrainConfig,
    schedule: LambdaSchedule,
) -> Result<(ParameterSnapshot, RunRecord), TrainError> {
    cfg.validate()?;
    check_split(split, spec)?;
    if split.target_train.is_empty() {
        return Err(TrainError::Empty("target_train"));
    }
    if let LambdaSchedule::Fixed { lambda } = schedule {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(TrainError::Config(format!("fixed lambda must be non-negative, got {lambda}")));
        }
    }
    let mut model = DeepConvLstm::new(spec.clone(), cfg.seed)?;
    let mut head = DomainHead::new(head_spec.clone(), spec, cfg.seed ^ 0xDA77)?;
    let mut optimizer = RmsProp::new(cfg.optimizer);
    let mut head_optimizer = RmsProp::new(cfg.optimizer);
    let (mut shuffle, mut dropout, mut sampler) = (cfg.stream(1), cfg.stream(2), cfg.stream(3));
    let mut controller = match schedule {
        LambdaSchedule::Adaptive { initial, bounds } => Some(AdaptiveLambdaController::new(bounds, initial)),
        _ => None,
    };

    let source = &split.source_train;
    let target = &split.target_train;
    let batches_per_epoch = source.len().div_ceil(cfg.batch_size);
    let total_steps = (batches_per_epoch * cfg.max_iterations) as f64;
    let mut step = 0usize;

    let params = serde_json::json!({ "schedule": schedule, "head": head_spec });
    let h = header("dann", spec, cfg, params, SelectionSet::SourceVal);
    let sets = EvalSets {
        initial: false,
        selection: &split.source_val,
        source_val: Some(&split.source_val),
        target_test: &split.target_test,
    };
    fit(&mut model, cfg, h, sets, |model, _| {
        let mut order: Vec<usize> = (0..source.len()).collect();
        order.shuffle(&mut shuffle);
        let (mut loss, mut correct, mut total) = (0.0, 0usize, 0usize);
        let mut lambda = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            lambda = match (schedule, &controller) {
                (LambdaSchedule::Adaptive { .. }, Some(c)) => c.lambda(),
                (LambdaSchedule::Ganin { gamma }, _) => ganin_lambda(step as f64 / total_steps, gamma),
                (LambdaSchedule::Fixed { lambda }, _) => lambda,
                (LambdaSchedule::Adaptive { .. }, None) => unreachable!("controller exists for adaptive"),
            };
            let tidx: Vec<usize> = (0..chunk.len()).map(|_| sampler.random_range(0..target.len())).collect();
            let g = dann_gradient(
                model,
                &head,
                &source.batch(chunk),
                &source.batch_labels(chunk),
                &vec![1.0; chunk.len()],
                &target.batch(&tidx),
                lambda,
                Some(&mut dropout),
            )?;
            loss += g.label_loss * chunk.len() as f64;
            correct += g.domain_correct;
            total += g.domain_total;
            optimizer.step(model.params_mut().tensors_mut(), g.grads.tensors(), &Default::default());
            head_optimizer.step(head.tensors_mut(), g.head_grads.domain_tensors(), &Default::default());
            step += 1;
        }
        let a_d = correct as f64 / total as f64;
        if let Some(c) = controller.as_mut() {
            c.update(a_d);
        }
        Ok(EpochStats {
            mean_loss: loss / source.len() as f64,
            domain_accuracy: Some(a_d),
            lambda: Some(lambda),
        })
    })
}
