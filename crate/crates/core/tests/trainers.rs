mod common;

use common::{tiny_model, tiny_split};
use hartl_core::data::{build_tuning_set, RunId, WindowSet};
use hartl_core::model::{DannHeadSpec, LayerGroup, ParameterSnapshot};
use hartl_core::trainers::{
    finetune, instance_weights, pretrain_domain_classifier, train_baseline, train_dann, train_loss_weighted,
    AdaptiveLambdaController, LambdaBounds, LambdaSchedule, RunRecord, SelectionSet, TrainConfig, TrainError,
};
use proptest::prelude::*;

fn cfg(iterations: usize) -> TrainConfig {
    TrainConfig { batch_size: 32, ..TrainConfig::new(iterations, 5) }
}

fn head() -> DannHeadSpec {
    DannHeadSpec { attach_after: 2, recurrent_units: 8 }
}

fn curve(r: &RunRecord) -> Vec<(usize, Option<f64>, f64, f64)> {
    r.rows.iter().map(|row| (row.iteration, row.source_val_f1, row.target_test_f1, row.selection_f1)).collect()
}

fn tensors(s: &ParameterSnapshot) -> Vec<(String, Vec<f64>)> {
    s.tensors.iter().map(|t| (t.name.clone(), t.data.clone())).collect()
}

#[test]
fn zero_kappa_and_zero_lambda_reproduce_the_baseline() {
    let (_, _, split) = tiny_split(600);
    let model = tiny_model();
    let (base_snap, base) = train_baseline(&split, &model, &cfg(3)).unwrap();

    let (lw_snap, lw) = train_loss_weighted(&split, &model, &cfg(3), 0.0, None).unwrap();
    assert_eq!(curve(&lw), curve(&base));
    assert_eq!(tensors(&lw_snap), tensors(&base_snap));

    let (dann_snap, dann) = train_dann(&split, &model, &head(), &cfg(3), LambdaSchedule::Fixed { lambda: 0.0 }).unwrap();
    assert_eq!(curve(&dann), curve(&base));
    assert_eq!(tensors(&dann_snap), tensors(&base_snap));
}

#[test]
fn same_seed_same_record() {
    let (_, _, split) = tiny_split(600);
    let (_, a) = train_baseline(&split, &tiny_model(), &cfg(2)).unwrap();
    let (_, b) = train_baseline(&split, &tiny_model(), &cfg(2)).unwrap();
    assert_eq!(a, b);
    let (_, c) = train_baseline(&split, &tiny_model(), &TrainConfig { seed: 6, ..cfg(2) }).unwrap();
    assert_ne!(curve(&a), curve(&c));
}

#[test]
fn selection_ignores_the_target_test_set() {
    let (_, _, split) = tiny_split(600);
    let (_, a) = train_baseline(&split, &tiny_model(), &cfg(4)).unwrap();
    let mut other = split.clone();
    other.target_test = split.source_val.clone();
    let (_, b) = train_baseline(&other, &tiny_model(), &cfg(4)).unwrap();
    assert_eq!(a.best, b.best);
    assert_ne!(a.rows.iter().map(|r| r.target_test_f1).collect::<Vec<_>>(), b.rows.iter().map(|r| r.target_test_f1).collect::<Vec<_>>());
    assert_eq!(a.header.selection_set, SelectionSet::SourceVal);
    let best = a.rows.iter().map(|r| r.source_val_f1.unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(a.best.selection_f1, best);
}

#[test]
fn divergence_names_the_iteration() {
    let (_, _, split) = tiny_split(600);
    let mut c = cfg(3);
    c.optimizer.learning_rate = 1e300;
    match train_baseline(&split, &tiny_model(), &c) {
        Err(TrainError::Divergence { iteration, .. }) => assert_eq!(iteration, 1),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.1.rows.len())),
    }
}

#[test]
fn adaptive_run_traces_lambda_and_domain_accuracy() {
    let (_, _, split) = tiny_split(600);
    let (_, r) = train_dann(&split, &tiny_model(), &head(), &cfg(3), LambdaSchedule::adaptive()).unwrap();
    assert_eq!(r.lambda_trace().len(), 3);
    for row in &r.rows {
        let a_d = row.domain_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&a_d));
    }
    // The trace records the λ used during each iteration.
    assert_eq!(r.lambda_trace()[0], 1.0);
    let mut ctrl = AdaptiveLambdaController::new(LambdaBounds::default(), 1.0);
    for w in r.rows.windows(2) {
        assert_eq!(w[1].lambda.unwrap(), ctrl.update(w[0].domain_accuracy.unwrap()));
    }
}

#[test]
fn finetune_with_everything_frozen_changes_nothing() {
    let (spec, recs, split) = tiny_split(600);
    let model = tiny_model();
    let (source, _) = train_baseline(&split, &model, &cfg(1)).unwrap();
    let ss = spec.split_spec();
    let tuning = build_tuning_set(&recs, ss.target_subject, &[RunId::Adl(3)], &split.stats, 24, 12).unwrap();
    let all = source.groups();
    let (snap, r) = finetune(&source, &model, &tuning, &split.target_test, &all, &cfg(3)).unwrap();
    assert_eq!(r.header.selection_set, SelectionSet::TuningHoldout);
    assert_eq!(r.rows[0].iteration, 0);
    let f1: Vec<f64> = r.rows.iter().map(|row| row.target_test_f1).collect();
    assert!(f1.windows(2).all(|w| w[0] == w[1]), "{f1:?}");
    for group in [LayerGroup::Conv(1), LayerGroup::Conv(2)] {
        let pick = |s: &ParameterSnapshot| -> Vec<Vec<f64>> {
            s.tensors.iter().filter(|t| t.group().unwrap() == group).map(|t| t.data.clone()).collect()
        };
        assert_eq!(pick(&snap), pick(&source));
    }
}

#[test]
fn finetune_only_moves_unfrozen_groups() {
    let (spec, recs, split) = tiny_split(600);
    let model = tiny_model();
    let (source, _) = train_baseline(&split, &model, &cfg(1)).unwrap();
    let ss = spec.split_spec();
    let tuning = build_tuning_set(&recs, ss.target_subject, &[RunId::Adl(3)], &split.stats, 24, 12).unwrap();
    let frozen = [LayerGroup::Conv(1), LayerGroup::Conv(2)];
    let (snap, _) = finetune(&source, &model, &tuning, &split.target_test, &frozen, &cfg(2)).unwrap();
    for (a, b) in snap.tensors.iter().zip(&source.tensors) {
        let g = a.group().unwrap();
        if frozen.contains(&g) {
            assert_eq!(a.data, b.data, "{}", a.name);
        } else if matches!(g, LayerGroup::Conv(_)) {
            assert_ne!(a.data, b.data, "{}", a.name);
        }
    }
}

#[test]
fn scorer_cannot_tell_a_set_from_itself() {
    let (_, _, split) = tiny_split(900);
    let set: &WindowSet = &split.source_train;
    let scorer = pretrain_domain_classifier(set, set, &tiny_model(), &cfg(3)).unwrap();
    assert!((scorer.heldout_accuracy - 0.5).abs() <= 0.15, "{}", scorer.heldout_accuracy);
    let scores = scorer.score(set).unwrap();
    assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn record_survives_jsonl() {
    let (_, _, split) = tiny_split(600);
    let (_, r) = train_dann(&split, &tiny_model(), &head(), &cfg(2), LambdaSchedule::ganin()).unwrap();
    let back = RunRecord::from_jsonl(&r.to_jsonl()).unwrap();
    assert_eq!(back, r);
    let truncated: String = r.to_jsonl().lines().take(2).map(|l| format!("{l}\n")).collect();
    assert!(RunRecord::from_jsonl(&truncated).is_err());
}

#[test]
fn bad_hyperparameters_are_rejected() {
    let (_, _, split) = tiny_split(600);
    assert!(matches!(
        train_loss_weighted(&split, &tiny_model(), &cfg(1), -1.0, None),
        Err(TrainError::Config(_))
    ));
    assert!(matches!(
        train_dann(&split, &tiny_model(), &head(), &cfg(1), LambdaSchedule::Fixed { lambda: f64::NAN }),
        Err(TrainError::Config(_))
    ));
    assert!(matches!(train_baseline(&split, &tiny_model(), &cfg(0)), Err(TrainError::Config(_))));
}

proptest! {
    #[test]
    fn instance_weights_average_one(scores in prop::collection::vec(0.0f64..=1.0, 1..60), kappa in 0.0f64..8.0) {
        let w = instance_weights(&scores, kappa).unwrap();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-9);
        // More target-like windows never weigh less.
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(w[i] >= w[j]);
                }
            }
        }
    }

    #[test]
    fn controller_stays_in_bounds(start in 0.1f64..10_000.0, a_ds in prop::collection::vec(0.0f64..=1.0, 1..100)) {
        let b = LambdaBounds::default();
        let mut ctrl = AdaptiveLambdaController::new(b, start);
        for a in a_ds {
            let l = ctrl.update(a);
            prop_assert!((b.lambda_min..=b.lambda_max).contains(&l));
        }
    }
}
