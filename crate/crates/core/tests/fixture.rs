//! Checks pinned to the bundled synthetic fixture.

use hartl_core::data::{build_split, DomainSplit, SensorRecording};
use hartl_core::model::{DeepConvLstm, ModelSpec, ParameterSnapshot};
use hartl_core::synthgen::{generate_split_runs, ShiftSpec};
use hartl_core::trainers::{evaluate, pretrain_domain_classifier, train_baseline, TrainConfig};

fn fixture() -> (ShiftSpec, Vec<SensorRecording>, DomainSplit) {
    let shift = ShiftSpec::fixture();
    let recs = generate_split_runs(&shift).unwrap();
    let split = build_split(&recs, &shift.split_spec()).unwrap();
    (shift, recs, split)
}

fn model_spec(shift: &ShiftSpec) -> ModelSpec {
    ModelSpec::with_widths(24, shift.n_channels, shift.n_classes, 16, 32)
}

fn cfg(iterations: usize) -> TrainConfig {
    TrainConfig { batch_size: 50, ..TrainConfig::new(iterations, 1) }
}

fn load(spec: &ModelSpec, snap: &ParameterSnapshot) -> DeepConvLstm {
    let mut model = DeepConvLstm::new(spec.clone(), 0).unwrap();
    model.restore(snap, &spec.layer_groups()).unwrap();
    model
}

#[test]
fn baseline_leaves_a_gap_and_rotation_only_widens_it() {
    let (shift, _, split) = fixture();
    let spec = model_spec(&shift);
    let (snap, record) = train_baseline(&split, &spec, &cfg(30)).unwrap();
    let model = load(&spec, &snap);

    let source = evaluate(&model, &split.source_val, 256).unwrap();
    let target = evaluate(&model, &split.target_test, 256).unwrap();
    assert_eq!(source.weighted_f1, record.best.selection_f1);
    assert!(source.weighted_f1 >= 0.9, "source F1 {}", source.weighted_f1);
    assert!(source.weighted_f1 - target.weighted_f1 >= 0.15, "{} vs {}", source.weighted_f1, target.weighted_f1);
    assert!(source.accuracy - target.accuracy >= 0.15, "{} vs {}", source.accuracy, target.accuracy);

    let mut accuracies = Vec::new();
    for angle in [0.0, 0.3, 0.6] {
        let mut rotated = shift.clone();
        rotated.shift.rotation = angle;
        let recs = generate_split_runs(&rotated).unwrap();
        let s = build_split(&recs, &rotated.split_spec()).unwrap();
        assert_eq!(s.stats, split.stats);
        accuracies.push(evaluate(&model, &s.target_test, 256).unwrap().accuracy);
    }
    assert_eq!(accuracies[0], target.accuracy);
    assert!(accuracies.windows(2).all(|w| w[1] <= w[0]), "{accuracies:?}");
}

#[test]
fn domain_classifier_separates_the_subjects() {
    let (shift, _, split) = fixture();
    let scorer = pretrain_domain_classifier(&split.source_train, &split.target_train, &model_spec(&shift), &cfg(3)).unwrap();
    assert!(scorer.heldout_accuracy >= 0.9, "{}", scorer.heldout_accuracy);
}
