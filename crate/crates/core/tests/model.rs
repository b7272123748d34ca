mod common;

use common::{grl_relative_errors, random_batch, toy_head_spec, toy_spec};
use hartl_core::model::{
    dann_gradient, decode_tensors, encode_tensors, DeepConvLstm, DomainHead, LayerGroup, ModelError,
    ModelSpec, ParameterSnapshot, SnapshotMeta, SnapshotTensor,
};
use hartl_core::optim::{RmsProp, RmsPropConfig};
use ndarray::Array4;
use proptest::prelude::*;

fn group_data(model: &DeepConvLstm, group: LayerGroup) -> Vec<f64> {
    model
        .params()
        .tensors()
        .into_iter()
        .filter(|t| t.group == group)
        .flat_map(|t| t.data.to_vec())
        .collect()
}

fn train_steps(model: &mut DeepConvLstm, steps: usize) {
    let xs = random_batch(4, 24, 2, 5);
    let labels = [1u16, 2, 3, 1];
    let mut opt = RmsProp::new(RmsPropConfig::default());
    for _ in 0..steps {
        let g = model.batch_gradient(&xs, &labels, &[1.0; 4], None).unwrap();
        let frozen = model.frozen().clone();
        opt.step(model.params_mut().tensors_mut(), g.grads.tensors(), &frozen);
    }
}

#[test]
fn probabilities_for_single_window_sum_to_one() {
    let model = DeepConvLstm::new(ModelSpec::with_widths(24, 8, 17, 8, 16), 1).unwrap();
    let probs = model.forward(&random_batch(1, 24, 8, 2)).unwrap();
    assert_eq!(probs.dim(), (1, 17));
    assert!((probs.sum() - 1.0).abs() < 1e-6);
}

#[test]
fn shape_trace_follows_valid_convolution() {
    let model = DeepConvLstm::new(toy_spec(), 1).unwrap();
    assert_eq!(model.shape_trace(&random_batch(2, 24, 2, 3)).unwrap(), vec![20, 16, 12, 8]);
}

#[test]
fn dimension_errors_name_the_axis() {
    let model = DeepConvLstm::new(toy_spec(), 1).unwrap();
    match model.forward(&random_batch(1, 24, 3, 0)) {
        Err(ModelError::Dimension { axis, expected, found }) => {
            assert_eq!((axis, expected, found), ("channel", 2, 3));
        }
        other => panic!("unexpected {other:?}"),
    }
    match model.forward(&random_batch(1, 20, 2, 0)) {
        Err(ModelError::Dimension { axis, .. }) => assert_eq!(axis, "time"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn every_parameter_belongs_to_one_declared_group() {
    let model = DeepConvLstm::new(toy_spec(), 1).unwrap();
    let groups = model.spec().layer_groups();
    let tensors = model.params().tensors();
    let mut names: Vec<&str> = tensors.iter().map(|t| t.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), tensors.len());
    for t in &tensors {
        assert!(groups.contains(&t.group), "{} in {}", t.name, t.group);
    }
    for g in &groups {
        assert!(tensors.iter().any(|t| t.group == *g), "group {g} is empty");
    }
}

#[test]
fn snapshot_restore_is_bit_identical() {
    let trained = {
        let mut m = DeepConvLstm::new(toy_spec(), 1).unwrap();
        train_steps(&mut m, 3);
        m
    };
    let snap = trained.snapshot(SnapshotMeta::default());
    let mut fresh = DeepConvLstm::new(toy_spec(), 2).unwrap();
    fresh.restore(&snap, &toy_spec().layer_groups()).unwrap();
    assert_eq!(fresh.params(), trained.params());
}

#[test]
fn partial_restore_touches_only_named_groups() {
    let mut trained = DeepConvLstm::new(toy_spec(), 1).unwrap();
    train_steps(&mut trained, 3);
    let snap = trained.snapshot(SnapshotMeta::default());
    let mut fresh = DeepConvLstm::new(toy_spec(), 2).unwrap();
    let before = fresh.clone();
    let convs = toy_spec().conv_groups();
    fresh.restore(&snap, &convs).unwrap();
    for g in &convs {
        assert_eq!(group_data(&fresh, *g), group_data(&trained, *g));
    }
    for g in [LayerGroup::Recurrent, LayerGroup::Output] {
        assert_eq!(group_data(&fresh, g), group_data(&before, g));
    }
}

#[test]
fn restore_across_channel_counts_names_the_incompatible_group() {
    let other = DeepConvLstm::new(ModelSpec::with_widths(24, 3, 3, 3, 4), 1).unwrap();
    let snap = other.snapshot(SnapshotMeta::default());
    let mut model = DeepConvLstm::new(toy_spec(), 1).unwrap();
    // Conv weights are shared across channels, so they still transfer.
    model.restore(&snap, &toy_spec().conv_groups()).unwrap();
    match model.restore(&snap, &[LayerGroup::Recurrent]) {
        Err(ModelError::Incompatible(g)) => assert_eq!(g, "recurrent"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        model.restore(&snap, &[LayerGroup::Conv(5)]),
        Err(ModelError::UnknownGroup(_))
    ));
}

#[test]
fn snapshot_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.snap");
    let model = DeepConvLstm::new(toy_spec(), 7).unwrap();
    let meta = SnapshotMeta {
        method: "baseline".into(),
        split: "synthetic".into(),
        iteration: 4,
        seed: 7,
    };
    let snap = model.snapshot(meta);
    snap.save(&path).unwrap();
    let back = ParameterSnapshot::load(&path).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.spec_hash, toy_spec().hash());
}

#[test]
fn freezing_first_two_convs_keeps_them_fixed() {
    let mut model = DeepConvLstm::new(toy_spec(), 3).unwrap();
    let before = model.clone();
    model.freeze(&[LayerGroup::Conv(1), LayerGroup::Conv(2)]).unwrap();
    train_steps(&mut model, 10);
    assert_eq!(group_data(&model, LayerGroup::Conv(1)), group_data(&before, LayerGroup::Conv(1)));
    assert_eq!(group_data(&model, LayerGroup::Conv(2)), group_data(&before, LayerGroup::Conv(2)));
    assert_ne!(group_data(&model, LayerGroup::Conv(3)), group_data(&before, LayerGroup::Conv(3)));
}

#[test]
fn freezing_everything_makes_training_a_no_op() {
    let mut model = DeepConvLstm::new(toy_spec(), 3).unwrap();
    let before = model.clone();
    model.freeze(&toy_spec().layer_groups()).unwrap();
    train_steps(&mut model, 5);
    assert_eq!(model.params(), before.params());
}

#[test]
fn freezing_nothing_updates_every_group() {
    let mut model = DeepConvLstm::new(toy_spec(), 3).unwrap();
    let before = model.clone();
    model.freeze(&[]).unwrap();
    train_steps(&mut model, 3);
    for g in toy_spec().layer_groups() {
        assert_ne!(group_data(&model, g), group_data(&before, g), "{g}");
    }
}

#[test]
fn freezing_unknown_group_is_an_error() {
    let mut model = DeepConvLstm::new(toy_spec(), 3).unwrap();
    assert!(matches!(model.freeze(&[LayerGroup::Domain]), Err(ModelError::UnknownGroup(_))));
    assert!("conv9".parse::<LayerGroup>().is_ok());
    assert!(model.freeze(&["conv9".parse().unwrap()]).is_err());
}

#[test]
fn grl_gradient_matches_central_differences() {
    for lambda in [0.0, 1.0, 10.0] {
        for (group, err) in grl_relative_errors(lambda, 1e-5) {
            assert!(err < 1e-4, "lambda {lambda} {group}: relative error {err}");
        }
    }
}

#[test]
fn domain_probabilities_sum_to_one() {
    let spec = toy_spec();
    let head = DomainHead::new(toy_head_spec(), &spec, 4).unwrap();
    let model = DeepConvLstm::new(spec, 4).unwrap();
    let x = model.input_maps(&random_batch(5, 24, 2, 8)).unwrap();
    let (features, _) = model.conv_forward(x, 0..2);
    let probs = head.forward_domain(&features).unwrap();
    for row in probs.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn domain_head_rejects_features_from_another_layer() {
    let spec = toy_spec();
    let head = DomainHead::new(toy_head_spec(), &spec, 4).unwrap();
    let wrong = Array4::zeros((2, 20, 2, 3));
    assert!(matches!(head.forward_domain(&wrong), Err(ModelError::Config(_))));
}

#[test]
fn zero_lambda_domain_training_leaves_features_untouched() {
    let spec = toy_spec();
    let mut model = DeepConvLstm::new(spec.clone(), 5).unwrap();
    let mut head = DomainHead::new(toy_head_spec(), &spec, 6).unwrap();
    let (model_before, head_before) = (model.clone(), head.clone());
    let xs = random_batch(4, 24, 2, 1);
    let xt = random_batch(4, 24, 2, 2).mapv(|v| v + 0.5);
    let mut opt = RmsProp::new(RmsPropConfig::default());
    let mut head_opt = RmsProp::new(RmsPropConfig::default());
    for _ in 0..5 {
        // Zero label weights isolate the domain path.
        let g = dann_gradient(&model, &head, &xs, &[1, 2, 3, 1], &[0.0; 4], &xt, 0.0, None).unwrap();
        opt.step(model.params_mut().tensors_mut(), g.grads.tensors(), &Default::default());
        head_opt.step(head.tensors_mut(), g.head_grads.domain_tensors(), &Default::default());
    }
    assert_eq!(group_data(&model, LayerGroup::Conv(1)), group_data(&model_before, LayerGroup::Conv(1)));
    assert_eq!(group_data(&model, LayerGroup::Conv(2)), group_data(&model_before, LayerGroup::Conv(2)));
    assert_ne!(head, head_before);
}

#[test]
fn untrained_domain_head_is_near_chance() {
    let spec = toy_spec();
    let mut total = 0.0;
    for seed in 0..20 {
        let model = DeepConvLstm::new(spec.clone(), seed).unwrap();
        let head = DomainHead::new(toy_head_spec(), &spec, 100 + seed).unwrap();
        let xs = random_batch(16, 24, 2, 200 + seed);
        let xt = random_batch(16, 24, 2, 300 + seed);
        let g = dann_gradient(&model, &head, &xs, &[1; 16], &[1.0; 16], &xt, 1.0, None).unwrap();
        total += g.domain_correct as f64 / g.domain_total as f64;
    }
    let mean = total / 20.0;
    assert!((mean - 0.5).abs() <= 0.15, "mean domain accuracy {mean}");
}

#[test]
fn snapshot_decoder_rejects_truncation() {
    let model = DeepConvLstm::new(toy_spec(), 1).unwrap();
    let bytes = model.snapshot(SnapshotMeta::default()).encode();
    for cut in [0, 7, 12, bytes.len() - 1] {
        assert!(decode_tensors(&bytes[..cut]).is_err());
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_tensors(&extra).is_err());
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(seed in 0u64..1000, b in 1usize..4) {
        let model = DeepConvLstm::new(toy_spec(), seed).unwrap();
        let probs = model.forward(&random_batch(b, 24, 2, seed ^ 0xabc).mapv(|v| v * 3.0)).unwrap();
        for row in probs.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tensor_container_round_trips(
        dims in prop::collection::vec(0usize..4, 0..4),
        seed in any::<u64>(),
    ) {
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 1) % 1000) as f64 / 7.0).collect();
        let tensors = vec![SnapshotTensor { name: "conv1.weight".into(), shape: dims, data }];
        prop_assert_eq!(decode_tensors(&encode_tensors(&tensors)).unwrap(), tensors);
    }

    #[test]
    fn tensor_decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_tensors(&bytes);
    }
}
