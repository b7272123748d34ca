#![allow(dead_code)]

use hartl_core::model::{dann_gradient, DannHeadSpec, DeepConvLstm, DomainHead, LayerGroup, ModelSpec};
use hartl_core::ModelRng;
use ndarray::Array3;
use rand::{Rng, SeedableRng};

pub fn toy_spec() -> ModelSpec {
    ModelSpec::with_widths(24, 2, 3, 3, 4)
}

pub fn toy_head_spec() -> DannHeadSpec {
    DannHeadSpec {
        attach_after: 2,
        recurrent_units: 4,
    }
}

pub fn random_batch(b: usize, l: usize, c: usize, seed: u64) -> Array3<f64> {
    let mut rng = ModelRng::seed_from_u64(seed);
    Array3::from_shape_simple_fn((b, l, c), || rng.random_range(-1.0..1.0))
}

fn objective(model: &DeepConvLstm, head: &DomainHead, xs: &Array3<f64>, ys: &[u16], xt: &Array3<f64>, lambda: f64) -> f64 {
    let g = dann_gradient(model, head, xs, ys, &vec![1.0; ys.len()], xt, lambda, None).unwrap();
    g.label_loss - lambda * g.domain_loss
}

/// Norm-wise relative error between the analytic feature-extractor
/// gradient and central differences of `L_y − λ·L_d`, per conv group.
pub fn grl_relative_errors(lambda: f64, step: f64) -> Vec<(LayerGroup, f64)> {
    let spec = toy_spec();
    let mut model = DeepConvLstm::new(spec.clone(), 11).unwrap();
    let head = DomainHead::new(toy_head_spec(), &spec, 12).unwrap();
    let xs = random_batch(3, 24, 2, 13);
    let xt = random_batch(3, 24, 2, 14).mapv(|v| 0.5 * v + 0.3);
    let ys = [1u16, 2, 3];
    let analytic = dann_gradient(&model, &head, &xs, &ys, &[1.0; 3], &xt, lambda, None).unwrap();
    let grads: Vec<(String, LayerGroup, Vec<f64>)> = analytic
        .grads
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.group, t.data.to_vec()))
        .collect();

    let mut out = Vec::new();
    for group in [LayerGroup::Conv(1), LayerGroup::Conv(2)] {
        let (mut diff2, mut norm_a, mut norm_n) = (0.0, 0.0f64, 0.0f64);
        for (name, _, a) in grads.iter().filter(|(_, g, _)| *g == group) {
            for i in 0..a.len() {
                let orig = value(&model, name, i);
                set(&mut model, name, i, orig + step);
                let up = objective(&model, &head, &xs, &ys, &xt, lambda);
                set(&mut model, name, i, orig - step);
                let down = objective(&model, &head, &xs, &ys, &xt, lambda);
                set(&mut model, name, i, orig);
                let numeric = (up - down) / (2.0 * step);
                diff2 += (a[i] - numeric).powi(2);
                norm_a += a[i] * a[i];
                norm_n += numeric * numeric;
            }
        }
        let scale = norm_a.sqrt().max(norm_n.sqrt()).max(1e-300);
        out.push((group, diff2.sqrt() / scale));
    }
    out
}

fn value(model: &DeepConvLstm, name: &str, i: usize) -> f64 {
    model.params().tensors().into_iter().find(|t| t.name == name).unwrap().data[i]
}

fn set(model: &mut DeepConvLstm, name: &str, i: usize, v: f64) {
    model.params_mut().tensors_mut().into_iter().find(|t| t.name == name).unwrap().data[i] = v;
}

/// Small shifted synthetic split: 3 classes, 4 channels.
pub fn tiny_split(seq_length: usize) -> (hartl_core::synthgen::ShiftSpec, Vec<hartl_core::data::SensorRecording>, hartl_core::data::DomainSplit) {
    let mut spec = hartl_core::synthgen::ShiftSpec::seeded(3, 4, 77);
    spec.seq_length = seq_length;
    spec.shift.offset = vec![0.6, -0.6, 0.6, -0.6];
    spec.target_seed = Some(78);
    let recs = hartl_core::synthgen::generate_split_runs(&spec).unwrap();
    let split = hartl_core::data::build_split(&recs, &spec.split_spec()).unwrap();
    (spec, recs, split)
}

pub fn tiny_model() -> ModelSpec {
    ModelSpec::with_widths(24, 4, 3, 4, 8)
}
