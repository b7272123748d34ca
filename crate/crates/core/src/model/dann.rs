use ndarray::{concatenate, s, Array3, Axis};

use super::layers::{cross_entropy, grl_backward};
use super::network::{argmax_rows, Head, Params};
use super::{DeepConvLstm, DomainHead, ModelError};
use crate::ModelRng;

/// One adversarial step's losses and gradients.
pub struct DannGradient {
    /// Weighted cross-entropy of the label predictor on the source batch.
    pub label_loss: f64,
    /// Cross-entropy of the domain head over source and target windows.
    pub domain_loss: f64,
    /// `∂L_y/∂θ − λ·∂L_d/∂θ` for the feature extractor, `∂L_y/∂θ` elsewhere.
    pub grads: Params,
    /// `∂L_d/∂θ_d` for the domain head.
    pub head_grads: Head,
    pub domain_correct: usize,
    pub domain_total: usize,
}

/// Gradients of the domain-adversarial objective. Source windows feed both
/// the label predictor and the domain head; target windows only the domain
/// head. The domain head reads the feature extractor through a gradient
/// reversal layer with weight `lambda`.
#[allow(clippy::too_many_arguments)]
pub fn dann_gradient(
    model: &DeepConvLstm,
    head: &DomainHead,
    source: &Array3<f64>,
    labels: &[u16],
    weights: &[f64],
    target: &Array3<f64>,
    lambda: f64,
    rng: Option<&mut ModelRng>,
) -> Result<DannGradient, ModelError> {
    let attach = head.spec().attach_after;
    let targets = model.targets(labels)?;
    let xs = model.input_maps(source)?;
    let xt = model.input_maps(target)?;
    let ns = xs.len_of(Axis(0));

    let (fs, src_caches) = model.conv_forward(xs, 0..attach);
    let (ft, tgt_caches) = model.conv_forward(xt, 0..attach);

    let trace = model.forward_from(fs.clone(), attach, rng);
    let (label_loss, d_logits) = cross_entropy(&trace.logits, &targets, weights);
    let mut grads = model.params().zeros_like();
    let mut d_fs = model.backward_from(&trace, attach, &d_logits, &mut grads);

    let features = concatenate(Axis(0), &[fs.view(), ft.view()]).expect("matching feature shapes");
    let (domain_logits, cache) = head.forward_train(&features)?;
    let domains: Vec<usize> = (0..features.len_of(Axis(0))).map(|i| usize::from(i >= ns)).collect();
    let (domain_loss, d_domain) = cross_entropy(&domain_logits, &domains, &vec![1.0; domains.len()]);
    let domain_correct = argmax_rows(&domain_logits)
        .iter()
        .zip(&domains)
        .filter(|(p, d)| p == d)
        .count();
    let mut head_grads = head.zero_grad();
    let d_features = head.backward(&cache, &d_domain, &mut head_grads);

    if lambda != 0.0 {
        let reversed = grl_backward(&d_features, lambda);
        d_fs += &reversed.slice(s![..ns, .., .., ..]);
        let d_ft = reversed.slice(s![ns.., .., .., ..]).to_owned();
        model.conv_backward(0..attach, &tgt_caches, d_ft, &mut grads);
    }
    model.conv_backward(0..attach, &src_caches, d_fs, &mut grads);

    Ok(DannGradient {
        label_loss,
        domain_loss,
        grads,
        head_grads,
        domain_correct,
        domain_total: domains.len(),
    })
}
