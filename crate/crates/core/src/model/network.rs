use std::collections::BTreeSet;
use std::ops::Range;

use ndarray::{s, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};

use super::layers::{cross_entropy, softmax, Conv1d, ConvCache, Dense, Lstm, LstmCache};
use super::{LayerGroup, ModelError, ModelSpec};
use crate::data::WindowSet;
use crate::ModelRng;

/// A parameter tensor with its qualified name and group.
pub struct NamedTensor<'a> {
    pub name: String,
    pub group: LayerGroup,
    pub data: &'a [f64],
    pub shape: Vec<usize>,
}

pub struct NamedTensorMut<'a> {
    pub name: String,
    pub group: LayerGroup,
    pub data: &'a mut [f64],
}

/// Stacked LSTMs reading a `[B, T, C, F]` feature sequence, then a dense
/// layer on the last step's hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub recurrent: Vec<Lstm>,
    pub output: Dense,
}

pub struct HeadCache {
    feature_dim: (usize, usize, usize, usize),
    lstm: Vec<LstmCache>,
    /// Inverted-dropout masks applied to each recurrent layer's input.
    masks: Vec<Option<Array3<f64>>>,
    out_mask: Option<Array2<f64>>,
    dense_input: Array2<f64>,
}

fn dropout_mask<D: ndarray::Dimension>(
    shape: D,
    rate: f64,
    rng: Option<&mut ModelRng>,
) -> Option<ndarray::Array<f64, D>> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            Some(ndarray::Array::from_shape_simple_fn(shape, || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            }))
        }
        _ => None,
    }
}

impl Head {
    pub fn new<R: Rng>(input_dim: usize, hidden: &[usize], outputs: usize, rng: &mut R) -> Self {
        let mut recurrent = Vec::with_capacity(hidden.len());
        let mut d = input_dim;
        for &h in hidden {
            recurrent.push(Lstm::new(d, h, rng));
            d = h;
        }
        Head {
            recurrent,
            output: Dense::new(d, outputs, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Head {
            recurrent: self.recurrent.iter().map(Lstm::zeros_like).collect(),
            output: self.output.zeros_like(),
        }
    }

    /// Returns logits `[B × outputs]`. Dropout is active only when an RNG
    /// is supplied.
    pub fn forward(
        &self,
        features: &Array4<f64>,
        dropout: f64,
        mut rng: Option<&mut ModelRng>,
    ) -> (Array2<f64>, HeadCache) {
        let (b, t, c, f) = features.dim();
        let mut seq = features
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, t, c * f))
            .expect("contiguous");
        let mut caches = Vec::with_capacity(self.recurrent.len());
        let mut masks = Vec::with_capacity(self.recurrent.len());
        for layer in &self.recurrent {
            let mask = dropout_mask(seq.raw_dim(), dropout, rng.as_deref_mut());
            if let Some(m) = &mask {
                seq *= m;
            }
            masks.push(mask);
            let cache = layer.forward(seq);
            seq = cache.outputs();
            caches.push(cache);
        }
        let mut last = caches.last().expect("at least one layer").last().clone();
        let out_mask = dropout_mask(last.raw_dim(), dropout, rng);
        if let Some(m) = &out_mask {
            last *= m;
        }
        let logits = self.output.forward(&last.view());
        (
            logits,
            HeadCache {
                feature_dim: (b, t, c, f),
                lstm: caches,
                masks,
                out_mask,
                dense_input: last,
            },
        )
    }

    pub fn backward(&self, cache: &HeadCache, d_logits: &Array2<f64>, grad: &mut Head) -> Array4<f64> {
        let (b, t, c, f) = cache.feature_dim;
        let mut d_last = self
            .output
            .backward(&cache.dense_input.view(), d_logits, &mut grad.output);
        if let Some(m) = &cache.out_mask {
            d_last *= m;
        }
        let top = self.recurrent.len() - 1;
        let mut d_seq = Array3::zeros((b, t, self.recurrent[top].hidden()));
        d_seq.slice_mut(s![.., t - 1, ..]).assign(&d_last);
        for (i, layer) in self.recurrent.iter().enumerate().rev() {
            d_seq = layer.backward(&cache.lstm[i], &d_seq, &mut grad.recurrent[i]);
            if let Some(m) = &cache.masks[i] {
                d_seq *= m;
            }
        }
        d_seq.into_shape_with_order((b, t, c, f)).expect("contiguous")
    }

    fn named<'a>(
        &'a self,
        prefix: &str,
        recurrent: LayerGroup,
        output: LayerGroup,
        out: &mut Vec<NamedTensor<'a>>,
    ) {
        for (i, layer) in self.recurrent.iter().enumerate() {
            for t in layer.tensors() {
                out.push(NamedTensor {
                    name: format!("{prefix}recurrent{}.{}", i + 1, t.name),
                    group: recurrent,
                    data: t.data,
                    shape: t.shape,
                });
            }
        }
        for t in self.output.tensors() {
            out.push(NamedTensor {
                name: format!("{prefix}output.{}", t.name),
                group: output,
                data: t.data,
                shape: t.shape,
            });
        }
    }

    fn named_mut<'a>(
        &'a mut self,
        prefix: &str,
        recurrent: LayerGroup,
        output: LayerGroup,
        out: &mut Vec<NamedTensorMut<'a>>,
    ) {
        for (i, layer) in self.recurrent.iter_mut().enumerate() {
            for t in layer.tensors_mut() {
                out.push(NamedTensorMut {
                    name: format!("{prefix}recurrent{}.{}", i + 1, t.name),
                    group: recurrent,
                    data: t.data,
                });
            }
        }
        for t in self.output.tensors_mut() {
            out.push(NamedTensorMut {
                name: format!("{prefix}output.{}", t.name),
                group: output,
                data: t.data,
            });
        }
    }

    /// Tensors of a domain head (all in [`LayerGroup::Domain`]).
    pub fn domain_tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        self.named("domain.", LayerGroup::Domain, LayerGroup::Domain, &mut out);
        out
    }

    pub fn domain_tensors_mut(&mut self) -> Vec<NamedTensorMut<'_>> {
        let mut out = Vec::new();
        self.named_mut("domain.", LayerGroup::Domain, LayerGroup::Domain, &mut out);
        out
    }
}

/// Parameters of the label network; also used as its gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub convs: Vec<Conv1d>,
    pub head: Head,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Params {
            convs: self.convs.iter().map(Conv1d::zeros_like).collect(),
            head: self.head.zeros_like(),
        }
    }

    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        for (i, conv) in self.convs.iter().enumerate() {
            for t in conv.tensors() {
                out.push(NamedTensor {
                    name: format!("conv{}.{}", i + 1, t.name),
                    group: LayerGroup::Conv(i + 1),
                    data: t.data,
                    shape: t.shape,
                });
            }
        }
        self.head
            .named("", LayerGroup::Recurrent, LayerGroup::Output, &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<NamedTensorMut<'_>> {
        let mut out = Vec::new();
        for (i, conv) in self.convs.iter_mut().enumerate() {
            for t in conv.tensors_mut() {
                out.push(NamedTensorMut {
                    name: format!("conv{}.{}", i + 1, t.name),
                    group: LayerGroup::Conv(i + 1),
                    data: t.data,
                });
            }
        }
        self.head
            .named_mut("", LayerGroup::Recurrent, LayerGroup::Output, &mut out);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Everything the backward pass needs from one training forward pass.
pub struct ForwardTrace {
    pub conv: Vec<ConvCache>,
    pub head: HeadCache,
    pub logits: Array2<f64>,
}

/// Loss, gradients and predictions of one mini-batch.
pub struct BatchGradient {
    pub loss: f64,
    pub grads: Params,
    pub probs: Array2<f64>,
}

/// The DeepConvLSTM label network.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepConvLstm {
    spec: ModelSpec,
    params: Params,
    frozen: BTreeSet<LayerGroup>,
}

impl DeepConvLstm {
    /// Seeded initialization: fan-in uniform conv and input weights,
    /// orthogonal recurrent weights, zero biases (forget gate 1).
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ModelRng::seed_from_u64(seed);
        let mut convs = Vec::with_capacity(spec.conv_layers.len());
        let mut in_maps = 1;
        for layer in &spec.conv_layers {
            convs.push(Conv1d::new(layer.kernel_length, in_maps, layer.feature_maps, &mut rng));
            in_maps = layer.feature_maps;
        }
        let head = Head::new(
            spec.channels * in_maps,
            &spec.recurrent_layers,
            spec.n_classes,
            &mut rng,
        );
        Ok(DeepConvLstm {
            spec,
            params: Params { convs, head },
            frozen: BTreeSet::new(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn frozen(&self) -> &BTreeSet<LayerGroup> {
        &self.frozen
    }

    /// Exclude `groups` from subsequent optimizer steps. Replaces any
    /// earlier freeze set.
    pub fn freeze(&mut self, groups: &[LayerGroup]) -> Result<(), ModelError> {
        let known = self.spec.layer_groups();
        if let Some(g) = groups.iter().find(|g| !known.contains(g)) {
            return Err(ModelError::UnknownGroup(g.to_string()));
        }
        self.frozen = groups.iter().copied().collect();
        Ok(())
    }

    /// `[B × L × C]` → `[B × L × C × 1]`, checking dimensions.
    pub fn input_maps(&self, batch: &Array3<f64>) -> Result<Array4<f64>, ModelError> {
        let (b, l, c) = batch.dim();
        if l != self.spec.input_length {
            return Err(ModelError::Dimension {
                axis: "time",
                expected: self.spec.input_length,
                found: l,
            });
        }
        if c != self.spec.channels {
            return Err(ModelError::Dimension {
                axis: "channel",
                expected: self.spec.channels,
                found: c,
            });
        }
        Ok(batch
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, l, c, 1))
            .expect("contiguous"))
    }

    pub fn conv_forward(&self, mut x: Array4<f64>, layers: Range<usize>) -> (Array4<f64>, Vec<ConvCache>) {
        let mut caches = Vec::with_capacity(layers.len());
        for k in layers {
            let (out, cache) = self.params.convs[k].forward(x);
            caches.push(cache);
            x = out;
        }
        (x, caches)
    }

    /// Backpropagate through conv layers `layers` (caches in forward order).
    pub fn conv_backward(
        &self,
        layers: Range<usize>,
        caches: &[ConvCache],
        mut d: Array4<f64>,
        grads: &mut Params,
    ) -> Array4<f64> {
        for (k, cache) in layers.zip(caches).rev() {
            d = self.params.convs[k].backward(cache, &d, &mut grads.convs[k]);
        }
        d
    }

    /// Forward from the output of conv layer `first_conv` (0 = raw input
    /// maps) to the logits.
    pub fn forward_from(
        &self,
        x: Array4<f64>,
        first_conv: usize,
        rng: Option<&mut ModelRng>,
    ) -> ForwardTrace {
        let n = self.params.convs.len();
        let (features, conv) = self.conv_forward(x, first_conv..n);
        let (logits, head) = self.params.head.forward(&features, self.spec.dropout, rng);
        ForwardTrace { conv, head, logits }
    }

    /// Backward counterpart of [`forward_from`](Self::forward_from);
    /// returns the gradient w.r.t. its input.
    pub fn backward_from(
        &self,
        trace: &ForwardTrace,
        first_conv: usize,
        d_logits: &Array2<f64>,
        grads: &mut Params,
    ) -> Array4<f64> {
        let d = self.params.head.backward(&trace.head, d_logits, &mut grads.head);
        self.conv_backward(first_conv..self.params.convs.len(), &trace.conv, d, grads)
    }

    /// Class probabilities `[B × n_classes]` (inference mode).
    pub fn forward(&self, batch: &Array3<f64>) -> Result<Array2<f64>, ModelError> {
        let x = self.input_maps(batch)?;
        Ok(softmax(&self.forward_from(x, 0, None).logits))
    }

    /// Time length after each convolution layer for a given batch.
    pub fn shape_trace(&self, batch: &Array3<f64>) -> Result<Vec<usize>, ModelError> {
        let mut x = self.input_maps(batch)?;
        let mut out = Vec::new();
        for conv in &self.params.convs {
            x = conv.forward(x).0;
            out.push(x.len_of(Axis(1)));
        }
        Ok(out)
    }

    /// Weighted cross-entropy loss and gradients for a labeled batch.
    /// `labels` are class ids `1..=n_classes`.
    pub fn batch_gradient(
        &self,
        batch: &Array3<f64>,
        labels: &[u16],
        weights: &[f64],
        rng: Option<&mut ModelRng>,
    ) -> Result<BatchGradient, ModelError> {
        let targets = self.targets(labels)?;
        let x = self.input_maps(batch)?;
        let trace = self.forward_from(x, 0, rng);
        let (loss, d_logits) = cross_entropy(&trace.logits, &targets, weights);
        let mut grads = self.params.zeros_like();
        self.backward_from(&trace, 0, &d_logits, &mut grads);
        Ok(BatchGradient {
            loss,
            grads,
            probs: softmax(&trace.logits),
        })
    }

    pub(crate) fn targets(&self, labels: &[u16]) -> Result<Vec<usize>, ModelError> {
        labels
            .iter()
            .map(|&l| {
                if l == 0 || l as usize > self.spec.n_classes {
                    Err(ModelError::Label(l))
                } else {
                    Ok(l as usize - 1)
                }
            })
            .collect()
    }

    /// Predicted class ids for every window, in batches.
    pub fn predict(&self, set: &WindowSet, batch_size: usize) -> Result<Vec<u16>, ModelError> {
        let mut out = Vec::with_capacity(set.len());
        let idx: Vec<usize> = (0..set.len()).collect();
        for chunk in idx.chunks(batch_size.max(1)) {
            let probs = self.forward(&set.batch(chunk))?;
            out.extend(argmax_rows(&probs).into_iter().map(|c| c as u16 + 1));
        }
        Ok(out)
    }
}

pub fn argmax_rows(probs: &Array2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}
