use ndarray::{Array2, Array4};
use rand::SeedableRng;

use super::layers::softmax;
use super::network::{Head, HeadCache, NamedTensor, NamedTensorMut};
use super::{DannHeadSpec, ModelError, ModelSpec};
use crate::ModelRng;

/// Recurrent domain classifier reading the feature extractor's output
/// (`[B, T, C, F]` at the attach point) and emitting source/target logits.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainHead {
    spec: DannHeadSpec,
    /// Expected feature shape `(time, channels, maps)`.
    features: (usize, usize, usize),
    head: Head,
}

impl DomainHead {
    pub fn new(spec: DannHeadSpec, model: &ModelSpec, seed: u64) -> Result<Self, ModelError> {
        model.validate()?;
        spec.validate(model)?;
        let t = model
            .time_length_after(spec.attach_after)
            .ok_or_else(|| ModelError::Config("attach point consumes the window".into()))?;
        let maps = model.conv_layers[spec.attach_after - 1].feature_maps;
        let mut rng = ModelRng::seed_from_u64(seed);
        let head = Head::new(model.channels * maps, &[spec.recurrent_units], 2, &mut rng);
        Ok(DomainHead {
            spec,
            features: (t, model.channels, maps),
            head,
        })
    }

    pub fn spec(&self) -> &DannHeadSpec {
        &self.spec
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    fn check(&self, features: &Array4<f64>) -> Result<(), ModelError> {
        let (_, t, c, f) = features.dim();
        if (t, c, f) != self.features {
            return Err(ModelError::Config(format!(
                "domain head expects conv{} features {:?}, got {:?}",
                self.spec.attach_after,
                self.features,
                (t, c, f)
            )));
        }
        Ok(())
    }

    /// Domain probabilities `[B × 2]` (column 0 source, 1 target).
    pub fn forward_domain(&self, features: &Array4<f64>) -> Result<Array2<f64>, ModelError> {
        self.check(features)?;
        Ok(softmax(&self.head.forward(features, 0.0, None).0))
    }

    pub fn forward_train(&self, features: &Array4<f64>) -> Result<(Array2<f64>, HeadCache), ModelError> {
        self.check(features)?;
        Ok(self.head.forward(features, 0.0, None))
    }

    /// Gradient w.r.t. the tapped features; parameter gradients go to `grad`.
    pub fn backward(&self, cache: &HeadCache, d_logits: &Array2<f64>, grad: &mut Head) -> Array4<f64> {
        self.head.backward(cache, d_logits, grad)
    }

    pub fn zero_grad(&self) -> Head {
        self.head.zeros_like()
    }

    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        self.head.domain_tensors()
    }

    pub fn tensors_mut(&mut self) -> Vec<NamedTensorMut<'_>> {
        self.head.domain_tensors_mut()
    }
}
