//! RMSProp.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{LayerGroup, NamedTensor, NamedTensorMut};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// `cache ← ρ·cache + (1−ρ)·g²;  θ ← θ − η·g / (√cache + ε)`, skipping
/// frozen groups entirely (their cache is not advanced either).
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    cache: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        RmsProp {
            config,
            cache: Vec::new(),
        }
    }

    pub fn step(
        &mut self,
        params: Vec<NamedTensorMut<'_>>,
        grads: Vec<NamedTensor<'_>>,
        frozen: &BTreeSet<LayerGroup>,
    ) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count");
        if self.cache.is_empty() {
            self.cache = grads.iter().map(|g| vec![0.0; g.data.len()]).collect();
        }
        let RmsPropConfig {
            learning_rate: lr,
            decay: rho,
            epsilon: eps,
        } = self.config;
        for ((p, g), cache) in params.into_iter().zip(grads).zip(&mut self.cache) {
            debug_assert_eq!(p.name, g.name);
            if frozen.contains(&p.group) {
                continue;
            }
            for ((w, &gv), c) in p.data.iter_mut().zip(g.data).zip(cache.iter_mut()) {
                *c = rho * *c + (1.0 - rho) * gv * gv;
                *w -= lr * gv / (c.sqrt() + eps);
            }
        }
    }
}
