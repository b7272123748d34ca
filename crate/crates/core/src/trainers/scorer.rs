use ndarray::{concatenate, Array3, Axis};
use rand::seq::SliceRandom;

use super::{TrainConfig, TrainError};
use crate::data::WindowBatches;
use crate::model::{DeepConvLstm, ModelSpec};
use crate::optim::RmsProp;
use crate::ModelRng;

/// Probabilistic source/target classifier used for instance weighting.
#[derive(Debug, Clone)]
pub struct DomainScorer {
    pub model: DeepConvLstm,
    /// Softmax temperature fitted on the held-out windows.
    pub temperature: f64,
    /// Accuracy on held-out domain-labeled windows.
    pub heldout_accuracy: f64,
}

/// Indices not held out, and held-out indices (every 5th window).
fn holdout(n: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|i| i % 5 != 4)
}

impl DomainScorer {
    /// Raw target-class probabilities for a batch.
    fn target_log_odds(&self, batch: &Array3<f64>) -> Result<Vec<f64>, TrainError> {
        let p = self.model.forward(batch)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| (r[1].max(1e-300)).ln() - (r[0].max(1e-300)).ln())
            .collect())
    }

    fn log_odds_all<W: WindowBatches>(&self, set: &W) -> Result<Vec<f64>, TrainError> {
        let idx: Vec<usize> = (0..set.window_count()).collect();
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(256) {
            out.extend(self.target_log_odds(&set.batch_values(chunk))?);
        }
        Ok(out)
    }

    /// Probability that each window comes from the target domain.
    pub fn score<W: WindowBatches>(&self, set: &W) -> Result<Vec<f64>, TrainError> {
        Ok(self
            .log_odds_all(set)?
            .into_iter()
            .map(|z| 1.0 / (1.0 + (-z / self.temperature).exp()))
            .collect())
    }
}

/// Train a two-class network (class 1 source, class 2 target) on
/// unlabeled windows from both domains. Every 5th window of each domain is
/// held out for the reported accuracy and temperature calibration.
pub fn pretrain_domain_classifier<S: WindowBatches, T: WindowBatches>(
    source: &S,
    target: &T,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<DomainScorer, TrainError> {
    cfg.validate()?;
    if source.window_count() == 0 || target.window_count() == 0 {
        return Err(TrainError::Config(
            "domain classifier needs windows from both domains".into(),
        ));
    }
    let spec = ModelSpec {
        n_classes: 2,
        ..spec.clone()
    };
    let (src_train, src_held) = holdout(source.window_count());
    let (tgt_train, tgt_held) = holdout(target.window_count());
    if src_train.is_empty() || tgt_train.is_empty() {
        return Err(TrainError::Config("too few windows to train a domain classifier".into()));
    }
    let mut model = DeepConvLstm::new(spec, cfg.seed ^ 0xD0_3A1)?;
    let mut optimizer = RmsProp::new(cfg.optimizer);
    let mut rng = cfg.stream(7);
    for iteration in 1..=cfg.max_iterations {
        let loss = fit_domain_pass(
            &mut model,
            &mut optimizer,
            &mut rng,
            source,
            &src_train,
            target,
            &tgt_train,
            cfg.batch_size,
        )?;
        if !loss.is_finite() || !model.params().all_finite() {
            return Err(TrainError::Divergence {
                iteration,
                lambda_trace: Vec::new(),
            });
        }
    }

    let mut scorer = DomainScorer {
        model,
        temperature: 1.0,
        heldout_accuracy: 0.0,
    };
    if src_held.is_empty() || tgt_held.is_empty() {
        return Ok(scorer);
    }
    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut correct = 0usize;
    for (batch, is_target) in [
        (source.batch_values(&src_held), false),
        (target.batch_values(&tgt_held), true),
    ] {
        let odds = scorer.target_log_odds(&batch)?;
        correct += odds.iter().filter(|&&o| (o > 0.0) == is_target).count();
        y.extend(std::iter::repeat_n(is_target, odds.len()));
        z.extend(odds);
    }
    scorer.heldout_accuracy = correct as f64 / z.len() as f64;
    scorer.temperature = fit_temperature(&z, &y);
    Ok(scorer)
}

/// One pass of balanced mini-batches: half source (class 1), half target
/// (class 2), cycling the smaller domain.
#[allow(clippy::too_many_arguments)]
fn fit_domain_pass<S: WindowBatches, T: WindowBatches>(
    model: &mut DeepConvLstm,
    optimizer: &mut RmsProp,
    rng: &mut ModelRng,
    source: &S,
    src_idx: &[usize],
    target: &T,
    tgt_idx: &[usize],
    batch_size: usize,
) -> Result<f64, TrainError> {
    let half = (batch_size / 2).max(1);
    let mut src = src_idx.to_vec();
    let mut tgt = tgt_idx.to_vec();
    src.shuffle(rng);
    tgt.shuffle(rng);
    let batches = src.len().max(tgt.len()).div_ceil(half);
    let mut loss = 0.0;
    for b in 0..batches {
        let pick = |pool: &[usize]| -> Vec<usize> { (0..half).map(|k| pool[(b * half + k) % pool.len()]).collect() };
        let (si, ti) = (pick(&src), pick(&tgt));
        let xs = source.batch_values(&si);
        let xt = target.batch_values(&ti);
        let x = concatenate(Axis(0), &[xs.view(), xt.view()]).expect("same window shape");
        let labels: Vec<u16> = std::iter::repeat_n(1, half).chain(std::iter::repeat_n(2, half)).collect();
        let g = model.batch_gradient(&x, &labels, &vec![1.0; 2 * half], None)?;
        loss += g.loss;
        optimizer.step(model.params_mut().tensors_mut(), g.grads.tensors(), &Default::default());
    }
    Ok(loss / batches as f64)
}

/// Temperature minimizing held-out negative log-likelihood, on a log grid.
fn fit_temperature(z: &[f64], y: &[bool]) -> f64 {
    let nll = |t: f64| -> f64 {
        z.iter()
            .zip(y)
            .map(|(&z, &is_t)| {
                let s = if is_t { z / t } else { -z / t };
                // −log σ(s), stable.
                if s > 0.0 { (-s).exp().ln_1p() } else { -s + s.exp().ln_1p() }
            })
            .sum()
    };
    (-40..=40)
        .map(|k| 10f64.powf(k as f64 / 20.0))
        .fold((1.0, f64::INFINITY), |(bt, bl), t| {
            let l = nll(t);
            if l < bl { (t, l) } else { (bt, bl) }
        })
        .0
}

/// `λᵢ = e^(κ·Lᵢ) / C` with `C` the mean of `e^(κ·Lⱼ)`, so the weights
/// average to 1.
pub fn instance_weights(scores: &[f64], kappa: f64) -> Result<Vec<f64>, TrainError> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(TrainError::Config(format!("kappa must be finite and non-negative, got {kappa}")));
    }
    if scores.is_empty() {
        return Err(TrainError::Empty("domain scores"));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(TrainError::Config(format!("domain score {s} outside [0, 1]")));
    }
    let raw: Vec<f64> = scores.iter().map(|&l| (kappa * l).exp()).collect();
    let c = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|e| e / c).collect())
}
