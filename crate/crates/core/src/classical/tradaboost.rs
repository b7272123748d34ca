use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{ClassicalError, Result};

/// Smallest round error used when computing `βₜ`.
pub const ERROR_FLOOR: f64 = 1e-10;

pub trait Classifier {
    fn predict(&self, x: ArrayView1<f64>) -> bool;
}

pub trait WeakLearner {
    type Hypothesis: Classifier;
    /// Fit to labeled rows under a weight distribution summing to 1.
    fn fit(&self, x: ArrayView2<f64>, y: &[bool], weights: &[f64]) -> Self::Hypothesis;
}

/// Depth-1 decision tree: `x[feature] > threshold` predicts `above`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub above: bool,
}

impl Classifier for Stump {
    fn predict(&self, x: ArrayView1<f64>) -> bool {
        (x[self.feature] > self.threshold) == self.above
    }
}

/// Exhaustive weighted-error stump search.
#[derive(Debug, Clone, Copy, Default)]
pub struct StumpLearner;

impl WeakLearner for StumpLearner {
    type Hypothesis = Stump;

    fn fit(&self, x: ArrayView2<f64>, y: &[bool], weights: &[f64]) -> Stump {
        let total_pos: f64 = y.iter().zip(weights).filter(|(y, _)| **y).map(|(_, w)| w).sum();
        let total: f64 = weights.iter().sum();
        // Error of "everything true" to start.
        let mut best = (total - total_pos, Stump { feature: 0, threshold: f64::NEG_INFINITY, above: true });
        if total_pos < best.0 {
            best = (total_pos, Stump { feature: 0, threshold: f64::NEG_INFINITY, above: false });
        }
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        for f in 0..x.ncols() {
            let col = x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            // Weighted positives and negatives at or below the cut.
            let (mut pos, mut neg) = (0.0, 0.0);
            for (k, &i) in order.iter().enumerate() {
                if y[i] {
                    pos += weights[i];
                } else {
                    neg += weights[i];
                }
                let Some(&next) = order.get(k + 1) else { break };
                if col[next] == col[i] {
                    continue;
                }
                let threshold = 0.5 * (col[i] + col[next]);
                // above = true: errors are positives below plus negatives above.
                let err_up = pos + (total - total_pos - neg);
                let err_down = neg + (total_pos - pos);
                if err_up < best.0 {
                    best = (err_up, Stump { feature: f, threshold, above: true });
                }
                if err_down < best.0 {
                    best = (err_down, Stump { feature: f, threshold, above: false });
                }
            }
        }
        best.1
    }
}

/// `1 / (1 + √(2 ln n / N))` for `n` source instances and `N` rounds.
pub fn global_beta(n_source: usize, rounds: usize) -> f64 {
    1.0 / (1.0 + (2.0 * (n_source as f64).ln() / rounds as f64).sqrt())
}

/// `εₜ / (1 − εₜ)` with `εₜ` floored at [`ERROR_FLOOR`].
pub fn round_beta(error: f64) -> f64 {
    let e = error.max(ERROR_FLOOR);
    e / (1.0 - e)
}

/// One round's update: source weights (the first `n_source`) scale by
/// `β^|h−c|`, target weights by `βₜ^(−|h−c|)`.
pub fn update_weights(weights: &mut [f64], n_source: usize, mistakes: &[bool], beta: f64, beta_t: f64) {
    for (i, (w, &wrong)) in weights.iter_mut().zip(mistakes).enumerate() {
        if wrong {
            if i < n_source {
                *w *= beta;
            } else {
                *w /= beta_t;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub error: f64,
    pub beta_t: f64,
}

/// Round at which training stopped because the weak learner's target error
/// reached 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub round: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrAdaBoost<H> {
    pub hypotheses: Vec<H>,
    pub rounds: Vec<BoostRound>,
    pub beta: f64,
    pub early_stop: Option<EarlyStop>,
    /// Final weights, source first.
    pub weights: Vec<f64>,
}

impl<H: Classifier> TrAdaBoost<H> {
    /// Weighted vote of the hypotheses from the later half of the completed
    /// rounds, each weighted by `−ln βₜ`.
    pub fn predict(&self, x: ArrayView1<f64>) -> bool {
        let n = self.hypotheses.len();
        let (mut score, mut half) = (0.0, 0.0);
        for (h, r) in self.hypotheses.iter().zip(&self.rounds).skip(n / 2) {
            let w = -r.beta_t.ln();
            half += 0.5 * w;
            if h.predict(x) {
                score += w;
            }
        }
        score >= half
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, y: &[bool]) -> f64 {
        let hits = x.rows().into_iter().zip(y).filter(|(r, y)| self.predict(*r) == **y).count();
        hits as f64 / y.len().max(1) as f64
    }
}

/// Boost over labeled source rows and a small labeled target set. Round
/// error is measured on target rows only.
pub fn tradaboost<L: WeakLearner>(
    source: (ArrayView2<f64>, &[bool]),
    target: (ArrayView2<f64>, &[bool]),
    cfg: &BoostConfig,
    learner: &L,
) -> Result<TrAdaBoost<L::Hypothesis>> {
    let (xs, ys) = source;
    let (xt, yt) = target;
    let (n, m) = (xs.nrows(), xt.nrows());
    if n == 0 || m == 0 {
        return Err(ClassicalError::Invalid("need labeled source and target rows".into()));
    }
    if ys.len() != n || yt.len() != m {
        return Err(ClassicalError::Invalid("label count differs from row count".into()));
    }
    if xs.ncols() != xt.ncols() {
        return Err(ClassicalError::Invalid(format!("source has {} features, target has {}", xs.ncols(), xt.ncols())));
    }
    if cfg.rounds == 0 {
        return Err(ClassicalError::Invalid("rounds must be positive".into()));
    }
    let x = ndarray::concatenate(ndarray::Axis(0), &[xs, xt]).expect("feature counts checked");
    let y: Vec<bool> = ys.iter().chain(yt).copied().collect();
    let beta = global_beta(n, cfg.rounds);
    let mut weights = vec![1.0; n + m];
    let mut model = TrAdaBoost { hypotheses: Vec::new(), rounds: Vec::new(), beta, early_stop: None, weights: Vec::new() };
    for round in 1..=cfg.rounds {
        let total: f64 = weights.iter().sum();
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let h = learner.fit(x.view(), &y, &p);
        let mistakes: Vec<bool> = x.rows().into_iter().zip(&y).map(|(r, &c)| h.predict(r) != c).collect();
        let target_total: f64 = weights[n..].iter().sum();
        let error = weights[n..].iter().zip(&mistakes[n..]).filter(|(_, &w)| w).map(|(w, _)| w).sum::<f64>() / target_total;
        if error >= 0.5 {
            if round == 1 {
                return Err(ClassicalError::WeakLearner { error });
            }
            log::warn!("tradaboost stopped at round {round}: target error {error:.4}");
            model.early_stop = Some(EarlyStop { round, error });
            break;
        }
        let beta_t = round_beta(error);
        update_weights(&mut weights, n, &mistakes, beta, beta_t);
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(ClassicalError::Invalid(format!("weights left the positive reals in round {round}")));
        }
        model.hypotheses.push(h);
        model.rounds.push(BoostRound { error, beta_t });
    }
    model.weights = weights;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn stump_finds_separating_cut() {
        let x = array![[0.0, 5.0], [1.0, 4.0], [2.0, 1.0], [3.0, 0.0]];
        let y = [false, false, true, true];
        let s = StumpLearner.fit(x.view(), &y, &[0.25; 4]);
        for (r, &c) in x.rows().into_iter().zip(&y) {
            assert_eq!(s.predict(r), c);
        }
    }

    #[test]
    fn floor_keeps_beta_positive() {
        assert!(round_beta(0.0) > 0.0);
        assert_eq!(round_beta(0.2), 0.25);
    }
}
