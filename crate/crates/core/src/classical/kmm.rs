use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{ClassicalError, Result};

const MAX_ITERATIONS: usize = 100_000;
const STEP_TOLERANCE: f64 = 1e-11;
/// Rounding allowance on the mean band.
const BAND_SLACK: f64 = 1e-12;

/// `exp(−‖x − y‖² / 2σ²)`.
pub fn gaussian_kernel(x: ArrayView1<f64>, y: ArrayView1<f64>, sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Median pairwise distance over the pooled samples, or 1 when every point
/// coincides.
pub fn median_bandwidth(source: ArrayView2<f64>, target: ArrayView2<f64>) -> f64 {
    let rows: Vec<ArrayView1<f64>> = source.rows().into_iter().chain(target.rows()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 { *m } else { 1.0 }
}

/// Empirical mean-matching QP: minimize `½βᵀKβ − κᵀβ` subject to
/// `0 ≤ βᵢ ≤ B` and `|mean(β) − 1| ≤ ε`.
#[derive(Debug, Clone)]
pub struct KmmProblem {
    pub k: Array2<f64>,
    /// `κᵢ = (m/m′) Σⱼ k(xᵢ, x′ⱼ)` over target points `x′ⱼ`.
    pub kappa: Array1<f64>,
    pub b: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmmSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub sigma: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl KmmProblem {
    /// `epsilon` defaults to `B/√m`.
    pub fn new(
        source: ArrayView2<f64>,
        target: ArrayView2<f64>,
        sigma: f64,
        b: f64,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        let (m, mt) = (source.nrows(), target.nrows());
        if m == 0 || mt == 0 {
            return Err(ClassicalError::Invalid("source and target need at least one sample each".into()));
        }
        if source.ncols() != target.ncols() {
            return Err(ClassicalError::Invalid(format!(
                "source has {} features, target has {}",
                source.ncols(),
                target.ncols()
            )));
        }
        if source.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(ClassicalError::Invalid("samples must be finite".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ClassicalError::Invalid(format!("bandwidth must be positive, got {sigma}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(ClassicalError::Invalid(format!("B must be positive, got {b}")));
        }
        let epsilon = epsilon.unwrap_or(b / (m as f64).sqrt());
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(ClassicalError::Invalid(format!("epsilon must be non-negative, got {epsilon}")));
        }
        if b < 1.0 - epsilon {
            return Err(ClassicalError::Infeasible { b, epsilon });
        }
        let k = Array2::from_shape_fn((m, m), |(i, j)| gaussian_kernel(source.row(i), source.row(j), sigma));
        let ratio = m as f64 / mt as f64;
        let kappa = Array1::from_shape_fn(m, |i| {
            ratio * target.rows().into_iter().map(|t| gaussian_kernel(source.row(i), t, sigma)).sum::<f64>()
        });
        Ok(KmmProblem { k, kappa, b, epsilon })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let beta = ArrayView1::from(beta);
        0.5 * beta.dot(&self.k.dot(&beta)) - self.kappa.dot(&beta)
    }

    pub fn is_feasible(&self, beta: &[f64]) -> bool {
        self.check(beta).is_ok()
    }

    fn check(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.len() {
            return Err(ClassicalError::Feasibility(format!("{} weights for {} samples", beta.len(), self.len())));
        }
        if let Some((i, v)) = beta.iter().enumerate().find(|(_, v)| !(0.0..=self.b).contains(*v)) {
            return Err(ClassicalError::Feasibility(format!("beta[{i}] = {v} outside [0, {}]", self.b)));
        }
        let mean = beta.iter().sum::<f64>() / beta.len() as f64;
        if (mean - 1.0).abs() > self.epsilon + BAND_SLACK {
            return Err(ClassicalError::Feasibility(format!("mean {mean} deviates from 1 by more than {}", self.epsilon)));
        }
        Ok(())
    }

    /// Euclidean projection onto the box intersected with the mean band:
    /// `clip(v − τ, 0, B)` with the shift `τ` found by bisection.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let m = v.len() as f64;
        let lo = (m * (1.0 - self.epsilon)).max(0.0);
        let hi = m * (1.0 + self.epsilon);
        let shifted = |tau: f64| -> Vec<f64> { v.iter().map(|x| (x - tau).clamp(0.0, self.b)).collect() };
        let sum = |tau: f64| -> f64 { v.iter().map(|x| (x - tau).clamp(0.0, self.b)).sum() };
        let s0 = sum(0.0);
        if (lo..=hi).contains(&s0) {
            return shifted(0.0);
        }
        // The clipped sum is non-increasing in τ.
        let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut below, mut above, goal) = if s0 > hi { (0.0, vmax, hi) } else { (vmin - self.b, 0.0, lo) };
        for _ in 0..200 {
            let mid = 0.5 * (below + above);
            if mid == below || mid == above {
                break;
            }
            if sum(mid) > goal {
                below = mid;
            } else {
                above = mid;
            }
        }
        // Keep the endpoint on the feasible side.
        if s0 > hi { shifted(above) } else { shifted(below) }
    }

    /// Accelerated projected gradient from the uniform vector, with restart
    /// on objective increase, then a hard feasibility check.
    pub fn solve(&self) -> Result<(Vec<f64>, usize)> {
        let m = self.len();
        let lipschitz = self
            .k
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1e-12);
        let step = 1.0 / lipschitz;
        let mut beta = self.project(&vec![1.0; m]);
        let mut prev = beta.clone();
        let mut f = self.objective(&beta);
        let mut t = 1.0f64;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            let y: Vec<f64> = beta.iter().zip(&prev).map(|(b, p)| b + momentum * (b - p)).collect();
            let grad = self.k.dot(&ArrayView1::from(&y)) - &self.kappa;
            let stepped: Vec<f64> = y.iter().zip(grad.iter()).map(|(y, g)| y - step * g).collect();
            let next = self.project(&stepped);
            let f_next = self.objective(&next);
            if f_next > f && t > 1.0 {
                t = 1.0;
                prev = beta.clone();
                continue;
            }
            let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prev = std::mem::replace(&mut beta, next);
            f = f_next;
            t = t_next;
            if change < STEP_TOLERANCE {
                break;
            }
        }
        self.check(&beta)?;
        Ok((beta, iterations))
    }
}

/// Importance weights for `source` rows that match the kernel mean of
/// `target`. `sigma` defaults to the median heuristic, `epsilon` to `B/√m`.
pub fn kmm_weights(
    source: ArrayView2<f64>,
    target: ArrayView2<f64>,
    sigma: Option<f64>,
    b: f64,
    epsilon: Option<f64>,
) -> Result<KmmSolution> {
    let sigma = sigma.unwrap_or_else(|| median_bandwidth(source, target));
    let problem = KmmProblem::new(source, target, sigma, b, epsilon)?;
    let (beta, iterations) = problem.solve()?;
    Ok(KmmSolution {
        objective: problem.objective(&beta),
        beta,
        iterations,
        sigma,
        b,
        epsilon: problem.epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn projection_respects_band() {
        let source = array![[0.0], [1.0], [2.0], [3.0]];
        let p = KmmProblem::new(source.view(), source.view(), 1.0, 2.0, Some(0.1)).unwrap();
        for v in [vec![5.0, 5.0, 5.0, 5.0], vec![-1.0, 0.0, 0.1, 0.2], vec![1.0, 1.0, 1.0, 1.0]] {
            let b = p.project(&v);
            assert!(p.is_feasible(&b), "{b:?}");
        }
        assert_eq!(p.project(&[1.0, 0.9, 1.1, 1.0]), vec![1.0, 0.9, 1.1, 1.0]);
    }

    #[test]
    fn small_bound_is_infeasible() {
        let s = array![[0.0], [1.0]];
        let err = KmmProblem::new(s.view(), s.view(), 1.0, 0.5, Some(0.1)).unwrap_err();
        assert!(matches!(err, ClassicalError::Infeasible { .. }));
    }

    #[test]
    fn default_epsilon() {
        let s = array![[0.0], [1.0], [2.0], [3.0]];
        let p = KmmProblem::new(s.view(), s.view(), 1.0, 4.0, None).unwrap();
        assert_eq!(p.epsilon, 2.0);
    }

    #[test]
    fn median_of_three_points() {
        let s = array![[0.0], [1.0]];
        let t = array![[3.0]];
        // Distances 1, 3, 2.
        assert_eq!(median_bandwidth(s.view(), t.view()), 2.0);
    }
}
