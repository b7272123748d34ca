use serde::{Deserialize, Serialize};

/// Constants of the adaptive reversal-weight rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaBounds {
    pub a_d_max: f64,
    pub a_d_min: f64,
    pub lambda_max: f64,
    pub lambda_mid: f64,
    pub lambda_min: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LambdaBounds {
    fn default() -> Self {
        LambdaBounds {
            a_d_max: 0.8,
            a_d_min: 0.6,
            lambda_max: 10000.0,
            lambda_mid: 10.0,
            lambda_min: 0.1,
            alpha: 1.5,
            beta: 0.9,
        }
    }
}

/// One step of the piecewise rule, clamped to `[lambda_min, lambda_max]`.
pub fn update_lambda(b: &LambdaBounds, lambda: f64, a_d: f64) -> f64 {
    let next = if a_d > b.a_d_max && lambda < b.lambda_max {
        b.alpha * lambda
    } else if a_d < b.a_d_min && lambda > b.lambda_mid {
        lambda / b.alpha
    } else if a_d < b.a_d_min && b.lambda_min < lambda && lambda < b.lambda_mid {
        b.beta * lambda
    } else {
        lambda
    };
    next.clamp(b.lambda_min, b.lambda_max)
}

/// Feedback controller that raises λ while the domain classifier is winning
/// and lowers it while the classifier is confused.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveLambdaController {
    bounds: LambdaBounds,
    lambda: f64,
}

impl AdaptiveLambdaController {
    pub fn new(bounds: LambdaBounds, initial: f64) -> Self {
        AdaptiveLambdaController {
            bounds,
            lambda: initial.clamp(bounds.lambda_min, bounds.lambda_max),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bounds(&self) -> &LambdaBounds {
        &self.bounds
    }

    pub fn update(&mut self, a_d: f64) -> f64 {
        self.lambda = update_lambda(&self.bounds, self.lambda, a_d);
        self.lambda
    }
}

/// `2 / (1 + e^(−γp))`.
pub fn ganin_lambda(p: f64, gamma: f64) -> f64 {
    2.0 / (1.0 + (-gamma * p).exp())
}

/// How the reversal weight evolves during adversarial training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSchedule {
    /// Updated once per iteration from that iteration's domain accuracy.
    Adaptive {
        #[serde(default = "default_initial")]
        initial: f64,
        #[serde(default)]
        bounds: LambdaBounds,
    },
    /// Progress-driven schedule, evaluated per mini-batch.
    Ganin {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Fixed { lambda: f64 },
}

fn default_initial() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    10.0
}

impl LambdaSchedule {
    pub fn adaptive() -> Self {
        LambdaSchedule::Adaptive {
            initial: default_initial(),
            bounds: LambdaBounds::default(),
        }
    }

    pub fn ganin() -> Self {
        LambdaSchedule::Ganin {
            gamma: default_gamma(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LambdaSchedule::Adaptive { .. } => "adaptive",
            LambdaSchedule::Ganin { .. } => "ganin",
            LambdaSchedule::Fixed { .. } => "fixed",
        }
    }
}
