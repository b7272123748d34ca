//! Small-scale reference implementations of two classical instance-transfer
//! methods: Kernel Mean Matching and TrAdaBoost.

mod kmm;
mod text;
mod tradaboost;

pub use kmm::{gaussian_kernel, kmm_weights, median_bandwidth, KmmProblem, KmmSolution};
pub use text::{parse_labeled_matrix, parse_matrix};
pub use tradaboost::{
    global_beta, round_beta, tradaboost, update_weights, BoostConfig, BoostRound, Classifier, EarlyStop, Stump,
    StumpLearner, TrAdaBoost, WeakLearner, ERROR_FLOOR,
};

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("constraints are infeasible: B = {b} cannot reach a mean of 1 - {epsilon}")]
    Infeasible { b: f64, epsilon: f64 },
    #[error("solution violates constraints: {0}")]
    Feasibility(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("weak learner failed in round 1 with target error {error}")]
    WeakLearner { error: f64 },
}

pub type Result<T> = std::result::Result<T, ClassicalError>;
