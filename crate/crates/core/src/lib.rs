//! Cross-subject transfer learning for multimodal wearable activity
//! recognition: a DeepConvLSTM classifier trained on one subject and
//! adapted to another by loss weighting, domain-adversarial training with an
//! adaptive reversal weight, or layer transfer with fine-tuning.

pub mod classical;
pub mod data;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod synthgen;
pub mod trainers;

/// RNG used for every seeded draw in the crate.
pub type ModelRng = rand_chacha::ChaCha8Rng;
