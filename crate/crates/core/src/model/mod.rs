//! DeepConvLSTM, the adversarial domain head, gradient reversal and
//! parameter snapshots.

mod dann;
mod domain;
pub mod layers;
mod network;
mod snapshot;
mod spec;

pub use dann::{dann_gradient, DannGradient};
pub use domain::DomainHead;
pub use layers::{grl_backward, grl_forward};
pub use network::{
    argmax_rows, BatchGradient, DeepConvLstm, ForwardTrace, Head, HeadCache, NamedTensor,
    NamedTensorMut, Params,
};
pub use snapshot::{
    decode_tensors, encode_tensors, group_of, ParameterSnapshot, SnapshotManifest, SnapshotMeta,
    SnapshotTensor,
};
pub use spec::{ConvLayerSpec, DannHeadSpec, LayerGroup, ModelSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("{axis} axis: expected {expected}, found {found}")]
    Dimension {
        axis: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown layer group {0:?}")]
    UnknownGroup(String),
    #[error("snapshot group {0} is structurally incompatible with the model")]
    Incompatible(String),
    #[error("label {0} is outside the model's classes")]
    Label(u16),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("io error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
}
