use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;

/// Named parameter partition used for freezing and partial restore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerGroup {
    /// 1-based convolution layer index.
    Conv(usize),
    Recurrent,
    Output,
    /// The domain classifier attached for adversarial training.
    Domain,
}

impl fmt::Display for LayerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerGroup::Conv(k) => write!(f, "conv{k}"),
            LayerGroup::Recurrent => f.write_str("recurrent"),
            LayerGroup::Output => f.write_str("output"),
            LayerGroup::Domain => f.write_str("domain"),
        }
    }
}

impl FromStr for LayerGroup {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recurrent" => Ok(LayerGroup::Recurrent),
            "output" => Ok(LayerGroup::Output),
            "domain" => Ok(LayerGroup::Domain),
            _ => s
                .strip_prefix("conv")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(LayerGroup::Conv)
                .ok_or_else(|| ModelError::UnknownGroup(s.to_string())),
        }
    }
}

impl Serialize for LayerGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LayerGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub kernel_length: usize,
    pub feature_maps: usize,
}

/// DeepConvLSTM architecture: time-axis convolutions (valid mode, ReLU)
/// shared across sensor channels, stacked LSTMs, softmax on the last step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_length: usize,
    pub channels: usize,
    pub conv_layers: Vec<ConvLayerSpec>,
    /// Hidden units per recurrent layer.
    pub recurrent_layers: Vec<usize>,
    pub n_classes: usize,
    /// Dropout rate on recurrent-layer inputs and the output layer input.
    #[serde(default)]
    pub dropout: f64,
}

impl ModelSpec {
    /// 4 × (kernel 5, 64 maps) convolutions and 2 × 128 LSTM units.
    pub fn deep_conv_lstm(input_length: usize, channels: usize, n_classes: usize) -> Self {
        Self::with_widths(input_length, channels, n_classes, 64, 128)
    }

    /// Same topology with narrower layers.
    pub fn with_widths(
        input_length: usize,
        channels: usize,
        n_classes: usize,
        feature_maps: usize,
        hidden: usize,
    ) -> Self {
        ModelSpec {
            input_length,
            channels,
            conv_layers: vec![
                ConvLayerSpec {
                    kernel_length: 5,
                    feature_maps
                };
                4
            ],
            recurrent_layers: vec![hidden, hidden],
            n_classes,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Spec(m.to_string()));
        if self.input_length == 0 || self.channels == 0 {
            return bad("input length and channel count must be positive");
        }
        if self.conv_layers.is_empty() {
            return bad("at least one convolution layer is required");
        }
        if self
            .conv_layers
            .iter()
            .any(|c| c.kernel_length == 0 || c.feature_maps == 0)
        {
            return bad("convolution kernels and feature maps must be positive");
        }
        if self.recurrent_layers.is_empty() || self.recurrent_layers.contains(&0) {
            return bad("at least one recurrent layer with positive width is required");
        }
        if self.n_classes < 2 {
            return bad("at least two classes are required");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.time_length_after(self.conv_layers.len()).unwrap_or(0) == 0 {
            return bad("convolution stack consumes the whole window");
        }
        Ok(())
    }

    /// Time length after the first `k` convolution layers.
    pub fn time_length_after(&self, k: usize) -> Option<usize> {
        self.conv_layers[..k]
            .iter()
            .try_fold(self.input_length, |t, c| t.checked_sub(c.kernel_length - 1))
            .filter(|&t| t > 0)
    }

    pub fn layer_groups(&self) -> Vec<LayerGroup> {
        let mut out: Vec<LayerGroup> = (1..=self.conv_layers.len()).map(LayerGroup::Conv).collect();
        out.push(LayerGroup::Recurrent);
        out.push(LayerGroup::Output);
        out
    }

    pub fn conv_groups(&self) -> Vec<LayerGroup> {
        (1..=self.conv_layers.len()).map(LayerGroup::Conv).collect()
    }

    /// Hex SHA-256 over the structural fields (dropout excluded).
    pub fn hash(&self) -> String {
        let structural = serde_json::json!({
            "input_length": self.input_length,
            "channels": self.channels,
            "conv_layers": self.conv_layers,
            "recurrent_layers": self.recurrent_layers,
            "n_classes": self.n_classes,
        });
        hex::encode(Sha256::digest(structural.to_string().as_bytes()))
    }
}

/// Domain classifier attached to the feature extractor for adversarial
/// training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DannHeadSpec {
    /// Number of convolution layers forming the feature extractor; the head
    /// reads the output of `conv{attach_after}`.
    pub attach_after: usize,
    pub recurrent_units: usize,
}

impl Default for DannHeadSpec {
    fn default() -> Self {
        DannHeadSpec {
            attach_after: 2,
            recurrent_units: 128,
        }
    }
}

impl DannHeadSpec {
    pub fn validate(&self, model: &ModelSpec) -> Result<(), ModelError> {
        if self.attach_after == 0 || self.attach_after >= model.conv_layers.len() {
            return Err(ModelError::Config(format!(
                "domain head must attach after conv1..conv{} (got {})",
                model.conv_layers.len() - 1,
                self.attach_after
            )));
        }
        if self.recurrent_units == 0 {
            return Err(ModelError::Config("domain head needs recurrent units".into()));
        }
        Ok(())
    }
}
