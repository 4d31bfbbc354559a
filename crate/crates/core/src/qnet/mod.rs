//! Quantized network representation, datasets and the ideal forward pass.
//!
//! Networks are bias-free stacks of `conv2d`, `conv1d` and `linear` layers
//! with ReLU between layers and raw logits out of the last one. Weights are
//! stored as symmetric integer codes with one real scale per tensor.

pub mod dataset;
pub mod forward;
pub mod io;
pub mod quant;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::ConvGeometry;

pub use dataset::{generate_synthetic_dataset, Dataset, Sample};
pub use forward::{accuracy, argmax, ideal_forward, ideal_forward_trace};
pub use io::{load_dataset, load_network, save_dataset, save_network};
pub use quant::{max_code, quantize_weights, WeightTensor};
pub use train::{train_fixture, Fixture, TrainOptions};

/// Bit-widths accepted for weight codes.
pub const SUPPORTED_BIT_WIDTHS: [u8; 3] = [4, 6, 8];

#[derive(Debug, Error)]
pub enum QnetError {
    #[error("empty tensor")]
    EmptyTensor,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("unsupported bit-width {0} (expected 4, 6 or 8)")]
    BitWidth(u8),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("invalid dataset parameters: {0}")]
    DatasetParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QnetError>;

/// Activation shape as `[channels, height, width]`.
///
/// Linear layers see the flattened product; 1-d signals use `width = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl FeatureShape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(features: usize) -> Self {
        Self::new(features, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

impl std::str::FromStr for FeatureShape {
    type Err = QnetError;

    fn from_str(s: &str) -> Result<Self> {
        let dims: Vec<usize> = s
            .split('x')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| QnetError::Parse(format!("shape '{s}': {e}")))?;
        match dims.as_slice() {
            [c, h, w] => Ok(Self::new(*c, *h, *w)),
            [c, h] => Ok(Self::new(*c, *h, 1)),
            [f] => Ok(Self::flat(*f)),
            _ => Err(QnetError::Parse(format!(
                "shape '{s}' must have 1 to 3 dimensions"
            ))),
        }
    }
}

/// Convolution hyper-parameters shared by the 1-d and 2-d variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvParams {
    pub in_channels: usize,
    /// Number of kernels, i.e. output channels.
    pub kernels: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub stride: usize,
    /// Zero padding per side.
    pub padding: usize,
    pub dilation: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerOp {
    Conv2d(ConvParams),
    /// Kernel width is always 1 and padding applies along the height only.
    Conv1d(ConvParams),
    Linear {
        in_features: usize,
        out_features: usize,
    },
}

impl LayerOp {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerOp::Conv2d(_) => "conv2d",
            LayerOp::Conv1d(_) => "conv1d",
            LayerOp::Linear { .. } => "linear",
        }
    }

    /// Shape of the weight tensor: `[K, C, H, W]` for convolutions and
    /// `[out, in]` for linear layers.
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerOp::Conv2d(p) | LayerOp::Conv1d(p) => {
                vec![p.kernels, p.in_channels, p.kernel_height, p.kernel_width]
            }
            LayerOp::Linear {
                in_features,
                out_features,
            } => vec![out_features, in_features],
        }
    }

    pub fn weight_count(&self) -> usize {
        self.weight_shape().iter().product()
    }
}

/// A layer with its input extent resolved by shape propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub op: LayerOp,
    pub input: FeatureShape,
}

impl LayerSpec {
    /// Resolves `op` against an incoming activation shape.
    pub fn resolve(op: LayerOp, input: FeatureShape) -> Result<Self> {
        let spec = Self { op, input };
        spec.output_shape()?;
        Ok(spec)
    }

    pub fn geometry(&self) -> Option<ConvGeometry> {
        match self.op {
            LayerOp::Conv2d(p) => Some(ConvGeometry::from_params(&p, self.input, false)),
            LayerOp::Conv1d(p) => Some(ConvGeometry::from_params(&p, self.input, true)),
            LayerOp::Linear { .. } => None,
        }
    }

    pub fn output_shape(&self) -> Result<FeatureShape> {
        match self.op {
            LayerOp::Conv2d(p) | LayerOp::Conv1d(p) => {
                if p.in_channels != self.input.channels {
                    return Err(QnetError::Shape(format!(
                        "{} expects {} input channels, got {}",
                        self.op.kind_name(),
                        p.in_channels,
                        self.input.channels
                    )));
                }
                if matches!(self.op, LayerOp::Conv1d(_))
                    && (p.kernel_width != 1 || self.input.width != 1)
                {
                    return Err(QnetError::Shape(
                        "conv1d requires kernel_width = 1 and input width = 1".into(),
                    ));
                }
                let geom = self.geometry().expect("conv layer");
                geom.validate()
                    .map_err(|e| QnetError::Shape(e.to_string()))?;
                Ok(FeatureShape::new(
                    p.kernels,
                    geom.output_height(),
                    geom.output_width(),
                ))
            }
            LayerOp::Linear {
                in_features,
                out_features,
            } => {
                if in_features != self.input.len() {
                    return Err(QnetError::Shape(format!(
                        "linear expects {in_features} inputs, got {} ({})",
                        self.input.len(),
                        self.input
                    )));
                }
                if out_features == 0 {
                    return Err(QnetError::Shape("linear layer with zero outputs".into()));
                }
                Ok(FeatureShape::flat(out_features))
            }
        }
    }
}

/// Resolves a list of layer ops against an input shape.
pub fn propagate_shapes(input: FeatureShape, ops: &[LayerOp]) -> Result<Vec<LayerSpec>> {
    let mut shape = input;
    let mut specs = Vec::with_capacity(ops.len());
    for (i, op) in ops.iter().enumerate() {
        let spec = LayerSpec::resolve(*op, shape)
            .map_err(|e| QnetError::Shape(format!("layer {i}: {e}")))?;
        shape = spec.output_shape()?;
        specs.push(spec);
    }
    Ok(specs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: WeightTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedNetwork {
    pub name: String,
    pub bit_width: u8,
    /// Seed the network was produced with, if any.
    pub seed: Option<u64>,
    pub input_shape: FeatureShape,
    pub layers: Vec<Layer>,
}

impl QuantizedNetwork {
    /// Builds a network and checks that shapes compose and that every tensor
    /// matches its layer and the shared bit-width.
    pub fn new(
        name: impl Into<String>,
        input_shape: FeatureShape,
        layers: Vec<(LayerOp, WeightTensor)>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let ops: Vec<LayerOp> = layers.iter().map(|(op, _)| *op).collect();
        let specs = propagate_shapes(input_shape, &ops)?;
        let bit_width = layers
            .first()
            .map(|(_, w)| w.bit_width)
            .ok_or_else(|| QnetError::Shape("network has no layers".into()))?;
        let net = Self {
            name: name.into(),
            bit_width,
            seed,
            input_shape,
            layers: specs
                .into_iter()
                .zip(layers)
                .map(|(spec, (_, weights))| Layer { spec, weights })
                .collect(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_BIT_WIDTHS.contains(&self.bit_width) {
            return Err(QnetError::BitWidth(self.bit_width));
        }
        let mut shape = self.input_shape;
        for (i, layer) in self.layers.iter().enumerate() {
            let path = format!("layers[{i}]");
            if layer.spec.input != shape {
                return Err(QnetError::Validation {
                    path,
                    message: format!(
                        "input shape {} does not follow previous output {shape}",
                        layer.spec.input
                    ),
                });
            }
            shape = layer
                .spec
                .output_shape()
                .map_err(|e| QnetError::Validation {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            if layer.weights.bit_width != self.bit_width {
                return Err(QnetError::Validation {
                    path,
                    message: format!(
                        "bit-width {} differs from network bit-width {}",
                        layer.weights.bit_width, self.bit_width
                    ),
                });
            }
            if layer.weights.shape != layer.spec.op.weight_shape() {
                return Err(QnetError::Validation {
                    path: format!("{path}.codes"),
                    message: format!(
                        "weight shape {:?} does not match layer shape {:?}",
                        layer.weights.shape,
                        layer.spec.op.weight_shape()
                    ),
                });
            }
            layer.weights.validate().map_err(|e| match e {
                QnetError::Validation { path: p, message } => QnetError::Validation {
                    path: format!("{path}.{p}"),
                    message,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn output_shape(&self) -> FeatureShape {
        self.layers
            .last()
            .and_then(|l| l.spec.output_shape().ok())
            .unwrap_or(self.input_shape)
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.codes.len()).sum()
    }
}

/// Number of zero weight codes across all layers, and that count as a
/// fraction of all weights.
pub fn sparsity(net: &QuantizedNetwork) -> (usize, f64) {
    let zeros: usize = net
        .layers
        .iter()
        .map(|l| l.weights.codes.iter().filter(|&&c| c == 0).count())
        .sum();
    let total = net.weight_count();
    let fraction = if total == 0 {
        0.0
    } else {
        zeros as f64 / total as f64
    };
    (zeros, fraction)
}
