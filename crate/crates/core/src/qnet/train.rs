//! Desk-scale fixture trainer.
//!
//! Plain mini-batch gradient descent on softmax cross-entropy with an L1
//! penalty, followed by per-tensor post-hoc quantization. Single-threaded so
//! a seed always reproduces the same weights bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;

use super::forward::{conv_forward, linear_forward, relu_in_place};
use super::{
    accuracy, generate_synthetic_dataset, ideal_forward, propagate_shapes, quantize_weights,
    ConvParams, Dataset, FeatureShape, LayerOp, LayerSpec, QnetError, QuantizedNetwork, Result,
};
use crate::rng;

const INIT_DOMAIN: u64 = 0x696e_6974_0000_0001;
const SHUFFLE_DOMAIN: u64 = 0x7368_7566_0000_0002;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L1 penalty coefficient on every weight.
    pub l1: f64,
    pub bits: u8,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.02,
            batch_size: 32,
            l1: 5e-4,
            bits: 4,
        }
    }
}

struct FloatLayer {
    spec: LayerSpec,
    weights: Vec<f64>,
}

impl FloatLayer {
    fn forward(&self, input: &[f64]) -> Vec<f64> {
        match self.spec.op {
            LayerOp::Conv2d(_) | LayerOp::Conv1d(_) => {
                conv_forward(&self.spec.geometry().expect("conv"), &self.weights, input)
            }
            LayerOp::Linear { in_features, .. } => {
                linear_forward(&self.weights, in_features, input)
            }
        }
    }

    /// Accumulates the weight gradient into `grad` and returns the input gradient.
    fn backward(&self, input: &[f64], d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut d_in = vec![0.0; input.len()];
        match self.spec.op {
            LayerOp::Linear { in_features, .. } => {
                for (o, &d) in d_out.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = o * in_features;
                    for i in 0..in_features {
                        grad[row + i] += d * input[i];
                        d_in[i] += d * self.weights[row + i];
                    }
                }
            }
            LayerOp::Conv2d(_) | LayerOp::Conv1d(_) => {
                let g = self.spec.geometry().expect("conv");
                let (oh, ow) = (g.output_height(), g.output_width());
                let (h, w) = (g.kernel_height, g.kernel_width);
                let (x, y) = (g.input_height as isize, g.input_width as isize);
                for k in 0..g.kernels {
                    for ox in 0..oh {
                        for oy in 0..ow {
                            let d = d_out[(k * oh + ox) * ow + oy];
                            if d == 0.0 {
                                continue;
                            }
                            for c in 0..g.channels {
                                for kh in 0..h {
                                    let ix = (ox * g.stride + kh * g.dilation) as isize
                                        - g.padding as isize;
                                    if ix < 0 || ix >= x {
                                        continue;
                                    }
                                    for kw in 0..w {
                                        let iy = (oy * g.stride + kw * g.dilation) as isize
                                            - g.padding_y() as isize;
                                        if iy < 0 || iy >= y {
                                            continue;
                                        }
                                        let wi = ((k * g.channels + c) * h + kh) * w + kw;
                                        let ii = (c * g.input_height + ix as usize) * g.input_width
                                            + iy as usize;
                                        grad[wi] += d * input[ii];
                                        d_in[ii] += d * self.weights[wi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        d_in
    }
}

fn softmax_grad(logits: &[f64], label: usize) -> Vec<f64> {
    let peak = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.iter()
        .enumerate()
        .map(|(i, e)| e / total - if i == label { 1.0 } else { 0.0 })
        .collect()
}

/// Trains `arch` on `data` and returns the quantized result.
pub fn train_fixture(
    seed: u64,
    arch: &[LayerOp],
    data: &Dataset,
    opts: &TrainOptions,
) -> Result<QuantizedNetwork> {
    let specs = propagate_shapes(data.shape, arch)?;
    let out = specs
        .last()
        .ok_or_else(|| QnetError::Shape("empty architecture".into()))?
        .output_shape()?;
    if out.len() != data.class_count {
        return Err(QnetError::Shape(format!(
            "architecture emits {} logits for {} classes",
            out.len(),
            data.class_count
        )));
    }
    if data.is_empty() || opts.batch_size == 0 {
        return Err(QnetError::DatasetParams(
            "empty training set or zero batch size".into(),
        ));
    }

    let mut init = rng::seeded(seed, INIT_DOMAIN);
    let mut layers: Vec<FloatLayer> = specs
        .into_iter()
        .map(|spec| {
            let shape = spec.op.weight_shape();
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let weights = (0..spec.op.weight_count())
                .map(|_| init.random_range(-bound..bound))
                .collect();
            FloatLayer { spec, weights }
        })
        .collect();

    let last = layers.len() - 1;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng::keyed_stream(seed, SHUFFLE_DOMAIN, epoch as u64));
        for chunk in order.chunks(opts.batch_size) {
            let mut grads: Vec<Vec<f64>> =
                layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
            for &idx in chunk {
                let sample = &data.samples[idx];
                // inputs[i] is the (post-ReLU) input of layer i; pre[i] its pre-activation
                let mut inputs = Vec::with_capacity(layers.len());
                let mut pre = Vec::with_capacity(layers.len());
                let mut act = sample.features.clone();
                for (i, layer) in layers.iter().enumerate() {
                    let z = layer.forward(&act);
                    inputs.push(std::mem::replace(&mut act, z.clone()));
                    if i != last {
                        relu_in_place(&mut act);
                    }
                    pre.push(z);
                }
                let mut delta = softmax_grad(&act, sample.label);
                for i in (0..layers.len()).rev() {
                    if i != last {
                        for (d, z) in delta.iter_mut().zip(&pre[i]) {
                            if *z <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    delta = layers[i].backward(&inputs[i], &delta, &mut grads[i]);
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for (layer, grad) in layers.iter_mut().zip(&grads) {
                for (w, g) in layer.weights.iter_mut().zip(grad) {
                    let l1 = if *w > 0.0 {
                        opts.l1
                    } else if *w < 0.0 {
                        -opts.l1
                    } else {
                        0.0
                    };
                    *w -= opts.learning_rate * (g * inv + l1);
                }
            }
        }
    }

    let quantized = layers
        .iter()
        .map(|l| {
            Ok((
                l.spec.op,
                quantize_weights(&l.weights, &l.spec.op.weight_shape(), opts.bits)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    QuantizedNetwork::new(
        format!("fixture-s{seed}"),
        data.shape,
        quantized,
        Some(seed),
    )
}

/// The standard desk-scale fixture: 4-class blobs on an 8x8 single-channel
/// grid, a 3x3 convolution with four kernels and a linear classifier.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub network: QuantizedNetwork,
    pub train: Dataset,
    pub test: Dataset,
    /// Ideal accuracy of the quantized network on `test`.
    pub ideal_accuracy: f64,
}

impl Fixture {
    pub const CLASSES: usize = 4;
    pub const SHAPE: FeatureShape = FeatureShape::new(1, 8, 8);
    pub const TRAIN_SAMPLES: usize = 1200;
    pub const TEST_SAMPLES: usize = 800;

    pub fn architecture() -> Vec<LayerOp> {
        vec![
            LayerOp::Conv2d(ConvParams {
                in_channels: 1,
                kernels: 4,
                kernel_height: 3,
                kernel_width: 3,
                stride: 1,
                padding: 0,
                dilation: 1,
            }),
            LayerOp::Linear {
                in_features: 4 * 6 * 6,
                out_features: Self::CLASSES,
            },
        ]
    }

    pub fn build(seed: u64) -> Result<Self> {
        Self::build_with(seed, &TrainOptions::default())
    }

    pub fn build_with(seed: u64, opts: &TrainOptions) -> Result<Self> {
        let train = generate_synthetic_dataset(
            rng::fold_key(&[seed, 1]),
            Self::TRAIN_SAMPLES,
            Self::CLASSES,
            Self::SHAPE,
        )?;
        let test = generate_synthetic_dataset(
            rng::fold_key(&[seed, 2]),
            Self::TEST_SAMPLES,
            Self::CLASSES,
            Self::SHAPE,
        )?;
        let network = train_fixture(seed, &Self::architecture(), &train, opts)?;
        let logits = ideal_forward(&network, &test.features())?;
        let ideal_accuracy = accuracy(&logits, &test.labels());
        Ok(Self {
            network,
            train,
            test,
            ideal_accuracy,
        })
    }
}
