//! Reference forward pass in exact real arithmetic.

use super::{LayerOp, QnetError, QuantizedNetwork, Result};
use crate::mapping::ConvGeometry;

/// Direct sliding-window convolution. `weights` is `[K, C, H, W]`, `input` is
/// `[C, X, Y]`, output is `[K, outX, outY]`.
pub fn conv_forward(geom: &ConvGeometry, weights: &[f64], input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (geom.output_height(), geom.output_width());
    let (h, w) = (geom.kernel_height, geom.kernel_width);
    let (x, y) = (geom.input_height, geom.input_width);
    let (pad_x, pad_y) = (geom.padding as isize, geom.padding_y() as isize);
    let mut out = vec![0.0; geom.kernels * oh * ow];
    for k in 0..geom.kernels {
        for ox in 0..oh {
            for oy in 0..ow {
                let mut acc = 0.0;
                for c in 0..geom.channels {
                    for kh in 0..h {
                        let ix = (ox * geom.stride + kh * geom.dilation) as isize - pad_x;
                        if ix < 0 || ix >= x as isize {
                            continue;
                        }
                        for kw in 0..w {
                            let iy = (oy * geom.stride + kw * geom.dilation) as isize - pad_y;
                            if iy < 0 || iy >= y as isize {
                                continue;
                            }
                            let wi = ((k * geom.channels + c) * h + kh) * w + kw;
                            let ii = (c * x + ix as usize) * y + iy as usize;
                            acc += weights[wi] * input[ii];
                        }
                    }
                }
                out[(k * oh + ox) * ow + oy] = acc;
            }
        }
    }
    out
}

/// `weights` is `[out, in]`.
pub fn linear_forward(weights: &[f64], in_features: usize, input: &[f64]) -> Vec<f64> {
    weights
        .chunks_exact(in_features)
        .map(|row| row.iter().zip(input).map(|(w, x)| w * x).sum())
        .collect()
}

pub(crate) fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn check_batch(net: &QuantizedNetwork, batch: &[Vec<f64>]) -> Result<()> {
    let expected = net.input_shape.len();
    if let Some((i, s)) = batch.iter().enumerate().find(|(_, s)| s.len() != expected) {
        return Err(QnetError::Shape(format!(
            "sample {i} has {} features, network expects {expected} ({})",
            s.len(),
            net.input_shape
        )));
    }
    Ok(())
}

/// Per-layer pre-activation outputs for each sample: `trace[layer][sample]`.
pub fn ideal_forward_trace(
    net: &QuantizedNetwork,
    batch: &[Vec<f64>],
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_batch(net, batch)?;
    let dequantized: Vec<Vec<f64>> = net.layers.iter().map(|l| l.weights.dequantize()).collect();
    let last = net.layers.len().saturating_sub(1);
    let mut trace = vec![Vec::with_capacity(batch.len()); net.layers.len()];
    for sample in batch {
        let mut act = sample.clone();
        for (i, (layer, w)) in net.layers.iter().zip(&dequantized).enumerate() {
            let pre = match layer.spec.op {
                LayerOp::Conv2d(_) | LayerOp::Conv1d(_) => {
                    conv_forward(&layer.spec.geometry().expect("conv"), w, &act)
                }
                LayerOp::Linear { in_features, .. } => linear_forward(w, in_features, &act),
            };
            act = pre.clone();
            trace[i].push(pre);
            if i != last {
                relu_in_place(&mut act);
            }
        }
    }
    Ok(trace)
}

/// Logits of the dequantized network, ReLU between layers.
pub fn ideal_forward(net: &QuantizedNetwork, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut trace = ideal_forward_trace(net, batch)?;
    Ok(trace.pop().unwrap_or_else(|| batch.to_vec()))
}

/// Index of the largest element; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax matches the label.
pub fn accuracy(logits: &[Vec<f64>], labels: &[usize]) -> f64 {
    if logits.is_empty() {
        return 0.0;
    }
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(l, &y)| argmax(l) == y)
        .count();
    hits as f64 / logits.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::{ConvParams, FeatureShape, WeightTensor};
    use proptest::prelude::*;

    fn wt(codes: Vec<i32>, shape: Vec<usize>) -> WeightTensor {
        WeightTensor {
            shape,
            codes,
            scale: 1.0,
            bit_width: 8,
        }
    }

    #[test]
    fn identity_linear_layer() {
        let net = QuantizedNetwork::new(
            "id",
            FeatureShape::flat(2),
            vec![(
                LayerOp::Linear {
                    in_features: 2,
                    out_features: 2,
                },
                wt(vec![1, 0, 0, 1], vec![2, 2]),
            )],
            None,
        )
        .unwrap();
        assert_eq!(
            ideal_forward(&net, &[vec![1.0, 2.0]]).unwrap(),
            vec![vec![1.0, 2.0]]
        );
    }

    #[test]
    fn conv1d_box_filter() {
        let p = ConvParams {
            in_channels: 1,
            kernels: 1,
            kernel_height: 3,
            kernel_width: 1,
            stride: 1,
            padding: 0,
            dilation: 1,
        };
        let net = QuantizedNetwork::new(
            "box",
            FeatureShape::new(1, 5, 1),
            vec![(LayerOp::Conv1d(p), wt(vec![1, 1, 1], vec![1, 1, 3, 1]))],
            None,
        )
        .unwrap();
        let out = ideal_forward(&net, &[vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        assert_eq!(out, vec![vec![6.0, 9.0, 12.0]]);
    }

    #[test]
    fn zero_input_gives_zero_logits() {
        let p = ConvParams {
            in_channels: 2,
            kernels: 3,
            kernel_height: 2,
            kernel_width: 2,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        let net = QuantizedNetwork::new(
            "z",
            FeatureShape::new(2, 3, 3),
            vec![
                (
                    LayerOp::Conv2d(p),
                    wt((0..24).map(|i| i % 7 - 3).collect(), vec![3, 2, 2, 2]),
                ),
                (
                    LayerOp::Linear {
                        in_features: 48,
                        out_features: 2,
                    },
                    wt(vec![2; 96], vec![2, 48]),
                ),
            ],
            None,
        )
        .unwrap();
        let out = ideal_forward(&net, &[vec![0.0; 18]]).unwrap();
        assert_eq!(out, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = QuantizedNetwork::new(
            "id",
            FeatureShape::flat(2),
            vec![(
                LayerOp::Linear {
                    in_features: 2,
                    out_features: 1,
                },
                wt(vec![1, 1], vec![1, 2]),
            )],
            None,
        )
        .unwrap();
        assert!(matches!(
            ideal_forward(&net, &[vec![1.0]]),
            Err(QnetError::Shape(_))
        ));
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    /// Counts valid window placements by trying every start offset.
    fn brute_force_extent(x: usize, p: usize, h: usize, s: usize, d: usize) -> usize {
        let padded = x + 2 * p;
        (0..padded)
            .filter(|start| start % s == 0 && start + d * (h - 1) < padded)
            .count()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn output_extent_matches_window_count(
            x in 1usize..20, y in 1usize..20, h in 1usize..5, w in 1usize..5,
            s in 1usize..4, p in 0usize..3, d in 1usize..3,
        ) {
            let bx = brute_force_extent(x, p, h, s, d);
            let by = brute_force_extent(y, p, w, s, d);
            prop_assume!(bx > 0 && by > 0);
            let params = ConvParams {
                in_channels: 1, kernels: 1, kernel_height: h, kernel_width: w,
                stride: s, padding: p, dilation: d,
            };
            let net = QuantizedNetwork::new(
                "p",
                FeatureShape::new(1, x, y),
                vec![(LayerOp::Conv2d(params), wt(vec![1; h * w], vec![1, 1, h, w]))],
                None,
            ).unwrap();
            let out = ideal_forward(&net, &[vec![1.0; x * y]]).unwrap();
            prop_assert_eq!(out[0].len(), bx * by);
            prop_assert_eq!(net.output_shape(), FeatureShape::new(1, bx, by));
        }
    }
}
