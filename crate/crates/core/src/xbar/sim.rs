//! Tile VMM and end-to-end simulated inference.

use rayon::prelude::*;

use super::convert::{encode_inputs, readout, AdcRange, Calibration};
use super::device::{program, reference_code, sample_devices, SampleContext, TileArray};
use super::{Result, SimConfig, XbarError};
use crate::mapping::{plan_network, InputLayout, MappingPlan, Scheme};
use crate::qnet::forward::relu_in_place;
use crate::qnet::{accuracy, ideal_forward_trace, Dataset, QuantizedNetwork};

/// `I[n] = sum_m V[m] * G[m][n]` with `G` row-major `V.len() x cols`.
pub fn tile_vmm(v: &[f64], g: &[f64], cols: usize) -> Result<Vec<f64>> {
    if cols == 0 || g.len() != v.len() * cols {
        return Err(XbarError::DimMismatch {
            expected: v.len() * cols,
            got: g.len(),
        });
    }
    let mut out = vec![0.0; cols];
    for (vm, row) in v.iter().zip(g.chunks_exact(cols)) {
        for (o, gmn) in out.iter_mut().zip(row) {
            *o += vm * gmn;
        }
    }
    Ok(out)
}

/// One read cycle of a tile: driven `(physical row, logical row)` pairs and
/// the `(pair, logical column)` outputs sensed.
#[derive(Clone, Debug)]
struct Read {
    rows: Vec<(usize, usize)>,
    cols: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct ProgrammedLayer {
    pub plan: MappingPlan,
    pub tiles: Vec<TileArray>,
    /// Siemens per unit of real weight.
    pub conductance_scale: f64,
    pub adc: Option<AdcRange>,
    reads: Vec<Vec<Read>>,
    /// Per window pass, the layer-input index feeding each logical row.
    feeds: Vec<Vec<Option<usize>>>,
    out_len: usize,
}

impl ProgrammedLayer {
    fn new(
        plan: MappingPlan,
        tiles: Vec<TileArray>,
        conductance_scale: f64,
        adc: Option<AdcRange>,
    ) -> Self {
        let reads = plan
            .read_groups
            .iter()
            .enumerate()
            .map(|(tile, groups)| {
                let block = &plan.block_columns[plan.tiles[tile].block];
                groups
                    .iter()
                    .map(|grp| Read {
                        rows: grp
                            .rows
                            .iter()
                            .enumerate()
                            .filter_map(|(p, r)| r.map(|r| (p, r)))
                            .collect(),
                        cols: grp.pairs.iter().map(|&p| (p, block[p])).collect(),
                    })
                    .collect()
            })
            .collect();
        let feeds = match &plan.layout {
            InputLayout::Direct { .. } => vec![(0..plan.rows).map(Some).collect()],
            InputLayout::Unrolled {
                geometry,
                row_source,
            } => {
                vec![row_source.iter().map(|&p| geometry.unpad(p)).collect()]
            }
            InputLayout::Sliding { geometry } => (0..geometry.output_positions())
                .map(|pos| {
                    (0..plan.rows)
                        .map(|r| geometry.unpad(geometry.window_index(pos, r)))
                        .collect()
                })
                .collect(),
        };
        let out_len = plan.cols * feeds.len();
        Self {
            plan,
            tiles,
            conductance_scale,
            adc,
            reads,
            feeds,
            out_len,
        }
    }

    /// Differential column currents for one sample's word-line voltages.
    fn currents(&self, volts: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let passes = self.feeds.len();
        let mut i_pos = vec![0.0; self.out_len];
        let mut i_neg = vec![0.0; self.out_len];
        let mut drive = vec![0.0; self.plan.rows];
        for (pass, feed) in self.feeds.iter().enumerate() {
            for (d, f) in drive.iter_mut().zip(feed) {
                *d = f.map_or(0.0, |i| volts[i]);
            }
            for (tile, reads) in self.tiles.iter().zip(&self.reads) {
                let t = tile.tile_size;
                for read in reads {
                    for &(prow, lrow) in &read.rows {
                        let v = drive[lrow];
                        if v == 0.0 {
                            continue;
                        }
                        let g = &tile.g[prow * t..(prow + 1) * t];
                        for &(pair, lcol) in &read.cols {
                            let out = lcol * passes + pass;
                            i_pos[out] += v * g[2 * pair];
                            i_neg[out] += v * g[2 * pair + 1];
                        }
                    }
                }
            }
        }
        (i_pos, i_neg)
    }
}

/// A network mapped, sampled and programmed onto tiles.
#[derive(Clone, Debug)]
pub struct ProgrammedNetwork {
    pub scheme: Scheme,
    pub layers: Vec<ProgrammedLayer>,
    pub config: SimConfig,
}

impl ProgrammedNetwork {
    /// Maps, samples and programs every layer. ADC ranges come from the
    /// noiseless pre-activations of `calibration`.
    pub fn build(
        net: &QuantizedNetwork,
        scheme: Scheme,
        config: &SimConfig,
        seed: u64,
        calibration: &[Vec<f64>],
    ) -> Result<Self> {
        let plans = plan_network(net, scheme, config.tile_size)?;
        Self::from_plans(net, plans, config, seed, calibration)
    }

    pub fn from_plans(
        net: &QuantizedNetwork,
        plans: Vec<MappingPlan>,
        config: &SimConfig,
        seed: u64,
        calibration: &[Vec<f64>],
    ) -> Result<Self> {
        config.validate()?;
        if plans.len() != net.layers.len() {
            return Err(XbarError::PlanMismatch(format!(
                "{} plans for {} layers",
                plans.len(),
                net.layers.len()
            )));
        }
        let ranges: Vec<Option<AdcRange>> = match config.io.io_bits {
            Some(_) => {
                if calibration.is_empty() {
                    return Err(XbarError::EmptyBatch);
                }
                ideal_forward_trace(net, calibration)?
                    .iter()
                    .map(|layer| AdcRange::covering(layer.iter().flatten()))
                    .collect()
            }
            None => vec![None; net.layers.len()],
        };
        let (g_on, g_off) = config.device.nominal_conductances();
        let scheme = plans.first().map_or(Scheme::SparseStaggered, |p| p.scheme);
        let layers = net
            .layers
            .par_iter()
            .zip(plans)
            .zip(ranges)
            .enumerate()
            .map(|(i, ((layer, plan), adc))| {
                let ctx = SampleContext {
                    seed,
                    layer: i,
                    keying: config.keying,
                };
                let mut tiles = sample_devices(&ctx, &plan, &config.device)?;
                program(&mut tiles, &plan, &layer.weights)?;
                let w_ref = f64::from(reference_code(&layer.weights)) * layer.weights.scale;
                Ok(ProgrammedLayer::new(
                    plan,
                    tiles,
                    (g_on - g_off) / w_ref,
                    adc,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scheme,
            layers,
            config: config.clone(),
        })
    }
}

/// Logits for one scaling group: every layer input is encoded with a single
/// scale shared by the whole batch.
pub fn simulate_forward(prog: &ProgrammedNetwork, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let io = &prog.config.io;
    let last = prog.layers.len().saturating_sub(1);
    let mut acts = batch.to_vec();
    for (i, layer) in prog.layers.iter().enumerate() {
        let expected = layer.feeds[0].iter().flatten().max().map_or(0, |m| m + 1);
        if let Some(s) = acts.iter().find(|s| s.len() < expected) {
            return Err(XbarError::DimMismatch {
                expected,
                got: s.len(),
            });
        }
        let (volts, scale) = encode_inputs(&acts, io)?;
        acts = volts
            .iter()
            .map(|v| {
                let mut y = if scale == 0.0 {
                    vec![0.0; layer.out_len]
                } else {
                    let (p, n) = layer.currents(v);
                    let cal = Calibration {
                        voltage_scale: scale,
                        conductance_scale: layer.conductance_scale,
                    };
                    readout(&p, &n, cal, None, None)?
                };
                if let (Some(bits), Some(r)) = (io.io_bits, layer.adc) {
                    for x in &mut y {
                        *x = r.quantize(*x, bits);
                    }
                }
                if i != last {
                    relu_in_place(&mut y);
                }
                Ok(y)
            })
            .collect::<Result<_>>()?;
    }
    Ok(acts)
}

/// Logits for a whole feature set, split into consecutive scaling groups of
/// `batch_size` samples.
pub fn simulate_dataset(prog: &ProgrammedNetwork, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let groups = features
        .par_chunks(prog.config.io.batch_size)
        .map(|chunk| simulate_forward(prog, chunk))
        .collect::<Result<Vec<_>>>()?;
    Ok(groups.into_iter().flatten().collect())
}

/// Test-set accuracy of `net` simulated under `scheme` and `config`.
pub fn evaluate_accuracy(
    net: &QuantizedNetwork,
    scheme: Scheme,
    config: &SimConfig,
    data: &Dataset,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(XbarError::EmptyDataset);
    }
    let features = data.features();
    let prog = ProgrammedNetwork::build(net, scheme, config, seed, &features)?;
    let logits = simulate_dataset(&prog, &features)?;
    Ok(accuracy(&logits, &data.labels()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::{ideal_forward, LayerOp, WeightTensor};
    use crate::xbar::{DeviceModel, IoConfig, NoiseKeying};
    use crate::FeatureShape;

    #[test]
    fn vmm_worked_example() {
        let i = tile_vmm(&[0.1, 0.2], &[1e-4, 2e-4, 3e-4, 4e-4], 2).unwrap();
        assert!((i[0] - 7e-5).abs() < 1e-20 && (i[1] - 1.0e-4).abs() < 1e-20);
        assert_eq!(
            tile_vmm(&[0.0, 0.0], &[1e-4, 2e-4, 3e-4, 4e-4], 2).unwrap(),
            vec![0.0, 0.0]
        );
        let g = 5e-5;
        let diag = [g, 0.0, 0.0, 0.0, g, 0.0, 0.0, 0.0, g];
        assert_eq!(
            tile_vmm(&[0.1, -0.2, 0.3], &diag, 3).unwrap(),
            vec![g * 0.1, g * -0.2, g * 0.3]
        );
        assert!(matches!(
            tile_vmm(&[0.1], &[1.0, 2.0, 3.0], 2),
            Err(XbarError::DimMismatch { .. })
        ));
    }

    fn ideal_config(t: usize) -> SimConfig {
        SimConfig {
            tile_size: t,
            io: IoConfig {
                io_bits: None,
                v_max: 0.3,
                batch_size: 3,
            },
            device: DeviceModel::ideal(),
            keying: NoiseKeying::Physical,
        }
    }

    #[test]
    fn single_weight_readout_is_exact() {
        let w = WeightTensor {
            shape: vec![1, 1],
            codes: vec![-5],
            scale: 0.25,
            bit_width: 4,
        };
        let net = QuantizedNetwork::new(
            "one",
            FeatureShape::flat(1),
            vec![(
                LayerOp::Linear {
                    in_features: 1,
                    out_features: 1,
                },
                w,
            )],
            None,
        )
        .unwrap();
        let prog =
            ProgrammedNetwork::build(&net, Scheme::SparseStaggered, &ideal_config(2), 0, &[])
                .unwrap();
        let y = simulate_forward(&prog, &[vec![1.7], vec![-0.4]]).unwrap();
        assert!((y[0][0] - (-1.25 * 1.7)).abs() < 1e-12);
        assert!((y[1][0] - (-1.25 * -0.4)).abs() < 1e-12);
    }

    #[test]
    fn noise_free_conv_network_matches_ideal_in_every_scheme() {
        let conv = crate::qnet::ConvParams {
            in_channels: 2,
            kernels: 3,
            kernel_height: 2,
            kernel_width: 2,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        let input = FeatureShape::new(2, 3, 3);
        let wc = WeightTensor {
            shape: vec![3, 2, 2, 2],
            codes: (0..24).map(|i| (i * 5 % 15) - 7).collect(),
            scale: 0.1,
            bit_width: 4,
        };
        let wl = WeightTensor {
            shape: vec![2, 48],
            codes: (0..96).map(|i| (i * 3 % 13) - 6).collect(),
            scale: 0.2,
            bit_width: 4,
        };
        let net = QuantizedNetwork::new(
            "tiny",
            input,
            vec![
                (LayerOp::Conv2d(conv), wc),
                (
                    LayerOp::Linear {
                        in_features: 48,
                        out_features: 2,
                    },
                    wl,
                ),
            ],
            None,
        )
        .unwrap();
        let batch: Vec<Vec<f64>> = (0..5)
            .map(|s| {
                (0..18)
                    .map(|i| ((i * 7 + s * 3) % 11) as f64 / 5.0 - 1.0)
                    .collect()
            })
            .collect();
        let ideal = ideal_forward(&net, &batch).unwrap();
        for scheme in Scheme::ALL {
            let prog = ProgrammedNetwork::build(&net, scheme, &ideal_config(8), 0, &batch).unwrap();
            let sim = simulate_dataset(&prog, &batch).unwrap();
            for (a, b) in sim.iter().flatten().zip(ideal.iter().flatten()) {
                assert!((a - b).abs() < 1e-9, "{scheme}: {a} vs {b}");
            }
        }
    }
}
