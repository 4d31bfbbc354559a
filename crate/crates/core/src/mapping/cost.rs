//! Device, tile and read-cycle accounting.
//!
//! Read cycles (RWO) follow one rule for every scheme: tiles of the same row
//! group sit on different output columns and are read in parallel, row groups
//! are read one after another, and within a tile each distinct word-line
//! routing costs its own cycle. Sliding (dense-kernel) layouts repeat all of
//! that once per output position. Programming writes are reported separately
//! and always equal the allocated device count.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::equations::{
    dense_devices_closed_form, dense_steps_closed_form, sparse_devices_closed_form, EqValue,
};
use super::plan::{plan_layer, MappingPlan};
use super::{ConvGeometry, MappingError, Scheme};
use crate::qnet::{Layer, LayerOp, QuantizedNetwork};

/// `ceil(rows / t) * ceil(cols / t)`.
pub fn tile_count(rows: usize, cols: usize, t: usize) -> usize {
    rows.div_ceil(t) * cols.div_ceil(t)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Required devices (RD).
    pub rd: u64,
    pub tiles: u64,
    /// Read cycles per inference sample (RWO).
    pub rwo: u64,
    pub programming_writes: u64,
    /// Closed-form staggered device count, for convolutions.
    pub eq_devices_sparse: Option<EqValue>,
    /// Closed-form dense-kernel device count, for convolutions.
    pub eq_devices_dense: Option<u64>,
    /// Closed-form dense-kernel step count, for convolutions.
    pub eq_steps_dense: Option<EqValue>,
    /// Set when either rational formula divides inexactly.
    pub remainder_flag: bool,
}

impl CostReport {
    fn with_equations(mut self, geometry: Option<&ConvGeometry>) -> Self {
        if let Some(g) = geometry {
            let sparse_cf = sparse_devices_closed_form(g);
            let steps_cf = dense_steps_closed_form(g);
            self.remainder_flag = sparse_cf.remainder_flag() || steps_cf.remainder_flag();
            self.eq_devices_sparse = Some(sparse_cf);
            self.eq_devices_dense = Some(dense_devices_closed_form(g));
            self.eq_steps_dense = Some(steps_cf);
        }
        self
    }

    /// The closed-form device count that corresponds to `scheme`.
    pub fn eq_formula_devices(&self, scheme: Scheme) -> Option<EqValue> {
        match scheme {
            Scheme::SparseStaggered => self.eq_devices_sparse,
            Scheme::DenseRouted | Scheme::DenseKernel => {
                self.eq_devices_dense.map(|v| EqValue::integer(v as i128))
            }
        }
    }

    fn accumulate(&mut self, other: &CostReport) {
        self.rd += other.rd;
        self.tiles += other.tiles;
        self.rwo += other.rwo;
        self.programming_writes += other.programming_writes;
        self.eq_devices_sparse =
            sum_opt(self.eq_devices_sparse, other.eq_devices_sparse, |a, b| {
                a + b
            });
        self.eq_devices_dense =
            sum_opt(self.eq_devices_dense, other.eq_devices_dense, |a, b| a + b);
        self.eq_steps_dense = sum_opt(self.eq_steps_dense, other.eq_steps_dense, |a, b| a + b);
        self.remainder_flag |= other.remainder_flag;
    }
}

fn sum_opt<T>(a: Option<T>, b: Option<T>, f: impl Fn(T, T) -> T) -> Option<T> {
    match (a, b) {
        (Some(a), Some(b)) => Some(f(a, b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Constructive cost of one mapped layer.
pub fn cost(plan: &MappingPlan) -> CostReport {
    let mut per_group: BTreeMap<usize, usize> = BTreeMap::new();
    for (slot, groups) in plan.tiles.iter().zip(&plan.read_groups) {
        let e = per_group.entry(slot.row_group).or_default();
        *e = (*e).max(groups.len());
    }
    let cycles: usize = per_group.values().sum();
    let rd = plan.device_count() as u64;
    CostReport {
        rd,
        tiles: plan.tiles.len() as u64,
        rwo: (cycles * plan.layout.window_reads()) as u64,
        programming_writes: rd,
        ..Default::default()
    }
    .with_equations(plan.layout.geometry())
}

/// Per-layer reports and their sum.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkCost {
    pub layers: Vec<CostReport>,
    pub total: CostReport,
}

impl NetworkCost {
    fn from_layers(layers: Vec<CostReport>) -> Self {
        let mut total = CostReport::default();
        for l in &layers {
            total.accumulate(l);
        }
        Self { layers, total }
    }
}

pub fn network_cost(plans: &[MappingPlan]) -> NetworkCost {
    NetworkCost::from_layers(plans.iter().map(cost).collect())
}

/// Full-region placement: every cell gets a pair.
fn full_region(rows: usize, cols: usize, t: usize, window_reads: usize) -> CostReport {
    let rd = 2 * (rows * cols) as u64;
    let groups = rows.div_ceil(t);
    CostReport {
        rd,
        tiles: (groups * cols.div_ceil(t / 2)) as u64,
        rwo: (groups * window_reads) as u64,
        programming_writes: rd,
        ..Default::default()
    }
}

/// Compacted placement from the zero pattern alone.
fn compacted_region(
    rows: usize,
    cols: usize,
    weight_at: impl Fn(usize, usize) -> usize,
    codes: &[i32],
    t: usize,
    window_reads: usize,
) -> CostReport {
    let pp = t / 2;
    let nonzero_rows: Vec<Vec<usize>> = (0..cols)
        .map(|c| (0..rows).filter(|&r| codes[weight_at(r, c)] != 0).collect())
        .collect();
    let nnz: usize = nonzero_rows.iter().map(Vec::len).sum();
    let mut tiles = 0usize;
    let mut cycles_per_group: BTreeMap<usize, usize> = BTreeMap::new();
    for block in nonzero_rows.chunks(pp) {
        let depth = block.iter().map(Vec::len).max().unwrap_or(0);
        let groups = depth.div_ceil(t);
        tiles += groups;
        for g in 0..groups {
            let routes: HashSet<&[usize]> = block
                .iter()
                .map(|rows| &rows[(g * t).min(rows.len())..((g + 1) * t).min(rows.len())])
                .filter(|chunk| !chunk.is_empty())
                .collect();
            let e = cycles_per_group.entry(g).or_default();
            *e = (*e).max(routes.len());
        }
    }
    let rd = 2 * nnz as u64;
    CostReport {
        rd,
        tiles: tiles as u64,
        rwo: (cycles_per_group.values().sum::<usize>() * window_reads) as u64,
        programming_writes: rd,
        ..Default::default()
    }
}

/// Cost of mapping `layer` under `scheme` from closed-form counts, without
/// building a plan.
pub fn analytic_layer_cost(
    layer: &Layer,
    scheme: Scheme,
    t: usize,
) -> Result<CostReport, MappingError> {
    if t < 2 {
        return Err(MappingError::TileTooSmall(t));
    }
    let codes = &layer.weights.codes;
    match layer.spec.op {
        LayerOp::Linear {
            in_features,
            out_features,
        } => Ok(match scheme {
            Scheme::DenseRouted => compacted_region(
                in_features,
                out_features,
                |r, c| c * in_features + r,
                codes,
                t,
                1,
            ),
            _ => full_region(in_features, out_features, t, 1),
        }),
        LayerOp::Conv2d(_) | LayerOp::Conv1d(_) => {
            let g = layer.spec.geometry().expect("conv");
            g.validate()?;
            let f = g.footprint();
            if scheme != Scheme::SparseStaggered && f > t {
                return Err(MappingError::KernelDoesNotFit {
                    footprint: f,
                    tile: t,
                });
            }
            let positions = g.output_positions();
            let report = match scheme {
                Scheme::SparseStaggered => {
                    full_region(g.covered_rows().len(), g.kernels * positions, t, 1)
                }
                Scheme::DenseKernel => full_region(f, g.kernels, t, positions),
                Scheme::DenseRouted => {
                    compacted_region(f, g.kernels, |r, k| k * f + r, codes, t, positions)
                }
            };
            Ok(report.with_equations(Some(&g)))
        }
    }
}

pub fn analytic_network_cost(
    net: &QuantizedNetwork,
    scheme: Scheme,
    t: usize,
) -> Result<NetworkCost, MappingError> {
    let layers = net
        .layers
        .iter()
        .map(|l| analytic_layer_cost(l, scheme, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkCost::from_layers(layers))
}

/// Costs of every scheme after constructing only one of them.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSchemeCosts {
    pub simulated: Scheme,
    pub per_scheme: Vec<(Scheme, Result<NetworkCost, MappingError>)>,
}

impl CrossSchemeCosts {
    pub fn get(&self, scheme: Scheme) -> &Result<NetworkCost, MappingError> {
        &self
            .per_scheme
            .iter()
            .find(|(s, _)| *s == scheme)
            .expect("all schemes present")
            .1
    }
}

/// Builds the plans of `simulated` and derives the other schemes' costs
/// analytically.
pub fn derive_costs_cross_scheme(
    simulated: Scheme,
    net: &QuantizedNetwork,
    t: usize,
) -> CrossSchemeCosts {
    let per_scheme = Scheme::ALL
        .iter()
        .map(|&s| {
            let report = if s == simulated {
                net.layers
                    .iter()
                    .map(|l| plan_layer(l, s, t).map(|p| cost(&p)))
                    .collect::<Result<Vec<_>, _>>()
                    .map(NetworkCost::from_layers)
            } else {
                analytic_network_cost(net, s, t)
            };
            (s, report)
        })
        .collect();
    CrossSchemeCosts {
        simulated,
        per_scheme,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_conv_dense, map_conv_routed, map_conv_staggered, map_linear_sparse};
    use crate::qnet::{ConvParams, FeatureShape, WeightTensor};

    #[test]
    fn tile_count_examples() {
        assert_eq!(tile_count(100, 100, 64), 4);
        assert_eq!(tile_count(64, 64, 64), 1);
        assert_eq!(tile_count(65, 1, 64), 2);
    }

    #[test]
    fn sparse_linear_cost() {
        let w = WeightTensor {
            shape: vec![4, 4],
            codes: vec![1; 16],
            scale: 1.0,
            bit_width: 4,
        };
        let r = cost(&map_linear_sparse(&w, 4).unwrap());
        assert_eq!((r.rd, r.tiles, r.rwo, r.programming_writes), (32, 2, 1, 32));
        assert_eq!(r.eq_devices_sparse, None);
    }

    #[test]
    fn empty_plan_costs_nothing() {
        let w = WeightTensor {
            shape: vec![2, 3],
            codes: vec![0; 6],
            scale: 1.0,
            bit_width: 4,
        };
        let r = cost(&crate::mapping::map_linear_dense(&w, 4).unwrap());
        assert_eq!(r, CostReport::default());
    }

    #[test]
    fn conv_read_cycles_per_scheme() {
        let g = ConvGeometry::conv1d(1, 3, 5, 1, 0, 1);
        let w = WeightTensor {
            shape: vec![1, 1, 3, 1],
            codes: vec![1, 0, 3],
            scale: 1.0,
            bit_width: 4,
        };
        let staggered = cost(&map_conv_staggered(&g, &w, 32).unwrap());
        assert_eq!((staggered.rd, staggered.rwo), (30, 1));
        let dense = cost(&map_conv_dense(&g, &w, 32).unwrap());
        assert_eq!((dense.rd, dense.rwo), (6, 3));
        // the closed form gives 2 / 2 = 1 next to the 3 constructive reads
        assert_eq!(dense.eq_steps_dense, Some(EqValue::new(2, 2)));
        assert!(!dense.remainder_flag);
        let routed = cost(&map_conv_routed(&g, &w, 32).unwrap());
        assert_eq!((routed.rd, routed.rwo), (4, 3));
    }

    #[test]
    fn pointwise_staggered_duplicates_by_positions() {
        let g = ConvGeometry::conv1d(2, 1, 6, 1, 0, 1);
        let w = WeightTensor {
            shape: vec![2, 1, 1, 1],
            codes: vec![1, -1],
            scale: 1.0,
            bit_width: 4,
        };
        let s = cost(&map_conv_staggered(&g, &w, 8).unwrap());
        let d = cost(&map_conv_dense(&g, &w, 8).unwrap());
        // rows 6, columns 2 * 6 vs. rows 1, columns 2
        assert_eq!(s.rd, 2 * 6 * 12);
        assert_eq!(d.rd, 2 * 2);
        assert_eq!(s.rd / d.rd, 36);
    }

    fn conv_net(codes: Vec<i32>) -> QuantizedNetwork {
        let p = ConvParams {
            in_channels: 1,
            kernels: 2,
            kernel_height: 3,
            kernel_width: 3,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        QuantizedNetwork::new(
            "c",
            FeatureShape::new(1, 4, 4),
            vec![
                (
                    LayerOp::Conv2d(p),
                    WeightTensor {
                        shape: vec![2, 1, 3, 3],
                        codes,
                        scale: 1.0,
                        bit_width: 4,
                    },
                ),
                (
                    LayerOp::Linear {
                        in_features: 32,
                        out_features: 3,
                    },
                    WeightTensor {
                        shape: vec![3, 32],
                        codes: (0..96).map(|i| i % 3 - 1).collect(),
                        scale: 1.0,
                        bit_width: 4,
                    },
                ),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn all_zero_conv_reclaims_everything_only_when_routed() {
        let net = conv_net(vec![0; 18]);
        let costs = derive_costs_cross_scheme(Scheme::SparseStaggered, &net, 16);
        let conv_rd = |s| costs.get(s).as_ref().unwrap().layers[0].rd;
        assert_eq!(conv_rd(Scheme::DenseRouted), 0);
        assert!(conv_rd(Scheme::DenseKernel) > 0);
        assert!(conv_rd(Scheme::SparseStaggered) > 0);
    }

    #[test]
    fn simulated_scheme_matches_constructive_cost() {
        let net = conv_net((0..18).map(|i| i % 4 - 1).collect());
        for s in Scheme::ALL {
            let derived = derive_costs_cross_scheme(s, &net, 16);
            let plans = crate::mapping::plan_network(&net, s, 16).unwrap();
            assert_eq!(derived.get(s).as_ref().unwrap(), &network_cost(&plans));
            for other in Scheme::ALL {
                let direct = network_cost(&crate::mapping::plan_network(&net, other, 16).unwrap());
                assert_eq!(
                    derived.get(other).as_ref().unwrap(),
                    &direct,
                    "{s} -> {other}"
                );
            }
        }
    }

    #[test]
    fn eq_fields_sum_over_layers() {
        let net = conv_net(vec![1; 18]);
        let c = analytic_network_cost(&net, Scheme::DenseKernel, 16).unwrap();
        // K=2, H=W=3 -> 18; the linear layer adds nothing
        assert_eq!(c.total.eq_devices_dense, Some(18));
        assert_eq!(
            c.total.eq_formula_devices(Scheme::DenseKernel),
            Some(EqValue::integer(18))
        );
        // X=4, P=1: (4 + 2 - 2 - 1) / 2 = 3/2
        assert_eq!(c.total.eq_steps_dense, Some(EqValue::new(3, 2)));
        assert!(c.total.remainder_flag);
    }
}
