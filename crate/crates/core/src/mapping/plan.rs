use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ConvGeometry, MappingError, Scheme};
use crate::qnet::{Layer, LayerOp, QuantizedNetwork, WeightTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A 2-D logical weight matrix: rows are crossbar inputs (word lines),
/// columns are outputs. Each cell names the weight it carries, or `None` for
/// a structural zero that is still allocated by non-compacting schemes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub cells: Vec<Option<usize>>,
}

impl LogicalMatrix {
    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        self.cells[row * self.cols + col]
    }

    /// A `[out, in]` linear weight tensor as an `in x out` matrix.
    pub fn from_linear(in_features: usize, out_features: usize) -> Self {
        let mut cells = vec![None; in_features * out_features];
        for r in 0..in_features {
            for c in 0..out_features {
                cells[r * out_features + c] = Some(c * in_features + r);
            }
        }
        Self {
            rows: in_features,
            cols: out_features,
            cells,
        }
    }

    /// Kernels stored once: `C*H*W` rows by `K` columns.
    pub fn from_kernels(g: &ConvGeometry) -> Self {
        let f = g.footprint();
        let mut cells = vec![None; f * g.kernels];
        for r in 0..f {
            for k in 0..g.kernels {
                cells[r * g.kernels + k] = Some(k * f + r);
            }
        }
        Self {
            rows: f,
            cols: g.kernels,
            cells,
        }
    }
}

/// Staggered unrolling of a convolution.
///
/// Rows are the padded input positions touched by at least one window
/// (channel-major), columns are output positions grouped by kernel
/// (`col = k * positions + pos`), and each column holds one shifted copy of
/// its kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnrolledConv {
    pub rows: usize,
    pub cols: usize,
    /// Padded-input index of every row.
    pub row_source: Vec<usize>,
    /// `(row, col, weight index)` of every kernel tap.
    pub cells: Vec<(usize, usize, usize)>,
}

impl UnrolledConv {
    pub fn to_matrix(&self) -> LogicalMatrix {
        let mut cells = vec![None; self.rows * self.cols];
        for &(r, c, w) in &self.cells {
            cells[r * self.cols + c] = Some(w);
        }
        LogicalMatrix {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }
}

pub fn unroll_conv_staggered(g: &ConvGeometry) -> Result<UnrolledConv, MappingError> {
    g.validate()?;
    let row_source = g.covered_rows();
    let row_of: HashMap<usize, usize> = row_source
        .iter()
        .enumerate()
        .map(|(r, &p)| (p, r))
        .collect();
    let positions = g.output_positions();
    let f = g.footprint();
    let mut cells = Vec::with_capacity(g.kernels * positions * f);
    for k in 0..g.kernels {
        for pos in 0..positions {
            for tap in 0..f {
                let row = row_of[&g.window_index(pos, tap)];
                cells.push((row, k * positions + pos, k * f + tap));
            }
        }
    }
    Ok(UnrolledConv {
        rows: row_source.len(),
        cols: g.kernels * positions,
        row_source,
        cells,
    })
}

/// How logical rows are fed from a layer input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputLayout {
    /// Row `r` reads input element `r`.
    Direct { inputs: usize },
    /// Row `r` reads padded input position `row_source[r]`; one read per sample.
    Unrolled {
        geometry: ConvGeometry,
        row_source: Vec<usize>,
    },
    /// The kernel matrix is re-read once per output position.
    Sliding { geometry: ConvGeometry },
}

impl InputLayout {
    pub fn geometry(&self) -> Option<&ConvGeometry> {
        match self {
            InputLayout::Direct { .. } => None,
            InputLayout::Unrolled { geometry, .. } | InputLayout::Sliding { geometry } => {
                Some(geometry)
            }
        }
    }

    /// Reads of the mapped matrix needed per sample.
    pub fn window_reads(&self) -> usize {
        match self {
            InputLayout::Sliding { geometry } => geometry.output_positions(),
            _ => 1,
        }
    }
}

/// One mapped weight: a device pair at `(tile, row)` in columns `2*pair` and
/// `2*pair + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub logical_row: usize,
    pub logical_col: usize,
    /// `None` for a structural zero of the staggered region.
    pub weight: Option<usize>,
    pub tile: usize,
    pub row: usize,
    pub pair: usize,
}

impl Entry {
    /// Physical `(tile, row, column)` of one polarity.
    pub fn device(&self, polarity: Polarity) -> (usize, usize, usize) {
        let col = match polarity {
            Polarity::Positive => 2 * self.pair,
            Polarity::Negative => 2 * self.pair + 1,
        };
        (self.tile, self.row, col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSlot {
    /// Column block: which `t/2` logical columns the tile serves.
    pub block: usize,
    /// Which chunk of `t` physical rows of that block.
    pub row_group: usize,
}

/// Column pairs of one tile that share the same word-line routing and can be
/// read in one cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadGroup {
    /// Logical row driven onto each physical row (`None` = held at 0 V).
    pub rows: Vec<Option<usize>>,
    pub pairs: Vec<usize>,
}

/// A single product of a matmul or convolution, as carried by a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Connection {
    /// Input index (padded index for convolutions).
    pub input: usize,
    pub weight: usize,
    /// Output index (`k * positions + pos` for convolutions).
    pub output: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingPlan {
    pub scheme: Scheme,
    pub tile_size: usize,
    /// Logical matrix rows (M).
    pub rows: usize,
    /// Logical matrix columns (N).
    pub cols: usize,
    pub layout: InputLayout,
    pub tiles: Vec<TileSlot>,
    pub entries: Vec<Entry>,
    /// Logical column served by each pair of each block.
    pub block_columns: Vec<Vec<usize>>,
    /// Read groups of each tile.
    pub read_groups: Vec<Vec<ReadGroup>>,
    /// Length of the weight tensor the plan was built for.
    pub weight_count: usize,
}

impl MappingPlan {
    pub fn pairs_per_tile(&self) -> usize {
        self.tile_size / 2
    }

    /// Allocated devices (two per entry).
    pub fn device_count(&self) -> usize {
        2 * self.entries.len()
    }

    /// Number of tile row groups.
    pub fn row_groups(&self) -> usize {
        self.tiles
            .iter()
            .map(|t| t.row_group + 1)
            .max()
            .unwrap_or(0)
    }

    /// Logical-row to physical-row table of one column. Physical rows count
    /// across row groups (`row_group * t + row`).
    pub fn permutation(&self, col: usize) -> Vec<(usize, usize)> {
        let mut table: Vec<(usize, usize)> = self
            .entries
            .iter()
            .filter(|e| e.logical_col == col)
            .map(|e| {
                (
                    e.logical_row,
                    self.tiles[e.tile].row_group * self.tile_size + e.row,
                )
            })
            .collect();
        table.sort_unstable();
        table
    }

    /// Every product the plan computes.
    pub fn connections(&self) -> Vec<Connection> {
        let with_weight = self.entries.iter().filter_map(|e| e.weight.map(|w| (e, w)));
        match &self.layout {
            InputLayout::Direct { .. } => with_weight
                .map(|(e, w)| Connection {
                    input: e.logical_row,
                    weight: w,
                    output: e.logical_col,
                })
                .collect(),
            InputLayout::Unrolled { row_source, .. } => with_weight
                .map(|(e, w)| Connection {
                    input: row_source[e.logical_row],
                    weight: w,
                    output: e.logical_col,
                })
                .collect(),
            InputLayout::Sliding { geometry } => {
                let positions = geometry.output_positions();
                with_weight
                    .flat_map(|(e, w)| {
                        (0..positions).map(move |pos| Connection {
                            input: geometry.window_index(pos, e.logical_row),
                            weight: w,
                            output: e.logical_col * positions + pos,
                        })
                    })
                    .collect()
            }
        }
    }

    /// Structural checks: unique device positions, bounds, and read groups
    /// consistent with the entries.
    pub fn check_invariants(&self) -> Result<(), String> {
        let t = self.tile_size;
        let mut seen = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.tile >= self.tiles.len() || e.row >= t || 2 * e.pair + 1 >= t {
                return Err(format!("entry {i} out of bounds: {e:?}"));
            }
            if let Some(j) = seen.insert((e.tile, e.row, e.pair), i) {
                return Err(format!("entries {j} and {i} share a device pair"));
            }
            let slot = self.tiles[e.tile];
            if self.block_columns[slot.block][e.pair] != e.logical_col {
                return Err(format!("entry {i} sits in the wrong column block"));
            }
            let group = self.read_groups[e.tile]
                .iter()
                .find(|g| g.pairs.contains(&e.pair))
                .ok_or_else(|| format!("entry {i} is never read"))?;
            if group.rows[e.row] != Some(e.logical_row) {
                return Err(format!("entry {i} is driven by the wrong word line"));
            }
        }
        Ok(())
    }
}

fn check_tile(t: usize) -> Result<(), MappingError> {
    if t < 2 {
        Err(MappingError::TileTooSmall(t))
    } else {
        Ok(())
    }
}

fn check_weights(expected: usize, weights: &WeightTensor) -> Result<(), MappingError> {
    if weights.codes.len() != expected {
        return Err(MappingError::WeightMismatch(format!(
            "{} codes for a layer with {expected} weights",
            weights.codes.len()
        )));
    }
    Ok(())
}

/// Every cell, zero or not, gets a device pair. Tiles form a full
/// `ceil(M/t) x ceil(N/(t/2))` grid.
fn place_full(
    matrix: &LogicalMatrix,
    t: usize,
    scheme: Scheme,
    layout: InputLayout,
    weight_count: usize,
) -> Result<MappingPlan, MappingError> {
    check_tile(t)?;
    let pp = t / 2;
    let blocks = matrix.cols.div_ceil(pp);
    let groups = matrix.rows.div_ceil(t);
    let mut tiles = Vec::with_capacity(blocks * groups);
    let mut read_groups = Vec::with_capacity(blocks * groups);
    for g in 0..groups {
        for b in 0..blocks {
            tiles.push(TileSlot {
                block: b,
                row_group: g,
            });
            let rows = (0..t)
                .map(|p| Some(g * t + p).filter(|&r| r < matrix.rows))
                .collect();
            let pairs = (0..pp).filter(|p| b * pp + p < matrix.cols).collect();
            read_groups.push(vec![ReadGroup { rows, pairs }]);
        }
    }
    let block_columns = (0..blocks)
        .map(|b| (b * pp..((b + 1) * pp).min(matrix.cols)).collect())
        .collect();
    let mut entries = Vec::with_capacity(matrix.rows * matrix.cols);
    for r in 0..matrix.rows {
        for c in 0..matrix.cols {
            entries.push(Entry {
                logical_row: r,
                logical_col: c,
                weight: matrix.get(r, c),
                tile: (r / t) * blocks + c / pp,
                row: r % t,
                pair: c % pp,
            });
        }
    }
    Ok(MappingPlan {
        scheme,
        tile_size: t,
        rows: matrix.rows,
        cols: matrix.cols,
        layout,
        tiles,
        entries,
        block_columns,
        read_groups,
        weight_count,
    })
}

/// Greedy per-column compaction: each column keeps only its nonzero weights,
/// packed from physical row 0 in logical-row order and spilling into further
/// row groups of the same block. Empty tiles are dropped. Pairs of a tile
/// whose routing tables coincide share a read group.
fn place_compacted(
    matrix: &LogicalMatrix,
    codes: &[i32],
    t: usize,
    layout: InputLayout,
    weight_count: usize,
) -> Result<MappingPlan, MappingError> {
    check_tile(t)?;
    let pp = t / 2;
    let blocks = matrix.cols.div_ceil(pp);
    let survivors: Vec<Vec<(usize, usize)>> = (0..matrix.cols)
        .map(|c| {
            (0..matrix.rows)
                .filter_map(|r| matrix.get(r, c).filter(|&w| codes[w] != 0).map(|w| (r, w)))
                .collect()
        })
        .collect();

    let mut tiles = Vec::new();
    let mut read_groups = Vec::new();
    let mut entries = Vec::new();
    let block_columns: Vec<Vec<usize>> = (0..blocks)
        .map(|b| (b * pp..((b + 1) * pp).min(matrix.cols)).collect())
        .collect();
    for (b, cols) in block_columns.iter().enumerate() {
        let depth = cols.iter().map(|&c| survivors[c].len()).max().unwrap_or(0);
        for g in 0..depth.div_ceil(t) {
            let tile = tiles.len();
            tiles.push(TileSlot {
                block: b,
                row_group: g,
            });
            let mut groups: Vec<ReadGroup> = Vec::new();
            for (pair, &c) in cols.iter().enumerate() {
                let chunk: Vec<(usize, usize)> =
                    survivors[c].iter().skip(g * t).take(t).copied().collect();
                if chunk.is_empty() {
                    continue;
                }
                for (row, &(r, w)) in chunk.iter().enumerate() {
                    entries.push(Entry {
                        logical_row: r,
                        logical_col: c,
                        weight: Some(w),
                        tile,
                        row,
                        pair,
                    });
                }
                let mut rows: Vec<Option<usize>> = chunk.iter().map(|&(r, _)| Some(r)).collect();
                rows.resize(t, None);
                match groups.iter_mut().find(|grp| grp.rows == rows) {
                    Some(grp) => grp.pairs.push(pair),
                    None => groups.push(ReadGroup {
                        rows,
                        pairs: vec![pair],
                    }),
                }
            }
            read_groups.push(groups);
        }
    }
    Ok(MappingPlan {
        scheme: Scheme::DenseRouted,
        tile_size: t,
        rows: matrix.rows,
        cols: matrix.cols,
        layout,
        tiles,
        entries,
        block_columns,
        read_groups,
        weight_count,
    })
}

/// Non-compacting differential mapping of an arbitrary logical matrix.
pub fn map_matrix_sparse(matrix: &LogicalMatrix, t: usize) -> Result<MappingPlan, MappingError> {
    let weight_count = matrix
        .cells
        .iter()
        .flatten()
        .map(|w| w + 1)
        .max()
        .unwrap_or(0);
    place_full(
        matrix,
        t,
        Scheme::SparseStaggered,
        InputLayout::Direct {
            inputs: matrix.rows,
        },
        weight_count,
    )
}

/// Compacting differential mapping of an arbitrary logical matrix.
pub fn map_matrix_dense(
    matrix: &LogicalMatrix,
    codes: &[i32],
    t: usize,
) -> Result<MappingPlan, MappingError> {
    place_compacted(
        matrix,
        codes,
        t,
        InputLayout::Direct {
            inputs: matrix.rows,
        },
        codes.len(),
    )
}

fn linear_dims(weights: &WeightTensor) -> Result<(usize, usize), MappingError> {
    match weights.shape.as_slice() {
        [out, inp] => Ok((*inp, *out)),
        other => Err(MappingError::WeightMismatch(format!(
            "expected a 2-D [out, in] tensor, got {other:?}"
        ))),
    }
}

/// Linear layer, zeros left in place.
pub fn map_linear_sparse(weights: &WeightTensor, t: usize) -> Result<MappingPlan, MappingError> {
    let (inp, out) = linear_dims(weights)?;
    place_full(
        &LogicalMatrix::from_linear(inp, out),
        t,
        Scheme::SparseStaggered,
        InputLayout::Direct { inputs: inp },
        weights.len(),
    )
}

/// Linear layer with zero weights reclaimed per column.
pub fn map_linear_dense(weights: &WeightTensor, t: usize) -> Result<MappingPlan, MappingError> {
    let (inp, out) = linear_dims(weights)?;
    place_compacted(
        &LogicalMatrix::from_linear(inp, out),
        &weights.codes,
        t,
        InputLayout::Direct { inputs: inp },
        weights.len(),
    )
}

fn check_kernel_fit(g: &ConvGeometry, t: usize) -> Result<(), MappingError> {
    check_tile(t)?;
    g.validate()?;
    if g.footprint() > t {
        return Err(MappingError::KernelDoesNotFit {
            footprint: g.footprint(),
            tile: t,
        });
    }
    Ok(())
}

/// Dense kernel arrangement: each kernel stored once as one column pair of
/// height `C*H*W`, read once per output position.
pub fn map_conv_dense(
    g: &ConvGeometry,
    weights: &WeightTensor,
    t: usize,
) -> Result<MappingPlan, MappingError> {
    check_kernel_fit(g, t)?;
    check_weights(g.weight_count(), weights)?;
    place_full(
        &LogicalMatrix::from_kernels(g),
        t,
        Scheme::DenseKernel,
        InputLayout::Sliding { geometry: *g },
        weights.len(),
    )
}

/// Dense kernel arrangement with zero weights reclaimed per kernel column.
pub fn map_conv_routed(
    g: &ConvGeometry,
    weights: &WeightTensor,
    t: usize,
) -> Result<MappingPlan, MappingError> {
    check_kernel_fit(g, t)?;
    check_weights(g.weight_count(), weights)?;
    place_compacted(
        &LogicalMatrix::from_kernels(g),
        &weights.codes,
        t,
        InputLayout::Sliding { geometry: *g },
        weights.len(),
    )
}

/// Staggered arrangement: the unrolled region mapped with zeros in place.
pub fn map_conv_staggered(
    g: &ConvGeometry,
    weights: &WeightTensor,
    t: usize,
) -> Result<MappingPlan, MappingError> {
    check_tile(t)?;
    check_weights(g.weight_count(), weights)?;
    let unrolled = unroll_conv_staggered(g)?;
    place_full(
        &unrolled.to_matrix(),
        t,
        Scheme::SparseStaggered,
        InputLayout::Unrolled {
            geometry: *g,
            row_source: unrolled.row_source,
        },
        weights.len(),
    )
}

pub fn plan_layer(layer: &Layer, scheme: Scheme, t: usize) -> Result<MappingPlan, MappingError> {
    let w = &layer.weights;
    let mut plan = match (layer.spec.op, scheme) {
        (LayerOp::Linear { .. }, Scheme::DenseRouted) => map_linear_dense(w, t)?,
        (LayerOp::Linear { .. }, _) => map_linear_sparse(w, t)?,
        (_, Scheme::SparseStaggered) => {
            map_conv_staggered(&layer.spec.geometry().expect("conv"), w, t)?
        }
        (_, Scheme::DenseRouted) => map_conv_routed(&layer.spec.geometry().expect("conv"), w, t)?,
        (_, Scheme::DenseKernel) => map_conv_dense(&layer.spec.geometry().expect("conv"), w, t)?,
    };
    plan.scheme = scheme;
    Ok(plan)
}

pub fn plan_network(
    net: &QuantizedNetwork,
    scheme: Scheme,
    t: usize,
) -> Result<Vec<MappingPlan>, MappingError> {
    net.layers
        .iter()
        .map(|l| plan_layer(l, scheme, t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(codes: Vec<i32>, out: usize, inp: usize) -> WeightTensor {
        WeightTensor {
            shape: vec![out, inp],
            codes,
            scale: 1.0,
            bit_width: 8,
        }
    }

    #[test]
    fn staggered_conv1d_example() {
        let u = unroll_conv_staggered(&ConvGeometry::conv1d(1, 3, 5, 1, 0, 1)).unwrap();
        assert_eq!((u.rows, u.cols, u.cells.len()), (5, 3, 9));
        // three staggered diagonals: column j holds rows j..j+3
        for &(r, c, w) in &u.cells {
            assert_eq!(r, c + w);
        }
    }

    #[test]
    fn pointwise_unrolling_is_diagonal() {
        let u = unroll_conv_staggered(&ConvGeometry::conv1d(1, 1, 6, 1, 0, 1)).unwrap();
        assert_eq!((u.rows, u.cols), (6, 6));
        assert!(u.cells.iter().all(|&(r, c, _)| r == c));
    }

    #[test]
    fn staggered_conv2d_example() {
        let g = ConvGeometry {
            kernels: 1,
            kernel_height: 3,
            kernel_width: 3,
            input_height: 4,
            input_width: 4,
            stride: 1,
            padding: 0,
            dilation: 1,
            channels: 1,
            one_d: false,
        };
        let u = unroll_conv_staggered(&g).unwrap();
        assert_eq!((u.rows, u.cols, u.cells.len()), (16, 4, 36));
    }

    #[test]
    fn sparse_linear_examples() {
        let p = map_linear_sparse(&linear(vec![1; 16], 4, 4), 4).unwrap();
        assert_eq!((p.device_count(), p.tiles.len()), (32, 2));
        p.check_invariants().unwrap();

        let one = map_linear_sparse(&linear(vec![3], 1, 1), 32).unwrap();
        assert_eq!((one.device_count(), one.tiles.len()), (2, 1));

        let half_zero: Vec<i32> = (0..16).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
        let z = map_linear_sparse(&linear(half_zero, 4, 4), 4).unwrap();
        assert_eq!(z.device_count(), 32);
    }

    #[test]
    fn tile_smaller_than_a_pair_is_rejected() {
        assert_eq!(
            map_linear_sparse(&linear(vec![1], 1, 1), 1),
            Err(MappingError::TileTooSmall(1))
        );
        assert_eq!(
            map_linear_dense(&linear(vec![1], 1, 1), 0),
            Err(MappingError::TileTooSmall(0))
        );
    }

    #[test]
    fn dense_compaction_example() {
        // single column [1, 0, 2, 0]
        let p = map_linear_dense(&linear(vec![1, 0, 2, 0], 1, 4), 4).unwrap();
        assert_eq!(p.permutation(0), vec![(0, 0), (2, 1)]);
        assert_eq!(p.device_count(), 4);
        assert_eq!(p.read_groups[0][0].rows, vec![Some(0), Some(2), None, None]);
        p.check_invariants().unwrap();
    }

    #[test]
    fn dense_all_zero_matrix_is_empty() {
        let p = map_linear_dense(&linear(vec![0; 12], 3, 4), 4).unwrap();
        assert_eq!((p.device_count(), p.tiles.len()), (0, 0));
    }

    #[test]
    fn dense_without_zeros_matches_sparse_placement() {
        let w = linear(
            (1..=20)
                .collect::<Vec<i32>>()
                .iter()
                .map(|v| v % 7 + 1)
                .collect(),
            4,
            5,
        );
        let d = map_linear_dense(&w, 4).unwrap();
        let s = map_linear_sparse(&w, 4).unwrap();
        let placed = |p: &MappingPlan| {
            let mut v: Vec<_> = p
                .entries
                .iter()
                .map(|e| (e.weight, p.tiles[e.tile], e.row, e.pair))
                .collect();
            v.sort_by_key(|x| x.0);
            v
        };
        assert_eq!(placed(&d), placed(&s));
        for c in 0..4 {
            assert_eq!(d.permutation(c), (0..5).map(|r| (r, r)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn routed_columns_with_different_zeros_need_separate_reads() {
        // in = 3, out = 2: column 0 = [1, 0, 1], column 1 = [0, 1, 1]
        let w = linear(vec![1, 0, 1, 0, 1, 1], 2, 3);
        let p = map_linear_dense(&w, 4).unwrap();
        assert_eq!(p.tiles.len(), 1);
        assert_eq!(p.read_groups[0].len(), 2);
        p.check_invariants().unwrap();
    }

    #[test]
    fn dense_conv_example_counts() {
        let g = ConvGeometry {
            kernels: 64,
            kernel_height: 3,
            kernel_width: 3,
            input_height: 8,
            input_width: 8,
            stride: 1,
            padding: 1,
            dilation: 1,
            channels: 1,
            one_d: false,
        };
        let w = WeightTensor {
            shape: vec![64, 1, 3, 3],
            codes: vec![1; 576],
            scale: 1.0,
            bit_width: 4,
        };
        let p = map_conv_dense(&g, &w, 32).unwrap();
        assert_eq!(p.device_count(), 1152);
        p.check_invariants().unwrap();
    }

    #[test]
    fn kernel_larger_than_tile_is_rejected() {
        let g = ConvGeometry::conv1d(1, 5, 8, 1, 0, 1);
        let w = WeightTensor {
            shape: vec![1, 1, 5, 1],
            codes: vec![1; 5],
            scale: 1.0,
            bit_width: 4,
        };
        assert_eq!(
            map_conv_dense(&g, &w, 4),
            Err(MappingError::KernelDoesNotFit {
                footprint: 5,
                tile: 4
            })
        );
    }

    #[test]
    fn staggered_conv_example_counts() {
        let g = ConvGeometry::conv1d(1, 3, 5, 1, 0, 1);
        let w = WeightTensor {
            shape: vec![1, 1, 3, 1],
            codes: vec![1, 2, 3],
            scale: 1.0,
            bit_width: 4,
        };
        let p = map_conv_staggered(&g, &w, 32).unwrap();
        assert_eq!((p.rows, p.cols, p.device_count()), (5, 3, 30));
        p.check_invariants().unwrap();

        let short = ConvGeometry::conv1d(1, 3, 2, 1, 0, 1);
        assert!(matches!(
            map_conv_staggered(&short, &w, 32),
            Err(MappingError::EmptyOutput { .. })
        ));
        let exact = ConvGeometry::conv1d(1, 3, 3, 1, 0, 1);
        assert_eq!(map_conv_staggered(&exact, &w, 32).unwrap().cols, 1);
    }
}
