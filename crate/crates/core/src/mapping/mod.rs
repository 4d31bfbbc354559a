//! Weight placement on differential crossbar tiles and the cost model.
//!
//! Every signed weight occupies a device pair in adjacent columns of one tile
//! (`+` at column `2p`, `-` at column `2p + 1`). A pair never straddles a tile
//! boundary, so a `t x t` tile holds `t / 2` logical columns.

mod cost;
mod equations;
mod geometry;
mod plan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{
    analytic_layer_cost, analytic_network_cost, cost, derive_costs_cross_scheme, network_cost,
    tile_count, CostReport, CrossSchemeCosts, NetworkCost,
};
pub use equations::{
    dense_devices_closed_form, dense_steps_closed_form, sparse_devices_closed_form, EqValue,
};
pub use geometry::ConvGeometry;
pub use plan::{
    map_conv_dense, map_conv_routed, map_conv_staggered, map_linear_dense, map_linear_sparse,
    map_matrix_dense, map_matrix_sparse, plan_layer, plan_network, unroll_conv_staggered,
    Connection, Entry, InputLayout, LogicalMatrix, MappingPlan, Polarity, ReadGroup, TileSlot,
    UnrolledConv,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("tile size {0} cannot hold a differential pair (need at least 2)")]
    TileTooSmall(usize),
    #[error("kernel footprint {footprint} does not fit a tile column of {tile}")]
    KernelDoesNotFit { footprint: usize, tile: usize },
    #[error("kernel span {span} exceeds padded input {padded}; output extent is zero")]
    EmptyOutput { padded: usize, span: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("weights do not match layer: {0}")]
    WeightMismatch(String),
    #[error(
        "unknown mapping scheme '{0}' (expected sparse_staggered, dense_routed or dense_kernel)"
    )]
    UnknownScheme(String),
}

/// Mapping scheme applied network-wide.
///
/// - `SparseStaggered`: linear layers keep zeros in place; convolutions are
///   unrolled into a staggered (Toeplitz) region read once per sample.
/// - `DenseRouted`: kernels are stored once and zero weights are reclaimed
///   per column, with row permutation tables recording the rerouting.
/// - `DenseKernel`: kernels are stored once and re-read at every output
///   position; linear layers are stored as-is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SparseStaggered,
    DenseRouted,
    DenseKernel,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::SparseStaggered,
        Scheme::DenseRouted,
        Scheme::DenseKernel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SparseStaggered => "sparse_staggered",
            Scheme::DenseRouted => "dense_routed",
            Scheme::DenseKernel => "dense_kernel",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, MappingError> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sparse_staggered" | "sparse" | "staggered" => Ok(Scheme::SparseStaggered),
            "dense_routed" | "routed" | "dense_a" => Ok(Scheme::DenseRouted),
            "dense_kernel" | "dense_b" => Ok(Scheme::DenseKernel),
            _ => Err(MappingError::UnknownScheme(s.to_string())),
        }
    }
}
