//! Grid-search design-space exploration.
//!
//! A [`SearchSpace`] lists candidate values per dimension. [`grid_search`]
//! simulates every combination, scores it as `TSA / (RD * RWO)` and
//! min-max normalizes the scores across the grid. [`contour_grid`] slices the
//! results over two dimensions and [`rank`] orders them for comparison.

mod grid;
mod score;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{MappingError, Scheme};
use crate::xbar::{DeviceModel, IoConfig, NoiseKeying, SimConfig, XbarError};

pub use grid::{contour_grid, grid_search, ContourGrid, GridOptions, NetworkSet};
pub use score::{min_max_normalize, rank, weighted_score, weighted_score_with, ScoreWeights};

#[derive(Debug, Error)]
pub enum DseError {
    #[error("dimension '{0}' has no values")]
    EmptyDimension(Dim),
    #[error("unknown network id '{0}'")]
    UnknownNetwork(String),
    #[error("configuration #{index} ({point}) failed: {source}")]
    Evaluation {
        index: usize,
        point: Box<DesignPoint>,
        #[source]
        source: XbarError,
    },
    #[error("configuration #{index} ({point}) cannot be costed: {source}")]
    Cost {
        index: usize,
        point: Box<DesignPoint>,
        #[source]
        source: MappingError,
    },
    #[error("score needs RD > 0 and RWO > 0, got RD = {rd}, RWO = {rwo}")]
    ZeroCost { rd: u64, rwo: u64 },
    #[error("contour axes must differ, both are '{0}'")]
    SameAxis(Dim),
    #[error("unknown dimension '{0}'")]
    UnknownDim(String),
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, DseError>;

/// Candidate values per dimension. Points are enumerated in lexicographic
/// order over the lists, in field order, last field fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub networks: Vec<String>,
    pub schemes: Vec<Scheme>,
    pub io_bits: Vec<Option<u32>>,
    pub tile_sizes: Vec<usize>,
    pub v_max: Vec<f64>,
    /// Sets both the stuck-ON and stuck-OFF probability.
    pub stuck_rates: Vec<f64>,
    pub n_states: Vec<Option<u32>>,
    /// Multiplies both resistance standard deviations.
    pub std_multipliers: Vec<f64>,
    pub batch_sizes: Vec<usize>,
}

impl Default for SearchSpace {
    /// One point at the default device and converter settings, no networks.
    fn default() -> Self {
        let mut s = Self::single("", Scheme::SparseStaggered, 64, 64);
        s.networks.clear();
        s
    }
}

impl SearchSpace {
    /// A one-point space around a network id with the default device and
    /// converter settings.
    pub fn single(network: &str, scheme: Scheme, tile_size: usize, batch_size: usize) -> Self {
        let dev = DeviceModel::default();
        let io = IoConfig::default();
        Self {
            networks: vec![network.to_string()],
            schemes: vec![scheme],
            io_bits: vec![io.io_bits],
            tile_sizes: vec![tile_size],
            v_max: vec![io.v_max],
            stuck_rates: vec![dev.p_stuck_on],
            n_states: vec![dev.n_states],
            std_multipliers: vec![1.0],
            batch_sizes: vec![batch_size],
        }
    }

    /// `(field name, number of values)` of every dimension, in grid order.
    pub fn dimension_sizes(&self) -> [(&'static str, usize); 9] {
        [
            ("networks", self.networks.len()),
            ("schemes", self.schemes.len()),
            ("io_bits", self.io_bits.len()),
            ("tile_sizes", self.tile_sizes.len()),
            ("v_max", self.v_max.len()),
            ("stuck_rates", self.stuck_rates.len()),
            ("n_states", self.n_states.len()),
            ("std_multipliers", self.std_multipliers.len()),
            ("batch_sizes", self.batch_sizes.len()),
        ]
    }

    fn lengths(&self) -> [usize; 9] {
        self.dimension_sizes().map(|(_, n)| n)
    }

    pub fn validate(&self) -> Result<()> {
        match Dim::ALL.iter().zip(self.lengths()).find(|(_, n)| *n == 0) {
            Some((d, _)) => Err(DseError::EmptyDimension(*d)),
            None => Ok(()),
        }
    }

    /// Number of grid points.
    pub fn cardinality(&self) -> usize {
        self.lengths().iter().product()
    }

    /// Every point, in lexicographic order.
    pub fn points(&self) -> Vec<DesignPoint> {
        let lens = self.lengths();
        let total = self.cardinality();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = [0usize; 9];
            let mut rem = flat;
            for d in (0..9).rev() {
                idx[d] = rem % lens[d];
                rem /= lens[d];
            }
            out.push(DesignPoint {
                network: self.networks[idx[0]].clone(),
                scheme: self.schemes[idx[1]],
                io_bits: self.io_bits[idx[2]],
                tile_size: self.tile_sizes[idx[3]],
                v_max: self.v_max[idx[4]],
                stuck_rate: self.stuck_rates[idx[5]],
                n_states: self.n_states[idx[6]],
                std_multiplier: self.std_multipliers[idx[7]],
                batch_size: self.batch_sizes[idx[8]],
            });
        }
        out
    }
}

/// One configuration of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub network: String,
    pub scheme: Scheme,
    pub io_bits: Option<u32>,
    pub tile_size: usize,
    pub v_max: f64,
    pub stuck_rate: f64,
    pub n_states: Option<u32>,
    pub std_multiplier: f64,
    pub batch_size: usize,
}

impl DesignPoint {
    /// Simulation settings with the point's device parameters applied to
    /// `base`.
    pub fn sim_config(&self, base: &DeviceModel, keying: NoiseKeying) -> SimConfig {
        SimConfig {
            tile_size: self.tile_size,
            io: IoConfig {
                io_bits: self.io_bits,
                v_max: self.v_max,
                batch_size: self.batch_size,
            },
            device: DeviceModel {
                r_on_std: base.r_on_std * self.std_multiplier,
                r_off_std: base.r_off_std * self.std_multiplier,
                n_states: self.n_states,
                p_stuck_on: self.stuck_rate,
                p_stuck_off: self.stuck_rate,
                ..base.clone()
            },
            keying,
        }
    }

    /// Text form of one dimension's value, as used in reports.
    pub fn label(&self, dim: Dim) -> String {
        fn opt(v: Option<u32>, none: &str) -> String {
            v.map_or_else(|| none.to_string(), |n| n.to_string())
        }
        match dim {
            Dim::Network => self.network.clone(),
            Dim::Scheme => self.scheme.name().to_string(),
            Dim::IoBits => opt(self.io_bits, "ideal"),
            Dim::TileSize => self.tile_size.to_string(),
            Dim::VMax => self.v_max.to_string(),
            Dim::StuckRate => self.stuck_rate.to_string(),
            Dim::NStates => opt(self.n_states, "continuous"),
            Dim::StdMultiplier => self.std_multiplier.to_string(),
            Dim::BatchSize => self.batch_size.to_string(),
        }
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Dim::ALL
            .iter()
            .map(|d| format!("{}={}", d.name(), self.label(*d)))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// A search dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    Network,
    Scheme,
    IoBits,
    TileSize,
    VMax,
    StuckRate,
    NStates,
    StdMultiplier,
    BatchSize,
}

impl Dim {
    pub const ALL: [Dim; 9] = [
        Dim::Network,
        Dim::Scheme,
        Dim::IoBits,
        Dim::TileSize,
        Dim::VMax,
        Dim::StuckRate,
        Dim::NStates,
        Dim::StdMultiplier,
        Dim::BatchSize,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dim::Network => "network",
            Dim::Scheme => "scheme",
            Dim::IoBits => "io_bits",
            Dim::TileSize => "tile_size",
            Dim::VMax => "v_max",
            Dim::StuckRate => "stuck_rate",
            Dim::NStates => "n_states",
            Dim::StdMultiplier => "std_multiplier",
            Dim::BatchSize => "batch_size",
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dim {
    type Err = DseError;

    fn from_str(s: &str) -> Result<Self> {
        Dim::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| DseError::UnknownDim(s.to_string()))
    }
}

/// Outcome of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    /// Position in the lexicographic grid order.
    pub index: usize,
    pub point: DesignPoint,
    /// Test-set accuracy as a fraction.
    pub tsa: f64,
    pub rd: u64,
    pub rwo: u64,
    pub tiles: u64,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub seed: u64,
}

/// Quantity read from a [`ConfigResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tsa,
    Rd,
    Rwo,
    Tiles,
    RawScore,
    NormalizedScore,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Tsa,
        Metric::Rd,
        Metric::Rwo,
        Metric::Tiles,
        Metric::RawScore,
        Metric::NormalizedScore,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Tsa => "tsa",
            Metric::Rd => "rd",
            Metric::Rwo => "rwo",
            Metric::Tiles => "tiles",
            Metric::RawScore => "raw_score",
            Metric::NormalizedScore => "normalized_score",
        }
    }

    pub fn of(&self, r: &ConfigResult) -> f64 {
        match self {
            Metric::Tsa => r.tsa,
            Metric::Rd => r.rd as f64,
            Metric::Rwo => r.rwo as f64,
            Metric::Tiles => r.tiles as f64,
            Metric::RawScore => r.raw_score,
            Metric::NormalizedScore => r.normalized_score,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = DseError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| DseError::UnknownMetric(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        SearchSpace {
            tile_sizes: vec![32, 64, 128],
            batch_sizes: vec![16, 256],
            schemes: vec![Scheme::SparseStaggered, Scheme::DenseKernel],
            ..SearchSpace::single("fixture", Scheme::SparseStaggered, 64, 64)
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let s = space();
        let pts = s.points();
        assert_eq!(pts.len(), 12);
        assert_eq!(s.cardinality(), 12);
        assert_eq!(
            (pts[0].scheme, pts[0].tile_size, pts[0].batch_size),
            (Scheme::SparseStaggered, 32, 16)
        );
        assert_eq!((pts[1].tile_size, pts[1].batch_size), (32, 256));
        assert_eq!((pts[2].tile_size, pts[2].batch_size), (64, 16));
        assert_eq!((pts[6].scheme, pts[6].tile_size), (Scheme::DenseKernel, 32));
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn empty_dimension_is_rejected() {
        let s = SearchSpace {
            v_max: vec![],
            ..space()
        };
        assert!(matches!(
            s.validate(),
            Err(DseError::EmptyDimension(Dim::VMax))
        ));
    }

    #[test]
    fn design_point_applies_device_parameters() {
        let p = DesignPoint {
            stuck_rate: 0.02,
            std_multiplier: 2.0,
            n_states: Some(4),
            ..space().points()[0].clone()
        };
        let cfg = p.sim_config(&DeviceModel::default(), NoiseKeying::Physical);
        assert_eq!(cfg.device.p_stuck_on, 0.02);
        assert_eq!(cfg.device.p_stuck_off, 0.02);
        assert_eq!(cfg.device.r_off_std, 20e3);
        assert_eq!(cfg.device.n_states, Some(4));
        assert_eq!(cfg.io.batch_size, 16);
    }

    #[test]
    fn names_parse() {
        for d in Dim::ALL {
            assert_eq!(d.name().parse::<Dim>().unwrap(), d);
        }
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("height".parse::<Dim>().is_err());
    }
}
