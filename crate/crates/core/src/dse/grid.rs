use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::{min_max_normalize, weighted_score_with, ScoreWeights};
use super::{ConfigResult, Dim, DseError, Metric, Result, SearchSpace};
use crate::mapping::derive_costs_cross_scheme;
use crate::qnet::{Dataset, QuantizedNetwork};
use crate::xbar::{evaluate_accuracy, DeviceModel, NoiseKeying};

/// Networks addressable by id from a [`SearchSpace`].
pub type NetworkSet = BTreeMap<String, QuantizedNetwork>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Device parameters the per-point stuck rate, level count and deviation
    /// multiplier are applied to.
    pub base_device: DeviceModel,
    pub keying: NoiseKeying,
    pub weights: ScoreWeights,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            base_device: DeviceModel::default(),
            keying: NoiseKeying::Physical,
            weights: ScoreWeights::default(),
        }
    }
}

/// Evaluates every point of `space` on `data`. The result order is the grid
/// order whatever the number of workers.
pub fn grid_search(
    space: &SearchSpace,
    networks: &NetworkSet,
    data: &Dataset,
    opts: &GridOptions,
) -> Result<Vec<ConfigResult>> {
    space.validate()?;
    if let Some(id) = space.networks.iter().find(|id| !networks.contains_key(*id)) {
        return Err(DseError::UnknownNetwork(id.clone()));
    }
    let points = space.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| DseError::Pool(e.to_string()))?;
    let mut results: Vec<ConfigResult> = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(index, point)| {
                let net = &networks[&point.network];
                let config = point.sim_config(&opts.base_device, opts.keying);
                let boxed = || Box::new(point.clone());
                let tsa = evaluate_accuracy(net, point.scheme, &config, data, opts.seed).map_err(
                    |source| DseError::Evaluation {
                        index,
                        point: boxed(),
                        source,
                    },
                )?;
                let costs = derive_costs_cross_scheme(point.scheme, net, point.tile_size)
                    .get(point.scheme)
                    .clone()
                    .map_err(|source| DseError::Cost {
                        index,
                        point: boxed(),
                        source,
                    })?;
                let raw_score =
                    weighted_score_with(tsa, costs.total.rd, costs.total.rwo, opts.weights)?;
                Ok(ConfigResult {
                    index,
                    point,
                    tsa,
                    rd: costs.total.rd,
                    rwo: costs.total.rwo,
                    tiles: costs.total.tiles,
                    raw_score,
                    normalized_score: 0.0,
                    seed: opts.seed,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let raw: Vec<f64> = results.iter().map(|r| r.raw_score).collect();
    for (r, n) in results.iter_mut().zip(min_max_normalize(&raw)) {
        r.normalized_score = n;
    }
    Ok(results)
}

/// A metric laid out over two dimensions. `cells[x][y]` is `None` where no
/// result exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub x_dim: Dim,
    pub y_dim: Dim,
    pub metric: Metric,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ContourGrid {
    pub fn missing(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }
}

/// Slices `results` over `x_dim` and `y_dim`. Axis values appear in the order
/// first seen; results sharing a cell are reduced with `max`.
pub fn contour_grid(
    results: &[ConfigResult],
    x_dim: Dim,
    y_dim: Dim,
    metric: Metric,
) -> Result<ContourGrid> {
    if x_dim == y_dim {
        return Err(DseError::SameAxis(x_dim));
    }
    let mut x_labels: Vec<String> = Vec::new();
    let mut y_labels: Vec<String> = Vec::new();
    for r in results {
        for (labels, dim) in [(&mut x_labels, x_dim), (&mut y_labels, y_dim)] {
            let l = r.point.label(dim);
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
    }
    let mut cells = vec![vec![None; y_labels.len()]; x_labels.len()];
    for r in results {
        let xi = x_labels
            .iter()
            .position(|l| *l == r.point.label(x_dim))
            .expect("collected above");
        let yi = y_labels
            .iter()
            .position(|l| *l == r.point.label(y_dim))
            .expect("collected above");
        let v = metric.of(r);
        let cell: &mut Option<f64> = &mut cells[xi][yi];
        *cell = Some(cell.map_or(v, |c| c.max(v)));
    }
    Ok(ContourGrid {
        x_dim,
        y_dim,
        metric,
        x_labels,
        y_labels,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::DesignPoint;
    use crate::Scheme;

    fn result(index: usize, point: DesignPoint, tsa: f64) -> ConfigResult {
        ConfigResult {
            index,
            point,
            tsa,
            rd: 1,
            rwo: 1,
            tiles: 1,
            raw_score: tsa,
            normalized_score: tsa,
            seed: 0,
        }
    }

    fn sweep() -> Vec<ConfigResult> {
        let space = SearchSpace {
            tile_sizes: vec![16, 32, 64, 128],
            batch_sizes: vec![1, 8, 64],
            ..SearchSpace::single("n", Scheme::DenseKernel, 64, 8)
        };
        space
            .points()
            .into_iter()
            .enumerate()
            .map(|(i, p)| result(i, p, i as f64 / 12.0))
            .collect()
    }

    #[test]
    fn full_grid_shape() {
        let rs = sweep();
        let g = contour_grid(&rs, Dim::TileSize, Dim::BatchSize, Metric::Tsa).unwrap();
        assert_eq!((g.cells.len(), g.cells[0].len()), (4, 3));
        assert_eq!(g.missing(), 0);
        assert_eq!(g.x_labels, vec!["16", "32", "64", "128"]);
        for r in &rs {
            let xi = g
                .x_labels
                .iter()
                .position(|l| *l == r.point.tile_size.to_string())
                .unwrap();
            let yi = g
                .y_labels
                .iter()
                .position(|l| *l == r.point.batch_size.to_string())
                .unwrap();
            assert_eq!(g.cells[xi][yi], Some(r.tsa));
        }
    }

    #[test]
    fn missing_cell_is_flagged() {
        let mut rs = sweep();
        rs.remove(4);
        let g = contour_grid(&rs, Dim::TileSize, Dim::BatchSize, Metric::Tsa).unwrap();
        assert_eq!(g.missing(), 1);
        assert_eq!(g.cells[1][1], None);
    }

    #[test]
    fn collapsed_dimensions_reduce_with_max() {
        let mut rs = sweep();
        let mut extra = rs[0].clone();
        extra.point.scheme = Scheme::SparseStaggered;
        extra.tsa = 0.99;
        rs.push(extra);
        let g = contour_grid(&rs, Dim::TileSize, Dim::BatchSize, Metric::Tsa).unwrap();
        assert_eq!(g.cells[0][0], Some(0.99));
        assert!(matches!(
            contour_grid(&rs, Dim::Scheme, Dim::Scheme, Metric::Tsa),
            Err(DseError::SameAxis(_))
        ));
    }
}
