//! Device variability, stuck faults and differential conductance programming.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Result, XbarError};
use crate::mapping::{MappingPlan, Polarity};
use crate::qnet::WeightTensor;
use crate::rng::{fold_key, keyed_stream};

/// Normal samples further than this many standard deviations from the mean
/// are re-drawn.
pub const TRUNCATION_SIGMA: f64 = 3.0;
const MAX_REDRAWS: usize = 64;
const PHYSICAL_DOMAIN: u64 = 0xD5;
const LOGICAL_DOMAIN: u64 = 0x10C;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceModel {
    pub r_on_mean: f64,
    pub r_on_std: f64,
    pub r_off_mean: f64,
    pub r_off_std: f64,
    /// Conductance levels per device; `None` programs continuously.
    pub n_states: Option<u32>,
    pub p_stuck_on: f64,
    pub p_stuck_off: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            r_on_mean: 10e3,
            r_on_std: 1e3,
            r_off_mean: 100e3,
            r_off_std: 10e3,
            n_states: None,
            p_stuck_on: 0.005,
            p_stuck_off: 0.005,
        }
    }
}

impl DeviceModel {
    /// No variability, no stuck devices, continuous programming.
    pub fn ideal() -> Self {
        Self {
            r_on_std: 0.0,
            r_off_std: 0.0,
            p_stuck_on: 0.0,
            p_stuck_off: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(XbarError::InvalidModel(m));
        let all = [
            self.r_on_mean,
            self.r_on_std,
            self.r_off_mean,
            self.r_off_std,
            self.p_stuck_on,
            self.p_stuck_off,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if !(0.0 < self.r_on_mean && self.r_on_mean < self.r_off_mean) {
            return bad(format!(
                "need 0 < r_on_mean < r_off_mean, got {} and {}",
                self.r_on_mean, self.r_off_mean
            ));
        }
        if self.r_on_std < 0.0 || self.r_off_std < 0.0 {
            return bad("standard deviations must be non-negative".into());
        }
        if let Some(n) = self.n_states {
            if n < 2 {
                return bad(format!("n_states must be at least 2, got {n}"));
            }
        }
        for (name, p) in [
            ("p_stuck_on", self.p_stuck_on),
            ("p_stuck_off", self.p_stuck_off),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p_stuck_on + self.p_stuck_off > 1.0 {
            return bad("p_stuck_on + p_stuck_off exceeds 1".into());
        }
        Ok(())
    }

    /// Nominal ON and OFF conductances.
    pub fn nominal_conductances(&self) -> (f64, f64) {
        (1.0 / self.r_on_mean, 1.0 / self.r_off_mean)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stuck {
    Free,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceSample {
    pub r_on: f64,
    pub r_off: f64,
    pub stuck: Stuck,
}

fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean;
    }
    for _ in 0..MAX_REDRAWS {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= TRUNCATION_SIGMA {
            return (mean + std * z).max(mean * 1e-3);
        }
    }
    mean
}

/// Draws one device: the stuck state first (one uniform), then `r_on` and
/// `r_off`, re-drawing the pair until `r_on < r_off`.
///
/// A device is stuck ON when `u < p_on` and stuck OFF when `u >= 1 - p_off`,
/// so raising either rate only adds stuck devices for a fixed stream.
pub fn sample_device<R: Rng>(model: &DeviceModel, rng: &mut R) -> DeviceSample {
    let u: f64 = rng.random();
    let stuck = if u < model.p_stuck_on {
        Stuck::On
    } else if u >= 1.0 - model.p_stuck_off {
        Stuck::Off
    } else {
        Stuck::Free
    };
    for _ in 0..MAX_REDRAWS {
        let r_on = truncated_normal(rng, model.r_on_mean, model.r_on_std);
        let r_off = truncated_normal(rng, model.r_off_mean, model.r_off_std);
        if r_on < r_off {
            return DeviceSample { r_on, r_off, stuck };
        }
    }
    DeviceSample {
        r_on: model.r_on_mean,
        r_off: model.r_off_mean,
        stuck,
    }
}

/// What the per-device random stream is keyed by.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKeying {
    /// `(tile, row, column)` within the layer's placement.
    #[default]
    Physical,
    /// `(logical row, logical column, polarity)`: a weight meets the same
    /// device whatever scheme places it.
    Logical,
}

/// Provenance of a tile's random draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub seed: u64,
    /// Hash of the placement (scheme, tile size, layer) the draws are tied to.
    pub config_hash: u64,
    pub layer: usize,
    pub tile: usize,
}

/// One `t x t` crossbar, row-major over `(row, column)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TileArray {
    pub tile_size: usize,
    pub n_states: Option<u32>,
    pub lineage: Lineage,
    pub r_on: Vec<f64>,
    pub r_off: Vec<f64>,
    pub stuck: Vec<Stuck>,
    /// Conductance in siemens.
    pub g: Vec<f64>,
}

impl TileArray {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.tile_size + col
    }

    pub fn conductance(&self, row: usize, col: usize) -> f64 {
        self.g[self.index(row, col)]
    }

    /// Conductance of device `i` at programmed fraction `frac` of its range,
    /// snapped to the device's level grid.
    pub fn target(&self, i: usize, frac: f64) -> f64 {
        let frac = match self.n_states {
            Some(n) => {
                let steps = f64::from(n - 1);
                (frac * steps).round() / steps
            }
            None => frac,
        };
        let (g_on, g_off) = (1.0 / self.r_on[i], 1.0 / self.r_off[i]);
        (g_off + frac.clamp(0.0, 1.0) * (g_on - g_off)).clamp(g_off, g_on)
    }

    /// Bounds and stuck-state checks on every device.
    pub fn check(&self) -> std::result::Result<(), String> {
        for i in 0..self.g.len() {
            let (g_on, g_off) = (1.0 / self.r_on[i], 1.0 / self.r_off[i]);
            let g = self.g[i];
            let ok = match self.stuck[i] {
                Stuck::On => g == g_on,
                Stuck::Off => g == g_off,
                Stuck::Free => g >= g_off && g <= g_on,
            };
            if !ok {
                return Err(format!(
                    "device {i} ({:?}) has g = {g:e}, range [{g_off:e}, {g_on:e}]",
                    self.stuck[i]
                ));
            }
        }
        Ok(())
    }
}

/// Keys for one layer's device draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleContext {
    pub seed: u64,
    pub layer: usize,
    pub keying: NoiseKeying,
}

impl SampleContext {
    fn config_hash(&self, plan: &MappingPlan) -> u64 {
        fold_key(&[plan.scheme as u64, plan.tile_size as u64, self.layer as u64])
    }
}

fn physical_stream(
    seed: u64,
    config_hash: u64,
    tile: usize,
    row: usize,
    col: usize,
) -> rand_chacha::ChaCha8Rng {
    keyed_stream(
        seed,
        fold_key(&[PHYSICAL_DOMAIN, config_hash]),
        fold_key(&[tile as u64, row as u64, col as u64]),
    )
}

fn logical_stream(
    seed: u64,
    layer: usize,
    row: usize,
    col: usize,
    polarity: Polarity,
) -> rand_chacha::ChaCha8Rng {
    let p = match polarity {
        Polarity::Positive => 0,
        Polarity::Negative => 1,
    };
    keyed_stream(
        seed,
        fold_key(&[LOGICAL_DOMAIN, layer as u64]),
        fold_key(&[row as u64, col as u64, p]),
    )
}

/// Draws every device of every tile in `plan`. Free devices start in the OFF
/// state.
pub fn sample_devices(
    ctx: &SampleContext,
    plan: &MappingPlan,
    model: &DeviceModel,
) -> Result<Vec<TileArray>> {
    model.validate()?;
    let t = plan.tile_size;
    let config_hash = ctx.config_hash(plan);
    let mut logical: Vec<Option<(usize, usize, Polarity)>> = Vec::new();
    let mut tiles = Vec::with_capacity(plan.tiles.len());
    for tile in 0..plan.tiles.len() {
        if ctx.keying == NoiseKeying::Logical {
            logical.clear();
            logical.resize(t * t, None);
            for e in plan.entries.iter().filter(|e| e.tile == tile) {
                for pol in [Polarity::Positive, Polarity::Negative] {
                    let (_, row, col) = e.device(pol);
                    logical[row * t + col] = Some((e.logical_row, e.logical_col, pol));
                }
            }
        }
        let n = t * t;
        let mut arr = TileArray {
            tile_size: t,
            n_states: model.n_states,
            lineage: Lineage {
                seed: ctx.seed,
                config_hash,
                layer: ctx.layer,
                tile,
            },
            r_on: Vec::with_capacity(n),
            r_off: Vec::with_capacity(n),
            stuck: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
        };
        for i in 0..n {
            let mut rng = match logical.get(i).copied().flatten() {
                Some((r, c, pol)) => logical_stream(ctx.seed, ctx.layer, r, c, pol),
                None => physical_stream(ctx.seed, config_hash, tile, i / t, i % t),
            };
            let d = sample_device(model, &mut rng);
            arr.r_on.push(d.r_on);
            arr.r_off.push(d.r_off);
            arr.stuck.push(d.stuck);
            arr.g.push(match d.stuck {
                Stuck::On => 1.0 / d.r_on,
                _ => 1.0 / d.r_off,
            });
        }
        tiles.push(arr);
    }
    Ok(tiles)
}

/// Largest absolute code of a tensor, or 1 for an all-zero tensor.
pub fn reference_code(weights: &WeightTensor) -> i32 {
    weights.max_abs_code().max(1)
}

/// Writes `weights` into `tiles` along `plan`.
///
/// A weight `w` drives its `+` device to `|w| / w_max` of that device's own
/// `[1/r_off, 1/r_on]` range when positive (the `-` device stays OFF), and
/// the mirror image when negative. Stuck devices keep their conductance.
pub fn program(tiles: &mut [TileArray], plan: &MappingPlan, weights: &WeightTensor) -> Result<()> {
    if tiles.len() != plan.tiles.len() {
        return Err(XbarError::PlanMismatch(format!(
            "{} tile arrays for {} planned tiles",
            tiles.len(),
            plan.tiles.len()
        )));
    }
    if weights.codes.len() != plan.weight_count {
        return Err(XbarError::PlanMismatch(format!(
            "{} weights for a plan over {}",
            weights.codes.len(),
            plan.weight_count
        )));
    }
    let w_ref = f64::from(reference_code(weights));
    let mut placed = vec![false; weights.codes.len()];
    for e in &plan.entries {
        let code = match e.weight {
            Some(w) => {
                placed[w] = true;
                weights.codes[w]
            }
            None => 0,
        };
        let frac = f64::from(code.abs()) / w_ref;
        let (pos, neg) = if code > 0 { (frac, 0.0) } else { (0.0, frac) };
        let tile = &mut tiles[e.tile];
        for (pol, f) in [(Polarity::Positive, pos), (Polarity::Negative, neg)] {
            let (_, row, col) = e.device(pol);
            let i = tile.index(row, col);
            if tile.stuck[i] == Stuck::Free {
                tile.g[i] = tile.target(i, f);
            }
        }
    }
    if let Some(w) = (0..placed.len()).find(|&w| !placed[w] && weights.codes[w] != 0) {
        return Err(XbarError::MissingEntry { weight: w });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_linear_dense, map_linear_sparse};
    use crate::rng::seeded;

    fn linear(codes: Vec<i32>, out: usize, inp: usize) -> WeightTensor {
        WeightTensor {
            shape: vec![out, inp],
            codes,
            scale: 0.5,
            bit_width: 4,
        }
    }

    #[test]
    fn default_model_is_valid_and_bad_models_are_rejected() {
        DeviceModel::default().validate().unwrap();
        let bad = [
            DeviceModel {
                r_on_mean: 200e3,
                ..DeviceModel::default()
            },
            DeviceModel {
                n_states: Some(1),
                ..DeviceModel::default()
            },
            DeviceModel {
                p_stuck_on: 0.6,
                p_stuck_off: 0.6,
                ..DeviceModel::default()
            },
            DeviceModel {
                r_off_std: -1.0,
                ..DeviceModel::default()
            },
            DeviceModel {
                r_on_std: f64::NAN,
                ..DeviceModel::default()
            },
        ];
        for m in bad {
            assert!(
                matches!(m.validate(), Err(XbarError::InvalidModel(_))),
                "{m:?}"
            );
        }
        DeviceModel {
            p_stuck_on: 0.0,
            p_stuck_off: 1.0,
            ..DeviceModel::default()
        }
        .validate()
        .unwrap();
    }

    #[test]
    fn samples_stay_within_truncation_and_ordered() {
        let m = DeviceModel {
            r_on_std: 40e3,
            r_off_std: 40e3,
            ..DeviceModel::default()
        };
        let mut rng = seeded(3, 0);
        for _ in 0..5000 {
            let d = sample_device(&m, &mut rng);
            assert!(d.r_on > 0.0 && d.r_on < d.r_off);
            assert!((d.r_on - m.r_on_mean).abs() <= 3.0 * m.r_on_std + 1e-9);
        }
    }

    #[test]
    fn stuck_sets_grow_with_rate() {
        for s in 0..2000u64 {
            let lo = DeviceModel {
                p_stuck_on: 0.02,
                p_stuck_off: 0.02,
                ..DeviceModel::default()
            };
            let hi = DeviceModel {
                p_stuck_on: 0.1,
                p_stuck_off: 0.1,
                ..DeviceModel::default()
            };
            let a = sample_device(&lo, &mut seeded(s, 9));
            let b = sample_device(&hi, &mut seeded(s, 9));
            if a.stuck != Stuck::Free {
                assert_eq!(a.stuck, b.stuck);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = linear(vec![1, -2, 3, 0, 5, -7], 2, 3);
        let plan = map_linear_sparse(&w, 4).unwrap();
        let ctx = SampleContext {
            seed: 0,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let a = sample_devices(&ctx, &plan, &DeviceModel::default()).unwrap();
        let b = sample_devices(&ctx, &plan, &DeviceModel::default()).unwrap();
        assert_eq!(a, b);
        let c = sample_devices(
            &SampleContext { seed: 1, ..ctx },
            &plan,
            &DeviceModel::default(),
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ideal_programming_hits_endpoints() {
        let w = linear(vec![7, -7, 0, 3], 2, 2);
        let plan = map_linear_sparse(&w, 4).unwrap();
        let ctx = SampleContext {
            seed: 0,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let mut tiles = sample_devices(&ctx, &plan, &DeviceModel::ideal()).unwrap();
        program(&mut tiles, &plan, &w).unwrap();
        let (g_on, g_off) = DeviceModel::ideal().nominal_conductances();
        let g = |wi: usize, pol| {
            let e = plan.entries.iter().find(|e| e.weight == Some(wi)).unwrap();
            let (t, r, c) = e.device(pol);
            tiles[t].conductance(r, c)
        };
        assert_eq!(
            (g(0, Polarity::Positive), g(0, Polarity::Negative)),
            (g_on, g_off)
        );
        assert_eq!(
            (g(1, Polarity::Positive), g(1, Polarity::Negative)),
            (g_off, g_on)
        );
        assert_eq!(
            (g(2, Polarity::Positive), g(2, Polarity::Negative)),
            (g_off, g_off)
        );
        let expect = g_off + 3.0 / 7.0 * (g_on - g_off);
        assert!((g(3, Polarity::Positive) - expect).abs() < 1e-18);
        for t in &tiles {
            t.check().unwrap();
        }
    }

    #[test]
    fn snapping_uses_the_device_grid() {
        let ctx = SampleContext {
            seed: 0,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let w = linear(vec![1, 2, 3, 4, 5, 6, 7, 0], 2, 4);
        let plan = map_linear_sparse(&w, 8).unwrap();
        let model = DeviceModel {
            n_states: Some(4),
            ..DeviceModel::default()
        };
        let tiles = sample_devices(&ctx, &plan, &model).unwrap();
        let t = &tiles[0];
        let levels: Vec<f64> = (0..4).map(|k| t.target(0, k as f64 / 3.0)).collect();
        let gap = levels[1] - levels[0];
        for step in 0..=100 {
            let frac = step as f64 / 100.0;
            let exact = 1.0 / t.r_off[0] + frac * (1.0 / t.r_on[0] - 1.0 / t.r_off[0]);
            let g = t.target(0, frac);
            assert!(levels.iter().any(|l| (l - g).abs() < 1e-15));
            assert!((g - exact).abs() <= gap / 2.0 + 1e-15);
        }
    }

    #[test]
    fn stuck_devices_ignore_programming() {
        let w = linear((1..=16).map(|v| v % 8 - 3).collect(), 4, 4);
        let plan = map_linear_sparse(&w, 8).unwrap();
        let ctx = SampleContext {
            seed: 5,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let model = DeviceModel {
            p_stuck_on: 0.2,
            p_stuck_off: 0.2,
            ..DeviceModel::default()
        };
        let before = sample_devices(&ctx, &plan, &model).unwrap();
        let mut after = before.clone();
        program(&mut after, &plan, &w).unwrap();
        for (a, b) in before.iter().zip(&after) {
            b.check().unwrap();
            for i in 0..a.g.len() {
                if a.stuck[i] != Stuck::Free {
                    assert_eq!(a.g[i], b.g[i]);
                }
            }
        }
        assert!(before[0].stuck.iter().any(|s| *s != Stuck::Free));
    }

    #[test]
    fn weight_missing_from_plan_is_an_error() {
        let w = linear(vec![0, 1, 2, 3], 2, 2);
        let plan = map_linear_dense(&w, 4).unwrap();
        let ctx = SampleContext {
            seed: 0,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let mut tiles = sample_devices(&ctx, &plan, &DeviceModel::ideal()).unwrap();
        let other = linear(vec![5, 1, 2, 3], 2, 2);
        assert!(matches!(
            program(&mut tiles, &plan, &other),
            Err(XbarError::MissingEntry { weight: 0 })
        ));
    }

    #[test]
    fn logical_keying_follows_the_weight() {
        let w = linear(vec![1, 0, 2, 0, 3, 4], 2, 3);
        let sparse = map_linear_sparse(&w, 4).unwrap();
        let dense = map_linear_dense(&w, 4).unwrap();
        let ctx = SampleContext {
            seed: 2,
            layer: 1,
            keying: NoiseKeying::Logical,
        };
        let model = DeviceModel::default();
        let a = sample_devices(&ctx, &sparse, &model).unwrap();
        let b = sample_devices(&ctx, &dense, &model).unwrap();
        for e in &dense.entries {
            let f = sparse
                .entries
                .iter()
                .find(|f| f.weight == e.weight)
                .unwrap();
            for pol in [Polarity::Positive, Polarity::Negative] {
                let (ti, r, c) = e.device(pol);
                let (tj, s, d) = f.device(pol);
                assert_eq!(b[ti].r_on[b[ti].index(r, c)], a[tj].r_on[a[tj].index(s, d)]);
            }
        }
    }
}
