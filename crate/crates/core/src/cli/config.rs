//! Run configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, Result};
use crate::dse::{GridOptions, ScoreWeights, SearchSpace};
use crate::xbar::{DeviceModel, NoiseKeying, MAX_IO_BITS};

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MAX_POINTS: usize = 10_000;

fn default_version() -> u32 {
    CONFIG_FORMAT_VERSION
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS
}

fn default_svg() -> bool {
    true
}

/// A run configuration. Relative paths are resolved against the directory
/// of the file they were read from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub format_version: u32,
    /// Network files by id.
    pub networks: BTreeMap<String, PathBuf>,
    /// Evaluation dataset.
    pub dataset: PathBuf,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    /// Largest grid `dse` will run.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
    /// Device parameters not swept by the space.
    #[serde(default)]
    pub device: DeviceModel,
    #[serde(default)]
    pub keying: NoiseKeying,
    #[serde(default)]
    pub score: ScoreWeights,
    /// An empty network list means every configured network.
    #[serde(default)]
    pub space: SearchSpace,
    #[serde(default = "default_svg")]
    pub svg: bool,
}

impl RunConfig {
    pub fn new(networks: BTreeMap<String, PathBuf>, dataset: PathBuf, space: SearchSpace) -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            networks,
            dataset,
            out: None,
            seed: 0,
            jobs: 0,
            max_points: DEFAULT_MAX_POINTS,
            device: DeviceModel::default(),
            keying: NoiseKeying::Physical,
            score: ScoreWeights::default(),
            space,
            svg: true,
        }
    }

    /// Reads a config, resolves its paths and fills the network list.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &PathBuf| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.clone()
            }
        };
        for p in self.networks.values_mut() {
            *p = join(p);
        }
        self.dataset = join(&self.dataset);
        self.out = self.out.as_ref().map(join);
        if self.space.networks.is_empty() {
            self.space.networks = self.networks.keys().cloned().collect();
        }
    }

    /// Every problem with the config, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.format_version != CONFIG_FORMAT_VERSION {
            errs.push(format!(
                "format_version: expected {CONFIG_FORMAT_VERSION}, got {}",
                self.format_version
            ));
        }
        if self.networks.is_empty() {
            errs.push("networks: at least one network file is required".into());
        }
        for (id, p) in &self.networks {
            if !p.is_file() {
                errs.push(format!("networks.{id}: file not found: {}", p.display()));
            }
        }
        if !self.dataset.is_file() {
            errs.push(format!(
                "dataset: file not found: {}",
                self.dataset.display()
            ));
        }
        if let Err(e) = self.device.validate() {
            errs.push(format!("device: {e}"));
        }
        let s = &self.space;
        let field = |name: &str, i: usize, msg: String| format!("space.{name}[{i}]: {msg}");
        for (name, len) in s.dimension_sizes() {
            if len == 0 {
                errs.push(format!("space.{name}: needs at least one value"));
            }
        }
        for (i, id) in s.networks.iter().enumerate() {
            if !self.networks.contains_key(id) {
                errs.push(field("networks", i, format!("unknown network id '{id}'")));
            }
        }
        for (i, b) in s.io_bits.iter().enumerate() {
            if let Some(b) = b {
                if !(1..=MAX_IO_BITS).contains(b) {
                    errs.push(field(
                        "io_bits",
                        i,
                        format!("{b} is outside 1..={MAX_IO_BITS}"),
                    ));
                }
            }
        }
        for (i, t) in s.tile_sizes.iter().enumerate() {
            if *t < 2 {
                errs.push(field(
                    "tile_sizes",
                    i,
                    format!("{t} cannot hold a differential pair"),
                ));
            }
        }
        for (i, v) in s.v_max.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                errs.push(field("v_max", i, format!("{v} is not a positive voltage")));
            }
        }
        for (i, p) in s.stuck_rates.iter().enumerate() {
            if !(0.0..=0.5).contains(p) {
                errs.push(field("stuck_rates", i, format!("{p} is outside [0, 0.5]")));
            }
        }
        for (i, n) in s.n_states.iter().enumerate() {
            if let Some(n) = n {
                if *n < 2 {
                    errs.push(field("n_states", i, format!("{n} is below 2")));
                }
            }
        }
        for (i, m) in s.std_multipliers.iter().enumerate() {
            if !(m.is_finite() && *m >= 0.0) {
                errs.push(field(
                    "std_multipliers",
                    i,
                    format!("{m} is not a non-negative factor"),
                ));
            }
        }
        for (i, b) in s.batch_sizes.iter().enumerate() {
            if *b == 0 {
                errs.push(field(
                    "batch_sizes",
                    i,
                    "batch size must be at least 1".into(),
                ));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }

    pub fn grid_options(&self) -> GridOptions {
        GridOptions {
            seed: self.seed,
            jobs: self.jobs,
            base_device: self.device.clone(),
            keying: self.keying,
            weights: self.score,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Short SHA-256 digest of the resolved config, without output location
    /// and worker count, which do not affect results.
    pub fn fingerprint(&self) -> String {
        let canonical = RunConfig {
            out: None,
            jobs: 0,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
