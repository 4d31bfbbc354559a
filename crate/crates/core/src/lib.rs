//! Tiled RRAM crossbar inference simulator and design-space exploration.
//!
//! The crate is organised bottom-up:
//!
//! - [`qnet`] -- bias-free quantized networks, synthetic datasets, the ideal
//!   (noise-free) forward pass and a small deterministic fixture trainer.
//! - [`mapping`] -- placement of layers onto differential crossbar tiles under
//!   the sparse/staggered, dense-routed and dense-kernel schemes, plus the
//!   closed-form device and step counts and constructive cost reports.
//! - [`xbar`] -- device sampling with variability and stuck faults,
//!   conductance programming, DAC/ADC conversion, tile VMM and end-to-end
//!   simulated inference.
//! - [`dse`] -- grid search over hardware configurations, weighted scoring,
//!   min-max normalization, contour grids and ranking.
//! - [`cli`] -- run configuration files, report emission (CSV/SVG) and the
//!   command implementations behind the `rram-dse` binary.

pub mod cli;
pub mod dse;
pub mod mapping;
pub mod qnet;
pub mod rng;
pub mod xbar;

pub use dse::{ConfigResult, DesignPoint, SearchSpace};
pub use mapping::{ConvGeometry, CostReport, MappingPlan, Scheme};
pub use qnet::{Dataset, FeatureShape, LayerOp, LayerSpec, QuantizedNetwork, WeightTensor};
pub use xbar::{DeviceModel, IoConfig, SimConfig};
