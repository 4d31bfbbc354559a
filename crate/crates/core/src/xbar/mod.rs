//! Crossbar simulation: device sampling, conductance programming, DAC/ADC
//! conversion, tile VMM and end-to-end inference.
//!
//! Each signed weight is the difference of two conductances in adjacent
//! columns. Inputs ride on signed word-line voltages scaled per batch. Every
//! device draws from its own keyed random stream, so sampling does not depend
//! on evaluation order or thread count.

mod convert;
mod device;
mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::MappingError;
use crate::qnet::QnetError;

pub use convert::{
    dac, encode_inputs, input_scale, readout, AdcRange, Calibration, IoConfig, MAX_IO_BITS,
};
pub use device::{
    program, reference_code, sample_device, sample_devices, DeviceModel, DeviceSample, Lineage,
    NoiseKeying, SampleContext, Stuck, TileArray, TRUNCATION_SIGMA,
};
pub use sim::{
    evaluate_accuracy, simulate_dataset, simulate_forward, tile_vmm, ProgrammedLayer,
    ProgrammedNetwork,
};

#[derive(Debug, Error)]
pub enum XbarError {
    #[error("invalid device model: {0}")]
    InvalidModel(String),
    #[error("invalid I/O configuration: {0}")]
    InvalidIo(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite input at flat index {0}")]
    NonFiniteInput(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("nonzero weight {weight} has no device in the plan")]
    MissingEntry { weight: usize },
    #[error("plan does not match: {0}")]
    PlanMismatch(String),
    #[error("readout calibration scale is zero")]
    ZeroCalibration,
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Qnet(#[from] QnetError),
}

pub type Result<T> = std::result::Result<T, XbarError>;

/// Everything needed to simulate one network under one scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub tile_size: usize,
    pub io: IoConfig,
    pub device: DeviceModel,
    #[serde(default)]
    pub keying: NoiseKeying,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tile_size: 64,
            io: IoConfig::default(),
            device: DeviceModel::default(),
            keying: NoiseKeying::Physical,
        }
    }
}

impl SimConfig {
    /// Ideal devices and converters: the simulation reproduces the ideal
    /// forward pass up to rounding.
    pub fn noiseless(tile_size: usize, batch_size: usize) -> Self {
        Self {
            tile_size,
            io: IoConfig {
                io_bits: None,
                v_max: 0.3,
                batch_size,
            },
            device: DeviceModel::ideal(),
            keying: NoiseKeying::Physical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_size < 2 {
            return Err(XbarError::InvalidConfig(format!(
                "tile_size must be at least 2, got {}",
                self.tile_size
            )));
        }
        self.io.validate()?;
        self.device.validate()
    }
}
