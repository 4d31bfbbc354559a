//! Input encoding (DAC) and output readout (ADC).

use serde::{Deserialize, Serialize};

use super::{Result, XbarError};

/// Widest converter resolution accepted.
pub const MAX_IO_BITS: u32 = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    /// DAC/ADC resolution; `None` models ideal converters.
    pub io_bits: Option<u32>,
    /// Largest word-line voltage magnitude, in volts.
    pub v_max: f64,
    /// Samples sharing one input scaling.
    pub batch_size: usize,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            io_bits: Some(8),
            v_max: 0.3,
            batch_size: 64,
        }
    }
}

impl IoConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.io_bits {
            if !(1..=MAX_IO_BITS).contains(&b) {
                return Err(XbarError::InvalidIo(format!(
                    "io_bits must lie in 1..={MAX_IO_BITS}, got {b}"
                )));
            }
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(XbarError::InvalidIo(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        if self.batch_size == 0 {
            return Err(XbarError::InvalidIo("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Volts per input unit for a batch: `v_max / max|x|`, or 0 for an all-zero
/// batch.
pub fn input_scale(batch: &[Vec<f64>], v_max: f64) -> Result<f64> {
    let mut peak = 0.0f64;
    let mut flat = 0;
    for sample in batch {
        for &x in sample {
            if !x.is_finite() {
                return Err(XbarError::NonFiniteInput(flat));
            }
            peak = peak.max(x.abs());
            flat += 1;
        }
    }
    Ok(if peak == 0.0 { 0.0 } else { v_max / peak })
}

/// Signed DAC: `2^(b-1)` steps on each side of zero, so levels are
/// `k * v_max / 2^(b-1)` for `k` in `-2^(b-1)..=2^(b-1)`.
pub fn dac(v: f64, v_max: f64, bits: Option<u32>) -> f64 {
    match bits {
        None => v,
        Some(b) => {
            let steps = 2f64.powi(b as i32 - 1);
            let lsb = v_max / steps;
            ((v / lsb).round().clamp(-steps, steps)) * lsb
        }
    }
}

/// Scales a batch into word-line voltages. Returns the voltages and the
/// scale used.
pub fn encode_inputs(batch: &[Vec<f64>], io: &IoConfig) -> Result<(Vec<Vec<f64>>, f64)> {
    if batch.is_empty() {
        return Err(XbarError::EmptyBatch);
    }
    let scale = input_scale(batch, io.v_max)?;
    let volts = batch
        .iter()
        .map(|s| {
            s.iter()
                .map(|&x| dac(x * scale, io.v_max, io.io_bits))
                .collect()
        })
        .collect();
    Ok((volts, scale))
}

/// ADC input range of one layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdcRange {
    pub lo: f64,
    pub hi: f64,
}

impl AdcRange {
    /// Smallest range covering every value.
    pub fn covering<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, &v| match acc {
            None => Some(Self { lo: v, hi: v }),
            Some(r) => Some(Self {
                lo: r.lo.min(v),
                hi: r.hi.max(v),
            }),
        })
    }

    /// `2^b` levels from `lo` to `hi` inclusive; inputs outside saturate.
    pub fn quantize(&self, y: f64, bits: u32) -> f64 {
        let span = self.hi - self.lo;
        if span <= 0.0 {
            return self.lo;
        }
        let steps = 2f64.powi(bits as i32) - 1.0;
        let lsb = span / steps;
        self.lo + ((y.clamp(self.lo, self.hi) - self.lo) / lsb).round() * lsb
    }
}

/// Scale factors that turn a differential current back into a weight-domain
/// dot product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// Volts per input unit.
    pub voltage_scale: f64,
    /// Siemens per unit of real weight.
    pub conductance_scale: f64,
}

/// `y = (i_pos - i_neg) / (voltage_scale * conductance_scale)`, then the ADC
/// when both `bits` and `range` are given.
pub fn readout(
    i_pos: &[f64],
    i_neg: &[f64],
    cal: Calibration,
    bits: Option<u32>,
    range: Option<AdcRange>,
) -> Result<Vec<f64>> {
    if i_pos.len() != i_neg.len() {
        return Err(XbarError::DimMismatch {
            expected: i_pos.len(),
            got: i_neg.len(),
        });
    }
    let denom = cal.voltage_scale * cal.conductance_scale;
    if denom == 0.0 || !denom.is_finite() {
        return Err(XbarError::ZeroCalibration);
    }
    Ok(i_pos
        .iter()
        .zip(i_neg)
        .map(|(p, n)| {
            let y = (p - n) / denom;
            match (bits, range) {
                (Some(b), Some(r)) => r.quantize(y, b),
                _ => y,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn io(bits: Option<u32>) -> IoConfig {
        IoConfig {
            io_bits: bits,
            v_max: 0.3,
            batch_size: 4,
        }
    }

    #[test]
    fn linear_scaling_before_quantization() {
        let (v, s) = encode_inputs(&[vec![1.0, -2.0, 0.0]], &io(None)).unwrap();
        assert!((v[0][0] - 0.15).abs() < 1e-15);
        assert!((v[0][1] + 0.3).abs() < 1e-15);
        assert_eq!(v[0][2], 0.0);
        assert!((s - 0.15).abs() < 1e-15);
    }

    #[test]
    fn all_zero_batch_is_zero_volts() {
        let (v, s) = encode_inputs(&[vec![0.0; 3], vec![0.0; 3]], &io(Some(4))).unwrap();
        assert_eq!(s, 0.0);
        assert!(v.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn one_bit_dac_levels() {
        let batch: Vec<Vec<f64>> = vec![(0..41).map(|i| (i as f64 - 20.0) / 20.0).collect()];
        let (v, _) = encode_inputs(&batch, &io(Some(1))).unwrap();
        let levels: BTreeSet<i64> = v[0].iter().map(|x| (x * 1e6).round() as i64).collect();
        assert_eq!(
            levels.into_iter().collect::<Vec<_>>(),
            vec![-300_000, 0, 300_000]
        );
    }

    #[test]
    fn non_finite_and_empty_inputs_are_rejected() {
        assert!(matches!(
            encode_inputs(&[vec![1.0, f64::NAN]], &io(None)),
            Err(XbarError::NonFiniteInput(1))
        ));
        assert!(matches!(
            encode_inputs(&[], &io(None)),
            Err(XbarError::EmptyBatch)
        ));
    }

    #[test]
    fn adc_cardinality() {
        let r = AdcRange { lo: -1.0, hi: 2.0 };
        let out = readout(
            &(0..100).map(|i| i as f64 * 0.05 - 1.5).collect::<Vec<_>>(),
            &[0.0; 100],
            Calibration {
                voltage_scale: 1.0,
                conductance_scale: 1.0,
            },
            Some(2),
            Some(r),
        )
        .unwrap();
        let distinct: BTreeSet<u64> = out.iter().map(|v| v.to_bits()).collect();
        assert!(distinct.len() <= 4);
        assert_eq!(out[0], -1.0);
        assert_eq!(*out.last().unwrap(), 2.0);
    }

    #[test]
    fn readout_checks() {
        let cal = Calibration {
            voltage_scale: 2.0,
            conductance_scale: 0.5,
        };
        assert_eq!(readout(&[3.0], &[3.0], cal, None, None).unwrap(), vec![0.0]);
        assert_eq!(readout(&[3.0], &[1.0], cal, None, None).unwrap(), vec![2.0]);
        let zero = Calibration {
            voltage_scale: 0.0,
            conductance_scale: 0.5,
        };
        assert!(matches!(
            readout(&[1.0], &[0.0], zero, None, None),
            Err(XbarError::ZeroCalibration)
        ));
        assert!(readout(&[1.0], &[], cal, None, None).is_err());
    }

    #[test]
    fn io_validation() {
        io(Some(8)).validate().unwrap();
        assert!(io(Some(0)).validate().is_err());
        assert!(IoConfig {
            v_max: 0.0,
            ..io(None)
        }
        .validate()
        .is_err());
        assert!(IoConfig {
            batch_size: 0,
            ..io(None)
        }
        .validate()
        .is_err());
    }
}
