use serde::{Deserialize, Serialize};

use super::{QnetError, Result, SUPPORTED_BIT_WIDTHS};

/// Largest code magnitude for a symmetric `bits`-wide quantizer.
///
/// The most negative two's-complement code is never used, so codes live in
/// `[-max_code, max_code]`.
pub const fn max_code(bits: u8) -> i32 {
    (1i32 << (bits - 1)) - 1
}

/// Integer weight codes with a single per-tensor scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    /// Row-major codes.
    pub codes: Vec<i32>,
    /// Real weight per code step.
    pub scale: f64,
    pub bit_width: u8,
}

impl WeightTensor {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.codes
            .iter()
            .map(|&c| f64::from(c) * self.scale)
            .collect()
    }

    pub fn value(&self, index: usize) -> f64 {
        f64::from(self.codes[index]) * self.scale
    }

    /// Largest absolute code, or 0 for an all-zero tensor.
    pub fn max_abs_code(&self) -> i32 {
        self.codes.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_BIT_WIDTHS.contains(&self.bit_width) {
            return Err(QnetError::BitWidth(self.bit_width));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(QnetError::Validation {
                path: "scale".into(),
                message: format!("scale must be positive and finite, got {}", self.scale),
            });
        }
        let expected: usize = self.shape.iter().product();
        if expected != self.codes.len() {
            return Err(QnetError::Validation {
                path: "codes".into(),
                message: format!(
                    "{} codes for shape {:?} ({expected} expected)",
                    self.codes.len(),
                    self.shape
                ),
            });
        }
        let limit = max_code(self.bit_width);
        if let Some((i, c)) = self.codes.iter().enumerate().find(|(_, c)| c.abs() > limit) {
            return Err(QnetError::Validation {
                path: format!("codes[{i}]"),
                message: format!(
                    "code {c} outside ±{limit} for {}-bit weights",
                    self.bit_width
                ),
            });
        }
        Ok(())
    }
}

/// Post-hoc symmetric uniform quantization with one scale per tensor.
///
/// `scale = max|v| / (2^(b-1) - 1)`; codes round half away from zero and are
/// clamped to the symmetric range. An all-zero tensor gets `scale = 1`.
pub fn quantize_weights(values: &[f64], shape: &[usize], bits: u8) -> Result<WeightTensor> {
    if !SUPPORTED_BIT_WIDTHS.contains(&bits) {
        return Err(QnetError::BitWidth(bits));
    }
    if values.is_empty() {
        return Err(QnetError::EmptyTensor);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(QnetError::NonFinite(i));
    }
    if shape.iter().product::<usize>() != values.len() {
        return Err(QnetError::Shape(format!(
            "{} values for shape {shape:?}",
            values.len()
        )));
    }
    let limit = max_code(bits);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak == 0.0 {
        1.0
    } else {
        peak / f64::from(limit)
    };
    let lim = f64::from(limit);
    let codes = values
        .iter()
        .map(|v| (v / scale).round().clamp(-lim, lim) as i32)
        .collect();
    Ok(WeightTensor {
        shape: shape.to_vec(),
        codes,
        scale,
        bit_width: bits,
    })
}
