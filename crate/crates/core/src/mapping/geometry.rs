use serde::{Deserialize, Serialize};

use super::MappingError;
use crate::qnet::{ConvParams, FeatureShape};

/// Convolution geometry in the symbols of the cost model: `K` kernels of
/// `H x W` over a `X x Y` input with stride `S`, zero padding `P` per side and
/// dilation `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub kernels: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub channels: usize,
    /// 1-d convolution: `W = Y = 1` and no padding along the width.
    pub one_d: bool,
}

impl ConvGeometry {
    pub fn from_params(p: &ConvParams, input: FeatureShape, one_d: bool) -> Self {
        Self {
            kernels: p.kernels,
            kernel_height: p.kernel_height,
            kernel_width: if one_d { 1 } else { p.kernel_width },
            input_height: input.height,
            input_width: input.width,
            stride: p.stride,
            padding: p.padding,
            dilation: p.dilation,
            channels: p.in_channels,
            one_d,
        }
    }

    /// A single-channel 1-d geometry, handy for worked examples.
    pub fn conv1d(
        kernels: usize,
        h: usize,
        x: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Self {
        Self {
            kernels,
            kernel_height: h,
            kernel_width: 1,
            input_height: x,
            input_width: 1,
            stride,
            padding,
            dilation,
            channels: 1,
            one_d: true,
        }
    }

    pub fn padding_y(&self) -> usize {
        if self.one_d {
            0
        } else {
            self.padding
        }
    }

    pub fn padded_height(&self) -> usize {
        self.input_height + 2 * self.padding
    }

    pub fn padded_width(&self) -> usize {
        self.input_width + 2 * self.padding_y()
    }

    fn extent(&self, padded: usize, kernel: usize) -> usize {
        let span = self.dilation * (kernel - 1) + 1;
        if padded < span || self.stride == 0 {
            0
        } else {
            (padded - span) / self.stride + 1
        }
    }

    /// `floor((X + 2P - D(H-1) - 1) / S) + 1`, or 0 when the kernel does not fit.
    pub fn output_height(&self) -> usize {
        self.extent(self.padded_height(), self.kernel_height)
    }

    pub fn output_width(&self) -> usize {
        self.extent(self.padded_width(), self.kernel_width)
    }

    pub fn output_positions(&self) -> usize {
        self.output_height() * self.output_width()
    }

    /// Elements of one kernel across all input channels, `C * H * W`.
    pub fn footprint(&self) -> usize {
        self.channels * self.kernel_height * self.kernel_width
    }

    pub fn padded_len(&self) -> usize {
        self.channels * self.padded_height() * self.padded_width()
    }

    pub fn weight_count(&self) -> usize {
        self.kernels * self.footprint()
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let positive = [
            ("K", self.kernels),
            ("H", self.kernel_height),
            ("W", self.kernel_width),
            ("S", self.stride),
            ("D", self.dilation),
            ("channels", self.channels),
            ("X", self.input_height),
            ("Y", self.input_width),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(MappingError::InvalidGeometry(format!(
                "{name} must be at least 1"
            )));
        }
        if self.one_d && (self.kernel_width != 1 || self.input_width != 1) {
            return Err(MappingError::InvalidGeometry(
                "1-d convolution needs W = Y = 1".into(),
            ));
        }
        if self.output_positions() == 0 {
            return Err(MappingError::EmptyOutput {
                padded: self.padded_height(),
                span: self.dilation * (self.kernel_height - 1) + 1,
            });
        }
        Ok(())
    }

    /// Padded-input index read by footprint element `row` at output position `pos`.
    pub fn window_index(&self, pos: usize, row: usize) -> usize {
        let (h, w) = (self.kernel_height, self.kernel_width);
        let c = row / (h * w);
        let kh = (row / w) % h;
        let kw = row % w;
        let ow = self.output_width();
        let (ox, oy) = (pos / ow, pos % ow);
        let px = ox * self.stride + kh * self.dilation;
        let py = oy * self.stride + kw * self.dilation;
        (c * self.padded_height() + px) * self.padded_width() + py
    }

    /// Maps a padded-input index to the unpadded input index, or `None` for
    /// a padding position.
    pub fn unpad(&self, padded: usize) -> Option<usize> {
        let (ph, pw) = (self.padded_height(), self.padded_width());
        let c = padded / (ph * pw);
        let px = (padded / pw) % ph;
        let py = padded % pw;
        let ix = px
            .checked_sub(self.padding)
            .filter(|&v| v < self.input_height)?;
        let iy = py
            .checked_sub(self.padding_y())
            .filter(|&v| v < self.input_width)?;
        Some((c * self.input_height + ix) * self.input_width + iy)
    }

    fn covered(&self, padded: usize, kernel: usize, outputs: usize) -> Vec<bool> {
        let mut seen = vec![false; padded];
        for o in 0..outputs {
            for k in 0..kernel {
                seen[o * self.stride + k * self.dilation] = true;
            }
        }
        seen
    }

    /// Padded positions touched by at least one window, channel-major.
    pub fn covered_rows(&self) -> Vec<usize> {
        let cx = self.covered(
            self.padded_height(),
            self.kernel_height,
            self.output_height(),
        );
        let cy = self.covered(self.padded_width(), self.kernel_width, self.output_width());
        let (ph, pw) = (self.padded_height(), self.padded_width());
        let mut rows = Vec::new();
        for c in 0..self.channels {
            for px in (0..ph).filter(|&p| cx[p]) {
                for py in (0..pw).filter(|&p| cy[p]) {
                    rows.push((c * ph + px) * pw + py);
                }
            }
        }
        rows
    }
}
