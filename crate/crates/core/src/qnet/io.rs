//! Network (JSON) and dataset (CSV) files.
//!
//! Network file:
//!
//! ```json
//! { "format_version": 1, "name": "fixture-s0", "bit_width": 4, "seed": 0,
//!   "input_shape": [1, 8, 8],
//!   "layers": [
//!     { "kind": "conv2d", "in_channels": 1, "kernels": 4, "kernel_height": 3,
//!       "kernel_width": 3, "stride": 1, "padding": 0, "dilation": 1,
//!       "codes": [...], "scale": 0.05 },
//!     { "kind": "linear", "in_features": 144, "out_features": 4,
//!       "codes": [...], "scale": 0.03 } ] }
//! ```
//!
//! Codes are flat and row-major (`[K, C, H, W]` or `[out, in]`). `conv1d`
//! layers carry `kernel_height` only.
//!
//! Dataset file: a `#format_version=1;classes=<n>;shape=<C>x<X>x<Y>` line, a
//! header row `label,f0,f1,...`, then one row per sample.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ConvParams, Dataset, FeatureShape, LayerOp, QnetError, QuantizedNetwork, Result, Sample,
    WeightTensor,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format_version: u32,
    name: String,
    bit_width: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    input_shape: [usize; 3],
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerRecord {
    Conv2d {
        in_channels: usize,
        kernels: usize,
        kernel_height: usize,
        kernel_width: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        codes: Vec<i64>,
        scale: f64,
    },
    Conv1d {
        in_channels: usize,
        kernels: usize,
        kernel_height: usize,
        stride: usize,
        padding: usize,
        dilation: usize,
        codes: Vec<i64>,
        scale: f64,
    },
    Linear {
        in_features: usize,
        out_features: usize,
        codes: Vec<i64>,
        scale: f64,
    },
}

impl LayerRecord {
    fn from_layer(op: &LayerOp, w: &WeightTensor) -> Self {
        let codes = w.codes.iter().map(|&c| i64::from(c)).collect();
        match *op {
            LayerOp::Conv2d(p) => LayerRecord::Conv2d {
                in_channels: p.in_channels,
                kernels: p.kernels,
                kernel_height: p.kernel_height,
                kernel_width: p.kernel_width,
                stride: p.stride,
                padding: p.padding,
                dilation: p.dilation,
                codes,
                scale: w.scale,
            },
            LayerOp::Conv1d(p) => LayerRecord::Conv1d {
                in_channels: p.in_channels,
                kernels: p.kernels,
                kernel_height: p.kernel_height,
                stride: p.stride,
                padding: p.padding,
                dilation: p.dilation,
                codes,
                scale: w.scale,
            },
            LayerOp::Linear {
                in_features,
                out_features,
            } => LayerRecord::Linear {
                in_features,
                out_features,
                codes,
                scale: w.scale,
            },
        }
    }

    fn into_layer(self, index: usize, bits: u8) -> Result<(LayerOp, WeightTensor)> {
        let (op, codes, scale) = match self {
            LayerRecord::Conv2d {
                in_channels,
                kernels,
                kernel_height,
                kernel_width,
                stride,
                padding,
                dilation,
                codes,
                scale,
            } => (
                LayerOp::Conv2d(ConvParams {
                    in_channels,
                    kernels,
                    kernel_height,
                    kernel_width,
                    stride,
                    padding,
                    dilation,
                }),
                codes,
                scale,
            ),
            LayerRecord::Conv1d {
                in_channels,
                kernels,
                kernel_height,
                stride,
                padding,
                dilation,
                codes,
                scale,
            } => (
                LayerOp::Conv1d(ConvParams {
                    in_channels,
                    kernels,
                    kernel_height,
                    kernel_width: 1,
                    stride,
                    padding,
                    dilation,
                }),
                codes,
                scale,
            ),
            LayerRecord::Linear {
                in_features,
                out_features,
                codes,
                scale,
            } => (
                LayerOp::Linear {
                    in_features,
                    out_features,
                },
                codes,
                scale,
            ),
        };
        let path = format!("layers[{index}]");
        let limit = i64::from(super::max_code(bits));
        let codes = codes
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.abs() > limit {
                    Err(QnetError::Validation {
                        path: format!("{path}.codes[{i}]"),
                        message: format!("code {c} outside ±{limit} for {bits}-bit weights"),
                    })
                } else {
                    Ok(c as i32)
                }
            })
            .collect::<Result<Vec<i32>>>()?;
        let weights = WeightTensor {
            shape: op.weight_shape(),
            codes,
            scale,
            bit_width: bits,
        };
        weights.validate().map_err(|e| match e {
            QnetError::Validation { path: p, message } => QnetError::Validation {
                path: format!("{path}.{p}"),
                message,
            },
            other => other,
        })?;
        Ok((op, weights))
    }
}

pub fn network_to_json(net: &QuantizedNetwork) -> String {
    let file = NetworkFile {
        format_version: FORMAT_VERSION,
        name: net.name.clone(),
        bit_width: net.bit_width,
        seed: net.seed,
        input_shape: [
            net.input_shape.channels,
            net.input_shape.height,
            net.input_shape.width,
        ],
        layers: net
            .layers
            .iter()
            .map(|l| LayerRecord::from_layer(&l.spec.op, &l.weights))
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<QuantizedNetwork> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| QnetError::Parse(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(QnetError::Validation {
            path: "format_version".into(),
            message: format!("unsupported version {}", file.format_version),
        });
    }
    if !super::SUPPORTED_BIT_WIDTHS.contains(&file.bit_width) {
        return Err(QnetError::Validation {
            path: "bit_width".into(),
            message: format!("unsupported bit-width {}", file.bit_width),
        });
    }
    let [c, h, w] = file.input_shape;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, rec)| rec.into_layer(i, file.bit_width))
        .collect::<Result<Vec<_>>>()?;
    QuantizedNetwork::new(file.name, FeatureShape::new(c, h, w), layers, file.seed)
}

pub fn save_network(net: &QuantizedNetwork, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_json(net) + "\n")?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<QuantizedNetwork> {
    network_from_json(&fs::read_to_string(path)?)
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = format!(
        "#format_version={FORMAT_VERSION};classes={};shape={}\n",
        data.class_count, data.shape
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((0..data.shape.len()).map(|i| format!("f{i}")));
    w.write_record(&header).expect("in-memory write");
    for s in &data.samples {
        let mut row = vec![s.label.to_string()];
        row.extend(s.features.iter().map(|f| f.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let (meta, body) = text
        .split_once('\n')
        .ok_or_else(|| QnetError::Parse("dataset file is empty".into()))?;
    let meta = meta
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| QnetError::Parse("missing '#format_version=...' line".into()))?;
    let (mut version, mut classes, mut shape) = (None, None, None);
    for kv in meta.split(';') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| QnetError::Parse(format!("bad metadata entry '{kv}'")))?;
        match k.trim() {
            "format_version" => version = v.trim().parse::<u32>().ok(),
            "classes" => classes = v.trim().parse::<usize>().ok(),
            "shape" => shape = Some(v.trim().parse::<FeatureShape>()?),
            other => return Err(QnetError::Parse(format!("unknown metadata key '{other}'"))),
        }
    }
    if version != Some(FORMAT_VERSION) {
        return Err(QnetError::Validation {
            path: "format_version".into(),
            message: format!("expected {FORMAT_VERSION}, got {version:?}"),
        });
    }
    let classes = classes.ok_or_else(|| QnetError::Parse("missing 'classes'".into()))?;
    let shape = shape.ok_or_else(|| QnetError::Parse("missing 'shape'".into()))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| QnetError::Parse(format!("row {i}: {e}")))?;
        let mut fields = record.iter();
        let label = fields
            .next()
            .and_then(|l| l.trim().parse::<usize>().ok())
            .ok_or_else(|| QnetError::Parse(format!("row {i}: bad label")))?;
        let features = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| QnetError::Parse(format!("row {i}: {e}")))?;
        samples.push(Sample { features, label });
    }
    Dataset::new(samples, classes, shape)
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dataset_to_csv(data))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnet::generate_synthetic_dataset;

    fn sample_net() -> QuantizedNetwork {
        let conv = ConvParams {
            in_channels: 1,
            kernels: 2,
            kernel_height: 3,
            kernel_width: 1,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        QuantizedNetwork::new(
            "io",
            FeatureShape::new(1, 4, 1),
            vec![
                (
                    LayerOp::Conv1d(conv),
                    WeightTensor {
                        shape: vec![2, 1, 3, 1],
                        codes: vec![1, -7, 0, 3, 2, 7],
                        scale: 0.125,
                        bit_width: 4,
                    },
                ),
                (
                    LayerOp::Linear {
                        in_features: 8,
                        out_features: 2,
                    },
                    WeightTensor {
                        shape: vec![2, 8],
                        codes: (0..16).map(|i| i % 15 - 7).collect(),
                        scale: 0.3,
                        bit_width: 4,
                    },
                ),
            ],
            Some(3),
        )
        .unwrap()
    }

    #[test]
    fn network_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = sample_net();
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
    }

    #[test]
    fn out_of_range_code_names_layer() {
        let text = network_to_json(&sample_net()).replacen(
            "\"codes\": [\n        1,",
            "\"codes\": [\n        9,",
            1,
        );
        let err = network_from_json(&text).unwrap_err().to_string();
        assert!(err.contains("layers[0].codes[0]"), "{err}");
    }

    #[test]
    fn missing_scale_is_a_parse_error() {
        let mut v: serde_json::Value =
            serde_json::from_str(&network_to_json(&sample_net())).unwrap();
        v["layers"][1].as_object_mut().unwrap().remove("scale");
        let err = network_from_json(&v.to_string()).unwrap_err();
        assert!(
            matches!(err, QnetError::Parse(ref m) if m.contains("scale")),
            "{err}"
        );
    }

    #[test]
    fn dataset_round_trips() {
        let ds = generate_synthetic_dataset(2, 12, 3, FeatureShape::new(1, 2, 2)).unwrap();
        let back = dataset_from_csv(&dataset_to_csv(&ds)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_label_out_of_range_is_rejected() {
        let text = "#format_version=1;classes=2;shape=2\nlabel,f0,f1\n2,0.5,0.5\n";
        assert!(matches!(
            dataset_from_csv(text),
            Err(QnetError::Validation { .. })
        ));
    }
}
