//! CSV and SVG report emission.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-for-bit.

use std::io::Write;
use std::path::Path;

use super::{CliError, Result};
use crate::dse::{ConfigResult, ContourGrid, DesignPoint};
use crate::mapping::{NetworkCost, Scheme};
use crate::qnet::QuantizedNetwork;

pub const RESULT_COLUMNS: [&str; 17] = [
    "index",
    "network",
    "scheme",
    "io_bits",
    "tile_size",
    "v_max",
    "stuck_rate",
    "n_states",
    "std_multiplier",
    "batch_size",
    "tsa",
    "rd",
    "rwo",
    "tiles",
    "raw_score",
    "normalized_score",
    "seed",
];

fn opt_label(v: Option<u32>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |n| n.to_string())
}

fn result_row(r: &ConfigResult) -> Vec<String> {
    let p = &r.point;
    vec![
        r.index.to_string(),
        p.network.clone(),
        p.scheme.name().to_string(),
        opt_label(p.io_bits, "ideal"),
        p.tile_size.to_string(),
        p.v_max.to_string(),
        p.stuck_rate.to_string(),
        opt_label(p.n_states, "continuous"),
        p.std_multiplier.to_string(),
        p.batch_size.to_string(),
        r.tsa.to_string(),
        r.rd.to_string(),
        r.rwo.to_string(),
        r.tiles.to_string(),
        r.raw_score.to_string(),
        r.normalized_score.to_string(),
        r.seed.to_string(),
    ]
}

pub fn results_to_csv(results: &[ConfigResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.write_record(result_row(r))?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Report(e.to_string()))?,
    )
    .expect("utf-8"))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        CliError::Report(format!(
            "row {line}: cannot parse {} = '{raw}'",
            RESULT_COLUMNS[i]
        ))
    })
}

fn parse_opt(rec: &csv::StringRecord, i: usize, none: &str, line: usize) -> Result<Option<u32>> {
    if rec.get(i) == Some(none) {
        Ok(None)
    } else {
        parse_field(rec, i, line).map(Some)
    }
}

pub fn results_from_csv(text: &str) -> Result<Vec<ConfigResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(CliError::Report(format!(
            "unexpected results header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let scheme: Scheme = rec
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e| CliError::Report(format!("row {line}: {e}")))?;
        out.push(ConfigResult {
            index: parse_field(&rec, 0, line)?,
            point: DesignPoint {
                network: rec.get(1).unwrap_or("").to_string(),
                scheme,
                io_bits: parse_opt(&rec, 3, "ideal", line)?,
                tile_size: parse_field(&rec, 4, line)?,
                v_max: parse_field(&rec, 5, line)?,
                stuck_rate: parse_field(&rec, 6, line)?,
                n_states: parse_opt(&rec, 7, "continuous", line)?,
                std_multiplier: parse_field(&rec, 8, line)?,
                batch_size: parse_field(&rec, 9, line)?,
            },
            tsa: parse_field(&rec, 10, line)?,
            rd: parse_field(&rec, 11, line)?,
            rwo: parse_field(&rec, 12, line)?,
            tiles: parse_field(&rec, 13, line)?,
            raw_score: parse_field(&rec, 14, line)?,
            normalized_score: parse_field(&rec, 15, line)?,
            seed: parse_field(&rec, 16, line)?,
        });
    }
    Ok(out)
}

/// Ranking table: results.csv columns preceded by the rank.
pub fn ranking_to_csv(ranked: &[ConfigResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rank"];
    header.extend(RESULT_COLUMNS);
    w.write_record(&header)?;
    for (i, r) in ranked.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(result_row(r));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Report(e.to_string()))?,
    )
    .expect("utf-8"))
}

/// Header cell of a contour CSV: metric, axes and seed.
pub fn contour_corner(g: &ContourGrid, seed: u64) -> String {
    format!("{} [x={} y={} seed={seed}]", g.metric, g.x_dim, g.y_dim)
}

/// One row per x value, one column per y value; missing cells are `NA`.
pub fn contour_to_csv(g: &ContourGrid, seed: u64) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![contour_corner(g, seed)];
    header.extend(g.y_labels.iter().cloned());
    w.write_record(&header)?;
    for (x, row) in g.x_labels.iter().zip(&g.cells) {
        let mut rec = vec![x.clone()];
        rec.extend(
            row.iter()
                .map(|c| c.map_or_else(|| "NA".to_string(), |v| v.to_string())),
        );
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Report(e.to_string()))?,
    )
    .expect("utf-8"))
}

/// Reads a contour CSV back as `(corner, y labels, rows of (x label, cells))`.
pub type ContourTable = (String, Vec<String>, Vec<(String, Vec<Option<f64>>)>);

pub fn contour_from_csv(text: &str) -> Result<ContourTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let corner = headers.get(0).unwrap_or("").to_string();
    let ys: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let cells = rec
            .iter()
            .skip(1)
            .map(|c| {
                if c == "NA" {
                    Ok(None)
                } else {
                    c.parse().map(Some)
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Report(format!("contour cell: {e}")))?;
        rows.push((rec.get(0).unwrap_or("").to_string(), cells));
    }
    Ok((corner, ys, rows))
}

/// Per-layer and total cost table of one network under one scheme.
pub fn cost_to_csv(
    net: &QuantizedNetwork,
    scheme: Scheme,
    tile_size: usize,
    cost: &NetworkCost,
    seed: u64,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "layer",
        "kind",
        "scheme",
        "tile_size",
        "rd",
        "tiles",
        "rwo",
        "programming_writes",
        "closed_sparse_devices",
        "closed_dense_devices",
        "closed_dense_steps",
        "remainder_flag",
        "seed",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    let rows = cost
        .layers
        .iter()
        .enumerate()
        .map(|(i, c)| (i.to_string(), net.layers[i].spec.op.kind_name(), c));
    for (layer, kind, c) in rows.chain(std::iter::once(("total".to_string(), "", &cost.total))) {
        w.write_record([
            layer,
            kind.to_string(),
            scheme.name().to_string(),
            tile_size.to_string(),
            c.rd.to_string(),
            c.tiles.to_string(),
            c.rwo.to_string(),
            c.programming_writes.to_string(),
            opt(c.eq_devices_sparse.map(|v| v.to_string())),
            opt(c.eq_devices_dense.map(|v| v.to_string())),
            opt(c.eq_steps_dense.map(|v| v.to_string())),
            c.remainder_flag.to_string(),
            seed.to_string(),
        ])?;
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Report(e.to_string()))?,
    )
    .expect("utf-8"))
}

fn heat_colour(t: f64) -> String {
    // dark blue -> teal -> yellow
    let stops = [
        (0.0, (40, 30, 110)),
        (0.5, (40, 150, 140)),
        (1.0, (250, 230, 60)),
    ];
    let t = t.clamp(0.0, 1.0);
    let (lo, hi) = if t <= 0.5 {
        (stops[0], stops[1])
    } else {
        (stops[1], stops[2])
    };
    let f = (t - lo.0) / (hi.0 - lo.0);
    let mix = |a: i32, b: i32| (a as f64 + f * (b - a) as f64).round() as i32;
    format!(
        "rgb({},{},{})",
        mix(lo.1 .0, hi.1 .0),
        mix(lo.1 .1, hi.1 .1),
        mix(lo.1 .2, hi.1 .2)
    )
}

/// A labelled heatmap of a contour grid; missing cells are hatched grey.
pub fn contour_to_svg(g: &ContourGrid, title: &str) -> String {
    let (cw, ch, left, top) = (90.0, 36.0, 110.0, 60.0);
    let width = left + cw * g.y_labels.len() as f64 + 20.0;
    let height = top + ch * g.x_labels.len() as f64 + 50.0;
    let vals: Vec<f64> = g.cells.iter().flatten().flatten().copied().collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"10\" y=\"20\" font-size=\"14\">{}</text>\n",
        xml_escape(title)
    ));
    s.push_str(&format!(
        "<text x=\"{left}\" y=\"45\">{} \u{2192}</text>\n",
        g.y_dim
    ));
    s.push_str(&format!(
        "<text x=\"10\" y=\"45\">{} \u{2193}</text>\n",
        g.x_dim
    ));
    for (j, y) in g.y_labels.iter().enumerate() {
        let x = left + cw * j as f64 + cw / 2.0;
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            top - 4.0,
            xml_escape(y)
        ));
    }
    for (i, (xl, row)) in g.x_labels.iter().zip(&g.cells).enumerate() {
        let y = top + ch * i as f64;
        s.push_str(&format!(
            "<text x=\"10\" y=\"{}\">{}</text>\n",
            y + ch / 2.0 + 4.0,
            xml_escape(xl)
        ));
        for (j, cell) in row.iter().enumerate() {
            let x = left + cw * j as f64;
            let (fill, label) = match cell {
                Some(v) => {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
                    (heat_colour(t), format!("{v:.4}"))
                }
                None => ("rgb(200,200,200)".to_string(), "NA".to_string()),
            };
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cw}\" height=\"{ch}\" fill=\"{fill}\" stroke=\"white\"/>\n"
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"black\">{label}</text>\n",
                x + cw / 2.0,
                y + ch / 2.0 + 4.0
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
