//! Command implementations behind the `rram-dse` binary.
//!
//! Every command writes human-oriented text to a caller-supplied sink and its
//! machine-readable artifacts to files. [`CliError::exit_code`] maps failures
//! to `1` (runtime) or `2` (usage or configuration).

mod config;
pub mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dse::{
    contour_grid, grid_search, rank, weighted_score_with, Dim, DseError, Metric, NetworkSet,
    SearchSpace,
};
use crate::mapping::{derive_costs_cross_scheme, network_cost, plan_network, MappingError, Scheme};
use crate::qnet::{self, Fixture, QnetError, QuantizedNetwork};
use crate::xbar::{evaluate_accuracy, XbarError};

pub use config::{RunConfig, CONFIG_FORMAT_VERSION, DEFAULT_MAX_POINTS};

/// Ideal accuracy the fixture network must reach.
pub const FIXTURE_ACCURACY_GATE: f64 = 0.90;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Qnet(#[from] QnetError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Xbar(#[from] XbarError),
    #[error(transparent)]
    Dse(#[from] DseError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn say(log: &mut dyn Write, line: impl AsRef<str>) {
    // stdout is best-effort; artifacts are the contract
    let _ = writeln!(log, "{}", line.as_ref());
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "output directory does not exist: {}",
            dir.display()
        )))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| {
            p.chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("__")
}

fn load_networks(cfg: &RunConfig) -> Result<NetworkSet> {
    let mut set = BTreeMap::new();
    for id in &cfg.space.networks {
        set.insert(id.clone(), qnet::load_network(&cfg.networks[id])?);
    }
    Ok(set)
}

/// Files written by [`cmd_fixture`].
#[derive(Clone, Debug)]
pub struct FixtureFiles {
    pub network: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub dse_config: PathBuf,
    pub simulate_config: PathBuf,
    pub ideal_accuracy: f64,
}

/// Trains the fixture network and writes it with its datasets and two
/// ready-to-run configs into an existing directory.
pub fn cmd_fixture(seed: u64, out: &Path, log: &mut dyn Write) -> Result<FixtureFiles> {
    require_dir(out)?;
    let fx = Fixture::build(seed)?;
    let files = FixtureFiles {
        network: out.join("network.json"),
        train: out.join("train.csv"),
        test: out.join("test.csv"),
        dse_config: out.join("dse.json"),
        simulate_config: out.join("simulate.json"),
        ideal_accuracy: fx.ideal_accuracy,
    };
    qnet::save_network(&fx.network, &files.network)?;
    qnet::save_dataset(&fx.train, &files.train)?;
    qnet::save_dataset(&fx.test, &files.test)?;

    let networks = BTreeMap::from([("fixture".to_string(), PathBuf::from("network.json"))]);
    let mut dse = RunConfig::new(
        networks.clone(),
        "test.csv".into(),
        SearchSpace {
            networks: vec!["fixture".into()],
            schemes: vec![Scheme::SparseStaggered, Scheme::DenseKernel],
            tile_sizes: vec![32, 64, 128],
            batch_sizes: vec![16, 256],
            ..SearchSpace::default()
        },
    );
    dse.seed = seed;
    dse.out = Some("dse_out".into());
    report::write_file(&files.dse_config, &dse.to_json())?;
    let mut sim = RunConfig::new(
        networks,
        "test.csv".into(),
        SearchSpace::single("fixture", Scheme::SparseStaggered, 64, 64),
    );
    sim.seed = seed;
    report::write_file(&files.simulate_config, &sim.to_json())?;

    let (zeros, frac) = qnet::sparsity(&fx.network);
    say(
        log,
        format!(
            "fixture seed {seed}: {} weights, {zeros} zero ({:.1}%)",
            fx.network.weight_count(),
            100.0 * frac
        ),
    );
    let verdict = if fx.ideal_accuracy >= FIXTURE_ACCURACY_GATE {
        "pass"
    } else {
        "FAIL"
    };
    say(
        log,
        format!(
            "ideal accuracy {:.2}% on {} held-out samples (gate {:.0}%: {verdict})",
            100.0 * fx.ideal_accuracy,
            fx.test.len(),
            100.0 * FIXTURE_ACCURACY_GATE
        ),
    );
    for p in [
        &files.network,
        &files.train,
        &files.test,
        &files.dse_config,
        &files.simulate_config,
    ] {
        say(log, format!("wrote {}", p.display()));
    }
    Ok(files)
}

/// What [`cmd_cost`] tabulates.
#[derive(Clone, Debug, Default)]
pub struct CostRequest {
    /// A single network file, instead of the networks of `config`.
    pub network: Option<PathBuf>,
    pub config: Option<RunConfig>,
    /// One scheme name; all three when absent.
    pub scheme: Option<String>,
    pub tile_size: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

/// Per-layer and total RD, tiles and RWO with the closed-form columns.
/// Returns the CSV files written.
pub fn cmd_cost(req: &CostRequest, log: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let schemes: Vec<Scheme> = match &req.scheme {
        Some(s) => vec![s
            .parse()
            .map_err(|e: MappingError| CliError::Usage(e.to_string()))?],
        None => match &req.config {
            Some(c) => c.space.schemes.clone(),
            None => Scheme::ALL.to_vec(),
        },
    };
    let mut jobs: Vec<(String, QuantizedNetwork, Vec<usize>)> = Vec::new();
    if let Some(path) = &req.network {
        let net = qnet::load_network(path)?;
        jobs.push((net.name.clone(), net, vec![req.tile_size.unwrap_or(64)]));
    } else if let Some(cfg) = &req.config {
        let tiles = req
            .tile_size
            .map_or_else(|| cfg.space.tile_sizes.clone(), |t| vec![t]);
        for (id, net) in load_networks(cfg)? {
            jobs.push((id, net, tiles.clone()));
        }
    } else {
        return Err(CliError::Usage(
            "cost needs --network <file> or --config <file>".into(),
        ));
    }
    if let Some(out) = &req.out {
        require_dir(out)?;
    }
    let single = jobs.len() == 1 && schemes.len() == 1 && jobs[0].2.len() == 1;
    let mut written = Vec::new();
    for (id, net, tiles) in &jobs {
        for &t in tiles {
            for &scheme in &schemes {
                let plans = match plan_network(net, scheme, t) {
                    Ok(p) => p,
                    Err(e) if !single => {
                        say(log, format!("{id} {scheme} t={t}: not mappable ({e})"));
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let cost = network_cost(&plans);
                say(log, format!("{id} {scheme} t={t}"));
                say(
                    log,
                    format!(
                        "  {:<6} {:<7} {:>10} {:>7} {:>8} {:>12} {:>10} {:>10} {:>6}",
                        "layer",
                        "kind",
                        "RD",
                        "tiles",
                        "RWO",
                        "sparse_cf",
                        "dense_cf",
                        "steps_cf",
                        "rem"
                    ),
                );
                for (i, c) in cost.layers.iter().enumerate() {
                    let show = |v: Option<String>| v.unwrap_or_else(|| "-".into());
                    say(
                        log,
                        format!(
                            "  {:<6} {:<7} {:>10} {:>7} {:>8} {:>12} {:>10} {:>10} {:>6}",
                            i,
                            net.layers[i].spec.op.kind_name(),
                            c.rd,
                            c.tiles,
                            c.rwo,
                            show(c.eq_devices_sparse.map(|v| v.to_string())),
                            show(c.eq_devices_dense.map(|v| v.to_string())),
                            show(c.eq_steps_dense.map(|v| v.to_string())),
                            c.remainder_flag
                        ),
                    );
                }
                say(
                    log,
                    format!(
                        "  {:<6} {:<7} {:>10} {:>7} {:>8}",
                        "total", "", cost.total.rd, cost.total.tiles, cost.total.rwo
                    ),
                );
                if let Some(out) = &req.out {
                    let path = out.join(format!(
                        "{}.csv",
                        file_stem(&["cost", id, scheme.name(), &format!("t{t}")])
                    ));
                    report::write_file(
                        &path,
                        &report::cost_to_csv(net, scheme, t, &cost, req.seed)?,
                    )?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

/// Outcome of a single-configuration simulation, as written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub config_fingerprint: String,
    pub point: crate::dse::DesignPoint,
    pub tsa: f64,
    pub ideal_tsa: f64,
    pub rd: u64,
    pub rwo: u64,
    pub tiles: u64,
    pub raw_score: f64,
}

fn single_point(cfg: &RunConfig) -> Result<crate::dse::DesignPoint> {
    let multi: Vec<String> = cfg
        .space
        .dimension_sizes()
        .iter()
        .filter(|(_, n)| *n != 1)
        .map(|(name, n)| format!("space.{name}: simulate needs exactly one value, got {n}"))
        .collect();
    if !multi.is_empty() {
        return Err(CliError::Config(multi));
    }
    Ok(cfg.space.points().remove(0))
}

/// Simulates the single configuration described by `cfg` and writes
/// `simulation.json` into `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> Result<SimulationReport> {
    let mut problems = cfg.problems();
    if let Err(CliError::Config(p)) = single_point(cfg) {
        problems.extend(p.into_iter().filter(|m| !m.ends_with("got 0")));
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    require_dir(out)?;
    let point = single_point(cfg)?;
    let net = qnet::load_network(&cfg.networks[&point.network])?;
    let data = qnet::load_dataset(&cfg.dataset)?;
    let sim = point.sim_config(&cfg.device, cfg.keying);
    let tsa = evaluate_accuracy(&net, point.scheme, &sim, &data, cfg.seed)?;
    let ideal_tsa = qnet::accuracy(
        &qnet::ideal_forward(&net, &data.features())?,
        &data.labels(),
    );
    let costs = derive_costs_cross_scheme(point.scheme, &net, point.tile_size)
        .get(point.scheme)
        .clone()?;
    let raw_score = weighted_score_with(tsa, costs.total.rd, costs.total.rwo, cfg.score)?;
    let rep = SimulationReport {
        seed: cfg.seed,
        config_fingerprint: cfg.fingerprint(),
        point,
        tsa,
        ideal_tsa,
        rd: costs.total.rd,
        rwo: costs.total.rwo,
        tiles: costs.total.tiles,
        raw_score,
    };
    let path = out.join("simulation.json");
    report::write_file(&path, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    say(log, format!("{}", rep.point));
    say(
        log,
        format!("TSA {:.4} (ideal {:.4})", rep.tsa, rep.ideal_tsa),
    );
    say(
        log,
        format!(
            "RD {}  RWO {}  tiles {}  score {:e}",
            rep.rd, rep.rwo, rep.tiles, rep.raw_score
        ),
    );
    say(log, format!("wrote {}", path.display()));
    Ok(rep)
}

/// Contour axes used for every per-network, per-scheme slice.
pub const CONTOUR_AXES: (Dim, Dim) = (Dim::TileSize, Dim::BatchSize);
/// Metrics emitted as contour tables.
pub const CONTOUR_METRICS: [Metric; 2] = [Metric::Tsa, Metric::NormalizedScore];

/// Writes ranking, contour tables and optional heatmaps for `results`.
pub fn write_reports(
    results: &[crate::dse::ConfigResult],
    out: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let ranked = rank(results);
    let path = out.join("ranking.csv");
    report::write_file(&path, &report::ranking_to_csv(&ranked)?)?;
    written.push(path);
    let contours = out.join("contours");
    create_dir(&contours)?;
    let seed = results.first().map_or(0, |r| r.seed);
    let mut slices: Vec<(String, Scheme)> = Vec::new();
    for r in results {
        let key = (r.point.network.clone(), r.point.scheme);
        if !slices.contains(&key) {
            slices.push(key);
        }
    }
    for (network, scheme) in slices {
        let subset: Vec<_> = results
            .iter()
            .filter(|r| r.point.network == network && r.point.scheme == scheme)
            .cloned()
            .collect();
        for metric in CONTOUR_METRICS {
            let g = contour_grid(&subset, CONTOUR_AXES.0, CONTOUR_AXES.1, metric)?;
            let stem = file_stem(&[&network, scheme.name(), metric.name()]);
            let path = contours.join(format!("{stem}.csv"));
            report::write_file(&path, &report::contour_to_csv(&g, seed)?)?;
            written.push(path);
            if svg {
                let path = contours.join(format!("{stem}.svg"));
                report::write_file(
                    &path,
                    &report::contour_to_svg(&g, &format!("{network} / {scheme} / {metric}")),
                )?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Runs the grid of `cfg` and writes `results.csv`, `ranking.csv`, contour
/// tables and the resolved config into `out`.
pub fn cmd_dse(
    cfg: &RunConfig,
    out: &Path,
    log: &mut dyn Write,
) -> Result<Vec<crate::dse::ConfigResult>> {
    cfg.validate()?;
    let n = cfg.space.cardinality();
    if n > cfg.max_points {
        return Err(CliError::Config(vec![format!(
            "grid has {n} points, over the budget of {} (raise max_points to at least {n})",
            cfg.max_points
        )]));
    }
    create_dir(out)?;
    let networks = load_networks(cfg)?;
    let data = qnet::load_dataset(&cfg.dataset)?;
    say(
        log,
        format!(
            "evaluating {n} configurations (seed {}, fingerprint {})",
            cfg.seed,
            cfg.fingerprint()
        ),
    );
    let results = grid_search(&cfg.space, &networks, &data, &cfg.grid_options())?;
    let path = out.join("results.csv");
    report::write_file(&path, &report::results_to_csv(&results)?)?;
    let resolved = out.join("config.json");
    report::write_file(&resolved, &cfg.to_json())?;
    let mut written = vec![path, resolved];
    written.extend(write_reports(&results, out, cfg.svg)?);
    print_top(&results, log);
    for p in &written {
        say(log, format!("wrote {}", p.display()));
    }
    Ok(results)
}

fn print_top(results: &[crate::dse::ConfigResult], log: &mut dyn Write) {
    say(
        log,
        format!(
            "{:>4} {:>10} {:>8} {:>10} {:>8}  configuration",
            "rank", "score", "TSA", "RD", "RWO"
        ),
    );
    for (i, r) in rank(results).iter().take(5).enumerate() {
        say(
            log,
            format!(
                "{:>4} {:>10.4} {:>8.4} {:>10} {:>8}  {}",
                i + 1,
                r.normalized_score,
                r.tsa,
                r.rd,
                r.rwo,
                r.point
            ),
        );
    }
}

/// Regenerates ranking and contour outputs from an existing `results.csv`.
pub fn cmd_report(
    results_csv: &Path,
    out: &Path,
    svg: bool,
    log: &mut dyn Write,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(results_csv).map_err(|e| CliError::io(results_csv, e))?;
    let results = report::results_from_csv(&text)?;
    if results.is_empty() {
        return Err(CliError::Report(format!(
            "{} has no rows",
            results_csv.display()
        )));
    }
    create_dir(out)?;
    let written = write_reports(&results, out, svg)?;
    print_top(&results, log);
    for p in &written {
        say(log, format!("wrote {}", p.display()));
    }
    Ok(written)
}
