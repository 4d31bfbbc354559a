use std::collections::BTreeMap;
use std::sync::OnceLock;

use rram_dse::dse::{grid_search, GridOptions, NetworkSet};
use rram_dse::qnet::{generate_synthetic_dataset, train_fixture, Fixture, TrainOptions};
use rram_dse::xbar::{evaluate_accuracy, NoiseKeying};
use rram_dse::{DeviceModel, FeatureShape, IoConfig, LayerOp, Scheme, SearchSpace, SimConfig};

fn fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| Fixture::build(0).unwrap())
}

fn networks() -> NetworkSet {
    BTreeMap::from([("fx".to_string(), fixture().network.clone())])
}

fn space() -> SearchSpace {
    SearchSpace {
        schemes: Scheme::ALL.to_vec(),
        tile_sizes: vec![32, 64],
        stuck_rates: vec![0.0, 0.02],
        ..SearchSpace::single("fx", Scheme::SparseStaggered, 64, 64)
    }
}

#[test]
fn grid_results_do_not_depend_on_worker_count() {
    let fx = fixture();
    let run = |jobs| {
        grid_search(
            &space(),
            &networks(),
            &fx.test,
            &GridOptions {
                jobs,
                ..GridOptions::default()
            },
        )
        .unwrap()
    };
    let one = run(1);
    assert_eq!(one.len(), 12);
    assert_eq!(one, run(3));
    assert_eq!(one, run(0));
}

#[test]
fn seed_changes_draws_but_not_costs() {
    let fx = fixture();
    let run = |seed| {
        grid_search(
            &space(),
            &networks(),
            &fx.test,
            &GridOptions {
                seed,
                ..GridOptions::default()
            },
        )
        .unwrap()
    };
    let (a, b) = (run(0), run(1));
    assert!(a
        .iter()
        .zip(&b)
        .all(|(x, y)| (x.rd, x.rwo, x.tiles) == (y.rd, y.rwo, y.tiles)));
    assert!(a.iter().zip(&b).any(|(x, y)| x.tsa != y.tsa));
}

fn logical_config(t: usize) -> SimConfig {
    let device = DeviceModel {
        r_off_std: 0.0,
        p_stuck_on: 0.0,
        p_stuck_off: 0.0,
        n_states: Some(8),
        ..DeviceModel::default()
    };
    SimConfig {
        tile_size: t,
        io: IoConfig::default(),
        device,
        keying: NoiseKeying::Logical,
    }
}

#[test]
fn logical_keying_matches_schemes_sharing_a_weight_matrix() {
    let fx = fixture();
    for seed in 0..3 {
        let cfg = logical_config(64);
        let kernel =
            evaluate_accuracy(&fx.network, Scheme::DenseKernel, &cfg, &fx.test, seed).unwrap();
        let routed =
            evaluate_accuracy(&fx.network, Scheme::DenseRouted, &cfg, &fx.test, seed).unwrap();
        assert_eq!(kernel, routed, "seed {seed}");
    }
}

#[test]
fn logical_keying_matches_sparse_and_routed_on_linear_layers() {
    let shape = FeatureShape::new(1, 1, 24);
    let data = generate_synthetic_dataset(5, 400, 3, shape).unwrap();
    let arch = [
        LayerOp::Linear {
            in_features: 24,
            out_features: 12,
        },
        LayerOp::Linear {
            in_features: 12,
            out_features: 3,
        },
    ];
    let net = train_fixture(5, &arch, &data, &TrainOptions::default()).unwrap();
    for seed in 0..3 {
        let cfg = logical_config(16);
        let sparse = evaluate_accuracy(&net, Scheme::SparseStaggered, &cfg, &data, seed).unwrap();
        let routed = evaluate_accuracy(&net, Scheme::DenseRouted, &cfg, &data, seed).unwrap();
        assert_eq!(sparse, routed, "seed {seed}");
    }
}

#[test]
fn physical_keying_keeps_every_scheme_above_chance() {
    let fx = fixture();
    let cfg = SimConfig {
        keying: NoiseKeying::Physical,
        ..logical_config(64)
    };
    let tsa: Vec<f64> = Scheme::ALL
        .iter()
        .map(|&s| evaluate_accuracy(&fx.network, s, &cfg, &fx.test, 0).unwrap())
        .collect();
    assert!(tsa.iter().all(|&a| a > 0.5), "{tsa:?}");
}
