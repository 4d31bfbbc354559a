//! Samples device parameters for a large layer and reports their statistics.

use rram_dse::mapping::map_linear_sparse;
use rram_dse::xbar::{program, sample_devices, NoiseKeying, SampleContext, Stuck};
use rram_dse::{DeviceModel, WeightTensor};

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        s += v;
        s2 += v * v;
    }
    let m = s / n;
    (m, (s2 / n - m * m).sqrt())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (inp, out) = (256, 512);
    let codes = (0..inp * out).map(|i| (i % 15) as i32 - 7).collect();
    let w = WeightTensor {
        shape: vec![out, inp],
        codes,
        scale: 0.05,
        bit_width: 4,
    };
    let plan = map_linear_sparse(&w, 128)?;

    for model in [
        DeviceModel::default(),
        DeviceModel {
            p_stuck_on: 0.02,
            p_stuck_off: 0.02,
            n_states: Some(4),
            ..DeviceModel::default()
        },
    ] {
        let ctx = SampleContext {
            seed: 0,
            layer: 0,
            keying: NoiseKeying::Physical,
        };
        let mut tiles = sample_devices(&ctx, &plan, &model)?;
        program(&mut tiles, &plan, &w)?;
        let (on_m, on_s) = mean_std(tiles.iter().flat_map(|t| t.r_on.iter().copied()));
        let (off_m, off_s) = mean_std(tiles.iter().flat_map(|t| t.r_off.iter().copied()));
        let n: usize = tiles.iter().map(|t| t.g.len()).sum();
        let stuck = |k| {
            tiles
                .iter()
                .flat_map(|t| &t.stuck)
                .filter(|s| **s == k)
                .count()
        };
        println!("{model:?}");
        println!("  {n} devices in {} tiles", tiles.len());
        println!("  R_ON  {on_m:>9.1} +/- {on_s:.1}");
        println!("  R_OFF {off_m:>9.1} +/- {off_s:.1}");
        println!("  stuck on {} off {}", stuck(Stuck::On), stuck(Stuck::Off));
        assert!(tiles.iter().all(|t| t.check().is_ok()));
    }
    Ok(())
}
