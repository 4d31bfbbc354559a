//! Runs the fixture through simulated crossbars under a few device and
//! converter settings.

use rram_dse::qnet::Fixture;
use rram_dse::xbar::{evaluate_accuracy, NoiseKeying};
use rram_dse::{DeviceModel, IoConfig, Scheme, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Fixture::build(0)?;
    println!("ideal accuracy {:.4}", fx.ideal_accuracy);

    let settings = [
        ("noiseless", SimConfig::noiseless(64, 64)),
        ("default", SimConfig::default()),
        (
            "4-bit io",
            SimConfig {
                io: IoConfig {
                    io_bits: Some(4),
                    ..IoConfig::default()
                },
                ..SimConfig::default()
            },
        ),
        (
            "10% stuck",
            SimConfig {
                device: DeviceModel {
                    p_stuck_on: 0.1,
                    p_stuck_off: 0.1,
                    ..DeviceModel::default()
                },
                ..SimConfig::default()
            },
        ),
        (
            "binary cells",
            SimConfig {
                device: DeviceModel {
                    n_states: Some(2),
                    ..DeviceModel::default()
                },
                ..SimConfig::default()
            },
        ),
    ];
    for (name, cfg) in &settings {
        print!("{name:>13}:");
        for scheme in Scheme::ALL {
            let tsa = evaluate_accuracy(&fx.network, scheme, cfg, &fx.test, 0)?;
            print!("  {scheme} {tsa:.4}");
        }
        println!();
    }

    // logical keying draws noise per weight, so dense schemes sharing a
    // kernel matrix see identical devices
    let cfg = SimConfig {
        keying: NoiseKeying::Logical,
        ..SimConfig::default()
    };
    for scheme in [Scheme::DenseKernel, Scheme::DenseRouted] {
        println!(
            "logical keying {scheme}: {:.4}",
            evaluate_accuracy(&fx.network, scheme, &cfg, &fx.test, 0)?
        );
    }
    Ok(())
}
