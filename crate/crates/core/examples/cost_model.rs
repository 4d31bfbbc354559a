//! Compares the three mapping schemes on one convolution and on the fixture.

use rram_dse::mapping::{
    dense_devices_closed_form, dense_steps_closed_form, derive_costs_cross_scheme, map_conv_dense,
    map_conv_routed, map_conv_staggered, sparse_devices_closed_form,
};
use rram_dse::qnet::Fixture;
use rram_dse::{ConvGeometry, Scheme, WeightTensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 4 kernels of 3x3 over an 8x8 single-channel input
    let g = ConvGeometry {
        kernels: 4,
        kernel_height: 3,
        kernel_width: 3,
        input_height: 8,
        input_width: 8,
        stride: 1,
        padding: 0,
        dilation: 1,
        channels: 1,
        one_d: false,
    };
    println!(
        "closed forms: sparse devices {}, dense devices {}, dense steps {}",
        sparse_devices_closed_form(&g),
        dense_devices_closed_form(&g),
        dense_steps_closed_form(&g)
    );

    let codes: Vec<i32> = (0..36)
        .map(|i| if i % 4 == 0 { 0 } else { (i % 7) - 3 })
        .collect();
    let w = WeightTensor {
        shape: vec![4, 1, 3, 3],
        codes,
        scale: 0.1,
        bit_width: 4,
    };
    for (name, plan) in [
        ("sparse_staggered", map_conv_staggered(&g, &w, 64)?),
        ("dense_routed", map_conv_routed(&g, &w, 64)?),
        ("dense_kernel", map_conv_dense(&g, &w, 64)?),
    ] {
        let c = rram_dse::mapping::cost(&plan);
        println!(
            "{name:>16}: RD {:>6} tiles {:>3} RWO {:>4}",
            c.rd, c.tiles, c.rwo
        );
    }

    let fx = Fixture::build(0)?;
    for t in [32, 64, 128] {
        let costs = derive_costs_cross_scheme(Scheme::DenseKernel, &fx.network, t);
        for s in Scheme::ALL {
            match costs.get(s) {
                Ok(n) => println!(
                    "fixture t={t:<3} {s:>16}: RD {:>6} tiles {:>3} RWO {:>4}",
                    n.total.rd, n.total.tiles, n.total.rwo
                ),
                Err(e) => println!("fixture t={t:<3} {s:>16}: {e}"),
            }
        }
    }
    Ok(())
}
