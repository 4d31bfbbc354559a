//! Trains the small quantized fixture network and saves it with its data.
//!
//! ```bash
//! cargo run --release --example train_fixture -- /tmp/fixture
//! ```

use std::path::PathBuf;

use rram_dse::qnet::{save_dataset, save_network, sparsity, Fixture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixture".into()));
    std::fs::create_dir_all(&out)?;

    let fx = Fixture::build(0)?;
    let (zeros, frac) = sparsity(&fx.network);
    println!("layers:");
    for (i, layer) in fx.network.layers.iter().enumerate() {
        println!(
            "  {i}: {} weights {:?} scale {:.4}",
            layer.spec.op.kind_name(),
            layer.weights.shape,
            layer.weights.scale
        );
    }
    println!("zero codes: {zeros} ({:.1}%)", 100.0 * frac);
    println!("ideal test accuracy: {:.4}", fx.ideal_accuracy);

    save_network(&fx.network, out.join("network.json"))?;
    save_dataset(&fx.train, out.join("train.csv"))?;
    save_dataset(&fx.test, out.join("test.csv"))?;
    println!("wrote {}", out.display());
    Ok(())
}
