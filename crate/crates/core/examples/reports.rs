//! Writes the fixture files and a full DSE report tree through the same
//! entry points the `rram-dse` binary uses.
//!
//! ```bash
//! cargo run --release --example reports -- /tmp/dse
//! ```

use std::path::PathBuf;

use rram_dse::cli::{cmd_dse, cmd_fixture, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "dse-report".into()),
    );
    std::fs::create_dir_all(&out)?;
    let mut log = std::io::stdout();

    let files = cmd_fixture(0, &out, &mut log)?;
    let cfg = RunConfig::load(&files.dse_config)?;
    println!("config fingerprint {}", cfg.fingerprint());
    let results = cmd_dse(&cfg, cfg.out.as_deref().unwrap_or(&out), &mut log)?;
    println!("{} results", results.len());
    Ok(())
}
