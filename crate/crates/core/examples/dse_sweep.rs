//! Grid search over tile size, stuck rate and batch size for the fixture,
//! then ranking and a contour grid.

use std::collections::BTreeMap;

use rram_dse::dse::{contour_grid, grid_search, rank, Dim, GridOptions, Metric};
use rram_dse::qnet::Fixture;
use rram_dse::{Scheme, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Fixture::build(0)?;
    let networks = BTreeMap::from([("fixture".to_string(), fx.network)]);
    let space = SearchSpace {
        schemes: Scheme::ALL.to_vec(),
        tile_sizes: vec![32, 64, 128],
        stuck_rates: vec![0.0, 0.01, 0.05],
        batch_sizes: vec![16, 64],
        ..SearchSpace::single("fixture", Scheme::SparseStaggered, 64, 64)
    };
    println!("{} design points", space.cardinality());

    let results = grid_search(&space, &networks, &fx.test, &GridOptions::default())?;
    println!("top five:");
    for r in rank(&results).iter().take(5) {
        println!(
            "  {:.3}  tsa {:.4} rd {:>6} rwo {:>4}  {}",
            r.normalized_score, r.tsa, r.rd, r.rwo, r.point
        );
    }

    let dense: Vec<_> = results
        .iter()
        .filter(|r| r.point.scheme == Scheme::DenseRouted)
        .cloned()
        .collect();
    let grid = contour_grid(&dense, Dim::TileSize, Dim::StuckRate, Metric::Tsa)?;
    println!("dense_routed tsa, best over batch size:");
    println!("{:>8} {}", "t", grid.y_labels.join("  "));
    for (x, row) in grid.x_labels.iter().zip(&grid.cells) {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map_or("  NA ".into(), |v| format!("{v:.3}")))
            .collect();
        println!("{x:>8} {}", cells.join("  "));
    }
    Ok(())
}
