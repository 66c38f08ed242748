//! Regenerates `fixtures/oracles.json`: grid-plus-polish optima of the bench
//! functions at fixed resolutions.
//!
//! cargo run --release --example oracle_fixtures

use bayesopt::bench::grid_oracle_optimum;
use serde_json::json;

const ENTRIES: [(&str, usize); 3] = [("sinus-1d", 100_000), ("branin-2d", 1000), ("sphere-2", 200)];

fn main() -> bayesopt::Result<()> {
    let oracles = ENTRIES
        .iter()
        .map(|(name, res)| grid_oracle_optimum(name, *res))
        .collect::<bayesopt::Result<Vec<_>>>()?;
    for o in &oracles {
        println!("{:<10} res {:>6}  max {:.12} at {:?}", o.name, o.resolution, o.value, o.x);
    }
    let doc = json!({
        "generator": "cargo run --release --example oracle_fixtures",
        "method": "exhaustive grid with nodes lower + width * k / (resolution - 1), then projected gradient ascent (500 iterations, tol 1e-12) from the best node",
        "oracles": oracles,
    });
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/oracles.json");
    std::fs::write(path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    println!("wrote {path}");
    Ok(())
}
