//! Edge counts and exact sizes of a few grids, plus an exhaustive count of
//! valid architectures where that is cheap.

use monas::{enumerate_valid, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (layers, scales) in [(2, 1), (3, 2), (4, 2), (6, 3), (10, 4), (14, 4)] {
        let c = SearchSpaceConfig::with_default_ops(layers, scales)?;
        let size = c.space_size_unconstrained();
        print!(
            "L={layers:<2} D={scales}  edges={:<4} |space|={}^{} = {size}",
            c.edge_count(),
            c.states_per_edge(),
            c.edge_count()
        );
        if let Ok(valid) = enumerate_valid(&c, 100_000) {
            print!("  valid={}", valid.count());
        }
        println!();
    }
    Ok(())
}
