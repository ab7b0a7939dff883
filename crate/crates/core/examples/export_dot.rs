//! Renders a random valid architecture as Graphviz DOT on stdout.
//!
//! ```bash
//! cargo run -p monas --example export_dot -- 42 | dot -Tsvg > arch.svg
//! ```

use monas::dot::to_dot;
use monas::{random_valid, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => 0,
    };
    let config = SearchSpaceConfig::with_default_ops(6, 4)?;
    print!("{}", to_dot(&random_valid(&config, seed)));
    Ok(())
}
