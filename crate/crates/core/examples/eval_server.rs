//! A monas-eval/1 server over stdin/stdout backed by the planted evaluator.
//!
//! Point a search at it:
//!
//! ```bash
//! cargo build -p monas --example eval_server
//! monas search --layers 5 --scales 3 \
//!     --evaluator "exec:target/debug/examples/eval_server 5 3 99"
//! ```
//!
//! Arguments: layers, scales and hidden seed (defaults 5, 3, 0).

use std::io;

use monas::eval::protocol::serve;
use monas::eval::PlantedEvaluator;
use monas::SearchSpaceConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse())
        .collect::<Result<_, _>>()?;
    let get = |i: usize, default: u64| args.get(i).copied().unwrap_or(default);
    let config = SearchSpaceConfig::with_default_ops(get(0, 5) as usize, get(1, 3) as usize)?;
    let mut planted = PlantedEvaluator::new(&config, get(2, 0));
    serve(io::stdin().lock(), io::stdout().lock(), &mut planted)?;
    Ok(())
}
