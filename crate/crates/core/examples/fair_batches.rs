//! Draws fair batches and prints how often every edge of each connection
//! layer was used.

use monas::sampler::count_edges;
use monas::{assert_fair, sample_batch, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SearchSpaceConfig::with_default_ops(5, 4)?;
    let batch = sample_batch(&config, 8, 2024)?;

    for (i, child) in batch.children.iter().enumerate() {
        println!(
            "child {i}: {} edges, {} active nodes",
            child.present_count(),
            child.validate().active_node_count
        );
    }

    for lc in count_edges(&config, &batch.children) {
        let label = if lc.layer == config.num_layers() {
            "gather ".to_owned()
        } else {
            format!("layer {}", lc.layer)
        };
        println!("{label}: {:?}", lc.counts);
    }

    let report = assert_fair(&batch);
    println!("fair: {}", report.is_fair());
    Ok(())
}
