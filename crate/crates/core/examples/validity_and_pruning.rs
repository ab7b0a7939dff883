//! Builds an architecture edge by edge, inspects its validity report, and
//! prunes it down to the edges that matter.

use std::sync::Arc;

use monas::{encode, ChildArchitecture, EdgeSlot, EdgeState, SearchSpaceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = Arc::new(SearchSpaceConfig::with_default_ops(4, 2)?);
    let mut arch = ChildArchitecture::empty(config.clone());
    let hpm = config.op_index("HPM").unwrap();
    let id = config.op_index("identity").unwrap();

    let slot = |layer, from_scale, to_scale| EdgeSlot {
        layer,
        from_scale,
        to_scale,
    };
    // stem -> (2,1) -> (3,2) -> (4,2) -> output
    arch.set_edge(slot(1, 1, 1), EdgeState::Present(hpm))?;
    arch.set_edge(slot(2, 1, 2), EdgeState::Present(id))?;
    arch.set_edge(slot(3, 2, 2), EdgeState::Present(hpm))?;
    arch.set_edge(slot(4, 2, 0), EdgeState::Present(id))?;
    println!("{}\n", arch.validate());

    // an edge out of a node nothing feeds
    arch.set_edge(slot(3, 1, 1), EdgeState::Present(hpm))?;
    println!("{}\n", arch.validate());
    arch.set_edge(slot(3, 1, 1), EdgeState::Absent)?;

    // a live branch that never reaches the output
    arch.set_edge(slot(1, 1, 2), EdgeState::Present(hpm))?;
    arch.set_edge(slot(2, 2, 1), EdgeState::Present(hpm))?;
    println!("{}", arch.validate());
    println!("edges before pruning: {}", arch.present_count());
    let pruned = arch.prune()?;
    println!("edges after pruning:  {}", pruned.present_count());
    println!("{}", encode(&pruned));
    Ok(())
}
